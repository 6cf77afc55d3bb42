"""Monte Carlo sweeps (MSE, BER, PAPR) with deterministic seeding.

Random streams for frame ``f`` come from ``SeedSequence([master_seed, f])``
and are shared by all methods, so methods are compared on identical
channels, data and noise.  The noise of each frame is drawn once at unit
variance and scaled per SNR point; since the AFB is linear its output is
computed once as well.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import hashlib
import json
import re
import subprocess
import os

import numpy as np

from . import __version__
from .channel import ChannelProfile, awgn, draw_realization, get_profile, propagate
from .estimator import (compensate_pilot_interference, empirical_mse, interpolate_missing,
                        lmmse_equalize, ls_estimate_fdm, ls_estimate_iam, pilot_leakage, qam_modulate)
from .filterbank import analyze, design_phydyas, oqam_map, papr_db, signal_length, synthesize
from .interference import full_table
from .preamble import Method, base_columns, build_preamble


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_TOKEN = re.compile(r"^(?P<m>[a-z_-]+?)(?:[-+]g(?P<g>\d+))?$")


@dataclass(frozen=True)
class MethodSpec:
    method: Method
    guards: int = 0

    @property
    def label(self):
        if self.method is Method.FDM_OPT and self.guards:
            return f"{self.method.value}-g{self.guards}"
        return self.method.value


def parse_method(token, default_guards=0):
    """``"fdm-opt"``, ``"fdm-opt-g1"``, ``"iam-c"`` ... -> MethodSpec."""
    if isinstance(token, MethodSpec):
        return token
    tok = str(token).strip().lower().replace("_", "-")
    try:
        return MethodSpec(Method.parse(tok), default_guards if Method.parse(tok) is Method.FDM_OPT else 0)
    except ValueError:
        pass
    mt = _TOKEN.match(tok)
    if not mt or mt.group("g") is None:
        raise ConfigError(f"unknown method {token!r}")
    meth = Method.parse(mt.group("m"))
    if meth is not Method.FDM_OPT:
        raise ConfigError(f"guard columns apply to fdm-opt only, got {token!r}")
    return MethodSpec(meth, int(mt.group("g")))


@dataclass(frozen=True)
class SimConfig:
    M: int = 64
    nt: int = 2
    nr: int = 2
    qam_order: int = 4
    frame_cols: int = 40
    snr_db: tuple = (0.0, 10.0, 20.0, 30.0)
    methods: tuple = ("iam-r", "iam-c", "e-iam-c", "fdm-conv", "fdm-opt")
    guards: int = 0
    channel: object = "SUI-3"
    frames: int = 200
    master_seed: int = 2024
    subcarrier_spacing_hz: float = 10940.0
    field: str = "real"
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.M, (int, np.integer)) or self.M < 8 or self.M % 2:
            raise ConfigError(f"M must be an even integer >= 8, got {self.M}")
        if self.nt < 1 or self.nr < 1:
            raise ConfigError("nt and nr must be >= 1")
        if self.M % self.nt:
            raise ConfigError(f"M={self.M} is not divisible by nt={self.nt}")
        if self.frames < 1:
            raise ConfigError("frames must be >= 1")
        if len(self.snr_db) == 0:
            raise ConfigError("snr_db must be nonempty")
        if self.qam_order not in (4, 16):
            raise ConfigError("qam_order must be 4 or 16")
        if self.frame_cols < 2 or self.frame_cols % 2:
            raise ConfigError("frame_cols must be a positive even number")
        if self.guards < 0:
            raise ConfigError("guards must be >= 0")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        if self.field not in ("real", "complex"):
            raise ConfigError("field must be 'real' or 'complex'")
        for m in self.methods:
            parse_method(m, self.guards)
        try:
            self.profile
        except (OSError, KeyError, ValueError) as e:
            raise ConfigError(f"bad channel profile: {e}") from e

    @property
    def profile(self):
        ch = self.channel
        if isinstance(ch, dict):
            return ChannelProfile.from_dict(ch)
        return get_profile(ch)

    @property
    def method_specs(self):
        return [parse_method(m, self.guards) for m in self.methods]

    @property
    def sample_rate(self):
        return self.M * self.subcarrier_spacing_hz

    def to_dict(self):
        d = asdict(self)
        d["snr_db"] = [float(s) for s in self.snr_db]
        d["methods"] = [str(m) for m in self.methods]
        if isinstance(self.channel, ChannelProfile):
            d["channel"] = self.channel.to_dict()
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d, **overrides):
        d = dict(d)
        d.update({k: v for k, v in overrides.items() if v is not None})
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for k in ("snr_db", "methods"):
            if k in d and not isinstance(d[k], (list, tuple)):
                d[k] = [d[k]]
            if k in d:
                d[k] = tuple(d[k])
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_json(cls, path, **overrides):
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON ({e})") from e
        return cls.from_dict(d, **overrides)


def version_string():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

def _ci(x):
    x = np.asarray(x, float)
    if x.size < 2:
        return float("nan")
    return float(1.96 * x.std(ddof=1) / np.sqrt(x.size))


@dataclass
class SweepResult:
    """Per-frame samples and their aggregates.

    Arrays are indexed ``[method, snr, frame]``.
    """

    methods: list
    nt: int
    snr_db: list
    mse: np.ndarray
    mse_active: np.ndarray
    ber: np.ndarray = None
    ber_genie: np.ndarray = None
    papr_db: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def frames(self):
        return self.mse.shape[2]

    def mean(self, what="mse"):
        return np.asarray(getattr(self, what)).mean(axis=2)

    def ci(self, what="mse"):
        arr = np.asarray(getattr(self, what))
        return np.array([[_ci(arr[i, j]) for j in range(arr.shape[1])] for i in range(arr.shape[0])])

    def row(self, method, snr):
        i = self.methods.index(method)
        j = list(self.snr_db).index(snr)
        return i, j

    def records(self):
        mse_m, mse_c = self.mean("mse"), self.ci("mse")
        if self.ber is not None:
            ber_m, ber_c = self.mean("ber"), self.ci("ber")
        out = []
        for i, m in enumerate(self.methods):
            for j, s in enumerate(self.snr_db):
                out.append({
                    "method": m, "nt": self.nt, "snr_db": float(s),
                    "mse": float(mse_m[i, j]), "mse_ci": float(mse_c[i, j]),
                    "ber": float(ber_m[i, j]) if self.ber is not None else None,
                    "ber_ci": float(ber_c[i, j]) if self.ber is not None else None,
                    "frames": self.frames,
                })
        return out

    def to_csv(self, path=None):
        def f(v):
            return "" if v is None else f"{v:.10g}"

        lines = ["method,nt,snr_db,mse,mse_ci,ber,ber_ci,frames"]
        for r in self.records():
            lines.append(",".join([r["method"], str(r["nt"]), f(r["snr_db"]), f(r["mse"]), f(r["mse_ci"]),
                                   f(r["ber"]), f(r["ber_ci"]), str(r["frames"])]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def summary(self):
        d = {"metadata": self.metadata, "records": self.records(), "papr_db": self.papr_db}
        act = self.mean("mse_active")
        d["mse_active"] = {m: [float(v) for v in act[i]] for i, m in enumerate(self.methods)}
        if self.ber_genie is not None:
            g = self.mean("ber_genie")
            d["ber_genie"] = {m: [float(v) for v in g[i]] for i, m in enumerate(self.methods)}
        return d


# --------------------------------------------------------------------------
# sweep engine
# --------------------------------------------------------------------------

@dataclass
class _Context:
    config: SimConfig
    filt: object
    table: object
    presets: list
    leaks: list
    noise_var: np.ndarray
    data_power: float
    want_ber: bool


def _prepare(config, want_ber):
    filt = design_phydyas(config.M)
    table = full_table(filt)
    presets = []
    for spec in config.method_specs:
        presets.append(build_preamble(spec.method, config.nt, config.M, table, guards=spec.guards,
                                      **({"field": config.field} if spec.method is Method.FDM_OPT else {})))
    # unit-energy QAM -> E[a^2] = 1/4 per real slot -> 2 E[a^2] per sample and antenna
    data_power = 0.5
    snr = np.asarray(config.snr_db, float)
    noise_var = config.nt * data_power / 10.0 ** (snr / 10.0)
    leaks = [pilot_leakage(p, table, p.num_cols + config.frame_cols) for p in presets] if want_ber else []
    return _Context(config, filt, table, presets, leaks, noise_var, data_power, want_ber)


def frame_streams(master_seed, frame):
    """Independent generators for data, channel and noise of one frame."""
    ss = np.random.SeedSequence([int(master_seed), int(frame)])
    return [np.random.default_rng(s) for s in ss.spawn(3)]


def _estimate(pset, Y):
    """Y is (M, nr, N); returns an interpolated ChannelEstimate."""
    if pset.method.is_fdm:
        return interpolate_missing(ls_estimate_fdm(Y[:, :, pset.pilot_cols[0]], pset))
    cols = list(pset.pilot_cols)
    C = np.transpose(pset.expected_pilots[:, :, cols], (1, 0, 2))
    return ls_estimate_iam(Y[:, :, cols], C)


def _run_frame(ctx, f):
    cfg = ctx.config
    M, nt, nr, Nd = cfg.M, cfg.nt, cfg.nr, cfg.frame_cols
    nb = int(np.log2(cfg.qam_order))
    rng_data, rng_chan, rng_noise = frame_streams(cfg.master_seed, f)
    bits = rng_data.integers(0, 2, size=(nt, M, Nd // 2, nb))
    data = np.array([oqam_map(qam_modulate(bits[t], cfg.qam_order)) for t in range(nt)])
    chan = draw_realization(cfg.profile, nt, nr, M, cfg.sample_rate, rng_chan)
    Htrue = chan.cfr
    nmax = max(p.num_cols for p in ctx.presets) + Nd
    T = signal_length(nmax, ctx.filt) + chan.cir.shape[2] - 1
    noise = awgn((nr, T), 1.0, rng_noise)
    Yn = np.stack([analyze(noise[r], ctx.filt, nmax) for r in range(nr)], axis=1)  # (M, nr, nmax)
    S = len(cfg.snr_db)
    K = len(ctx.presets)
    out = {k: np.zeros((K, S)) for k in ("mse", "mse_active", "ber", "ber_genie")}
    for i, pset in enumerate(ctx.presets):
        C = pset.num_cols
        N = C + Nd
        grids = np.concatenate([pset.grids, data.astype(np.complex128)], axis=2)
        tx = np.array([synthesize(g, ctx.filt) for g in grids])
        rx = propagate(tx, chan)
        Yc = np.stack([analyze(rx[r], ctx.filt, N) for r in range(nr)], axis=1)
        for j, s2 in enumerate(ctx.noise_var):
            Y = Yc + np.sqrt(s2) * Yn[:, :, :N]
            est = _estimate(pset, Y)
            out["mse"][i, j] = empirical_mse(est, Htrue)
            out["mse_active"][i, j] = empirical_mse(est, Htrue, active_only=True)
            if ctx.want_ber:
                Yd = Y[:, :, C:]
                comp = compensate_pilot_interference(Yd, pset, est, leak=ctx.leaks[i])
                det = lmmse_equalize(comp, est, s2, tx_bits=bits, qam_order=cfg.qam_order,
                                     signal_power=ctx.data_power)
                out["ber"][i, j] = det.ber
                comp_g = compensate_pilot_interference(Yd, pset, Htrue, leak=ctx.leaks[i])
                gen = lmmse_equalize(comp_g, Htrue, s2, tx_bits=bits, qam_order=cfg.qam_order,
                                     signal_power=ctx.data_power)
                out["ber_genie"][i, j] = gen.ber
    return out


def _run_chunk(args):
    ctx, frames = args
    return [(f, _run_frame(ctx, f)) for f in frames]


def _sweep(config, want_ber):
    ctx = _prepare(config, want_ber)
    K, S, F = len(ctx.presets), len(config.snr_db), config.frames
    acc = {k: np.zeros((K, S, F)) for k in ("mse", "mse_active", "ber", "ber_genie")}
    frames = list(range(F))
    if config.workers > 1:
        chunks = [frames[w::config.workers] for w in range(config.workers)]
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            results = [r for part in ex.map(_run_chunk, [(ctx, c) for c in chunks]) for r in part]
    else:
        results = _run_chunk((ctx, frames))
    for f, out in results:
        for k in acc:
            acc[k][:, :, f] = out[k]
    labels = [s.label for s in config.method_specs]
    meta = {
        "config_hash": config.digest(),
        "master_seed": config.master_seed,
        "version": version_string(),
        "config": config.to_dict(),
        "preamble_columns": {s.label: p.num_cols for s, p in zip(config.method_specs, ctx.presets)},
    }
    return SweepResult(labels, config.nt, list(config.snr_db), acc["mse"], acc["mse_active"],
                       acc["ber"] if want_ber else None, acc["ber_genie"] if want_ber else None,
                       metadata=meta)


def run_mse_sweep(config):
    """Channel-estimation MSE per method and SNR."""
    return _sweep(config, want_ber=False)


def run_ber_sweep(config):
    """BER (and MSE) per method and SNR, plus a perfect-CSI reference."""
    return _sweep(config, want_ber=True)


def preamble_papr(pset, filt):
    """Largest per-antenna PAPR of a preamble, averaged over its nominal duration.

    The nominal duration is ``C * M/2`` samples for ``C`` non-guard columns.
    """
    C = pset.num_cols - pset.guards
    dur = C * pset.M // 2
    return max(papr_db(synthesize(g, filt), duration=dur) for g in pset.grids)


def run_papr(config):
    """PAPR in dB of each configured method's preamble (no data)."""
    filt = design_phydyas(config.M)
    table = full_table(filt)
    out = {}
    for spec in config.method_specs:
        kw = {"field": config.field} if spec.method is Method.FDM_OPT else {}
        pset = build_preamble(spec.method, config.nt, config.M, table, guards=spec.guards, **kw)
        out[spec.label] = float(preamble_papr(pset, filt))
    return out
