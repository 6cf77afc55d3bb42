"""Tapped-delay-line MIMO channel with Ricean/Rayleigh taps and AWGN."""
from dataclasses import dataclass
import json
import warnings

import numpy as np


@dataclass(frozen=True)
class ChannelProfile:
    """Power delay profile.

    Attributes
    ----------
    tap_delays : tuple of float
        Seconds, nondecreasing, starting at 0.
    tap_powers : tuple of float
        dB; normalized to unit total linear power on use.
    tap_rice_k : tuple of float
        Linear Ricean K-factor per tap (0 means Rayleigh).
    """

    name: str
    tap_delays: tuple
    tap_powers: tuple
    tap_rice_k: tuple

    def __post_init__(self):
        d = np.asarray(self.tap_delays, float)
        if not (len(d) == len(self.tap_powers) == len(self.tap_rice_k)) or len(d) == 0:
            raise ValueError("delays, powers and K-factors must be nonempty and equally long")
        if d[0] != 0 or np.any(np.diff(d) < 0):
            raise ValueError("tap delays must start at 0 and be nondecreasing")
        if np.any(np.asarray(self.tap_rice_k, float) < 0):
            raise ValueError("Ricean K-factors must be >= 0")

    @property
    def linear_powers(self):
        p = 10.0 ** (np.asarray(self.tap_powers, float) / 10.0)
        return p / p.sum()

    @classmethod
    def from_dict(cls, d):
        return cls(
            name=str(d.get("name", "custom")),
            tap_delays=tuple(float(x) * 1e-6 for x in d["delays_us"]),
            tap_powers=tuple(float(x) for x in d["powers_db"]),
            tap_rice_k=tuple(float(x) for x in d.get("rice_k", [0.0] * len(d["delays_us"]))),
        )

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "name": self.name,
            "delays_us": [x * 1e6 for x in self.tap_delays],
            "powers_db": list(self.tap_powers),
            "rice_k": list(self.tap_rice_k),
        }


SUI3 = ChannelProfile("SUI-3", (0.0, 0.4e-6, 0.9e-6), (0.0, -5.0, -10.0), (1.0, 0.0, 0.0))
FLAT = ChannelProfile("flat", (0.0,), (0.0,), (0.0,))

PROFILES = {"SUI-3": SUI3, "sui3": SUI3, "flat": FLAT}


def get_profile(name_or_path):
    if isinstance(name_or_path, ChannelProfile):
        return name_or_path
    if name_or_path in PROFILES:
        return PROFILES[name_or_path]
    return ChannelProfile.from_json(name_or_path)


@dataclass(frozen=True)
class ChannelRealization:
    """Sample-spaced impulse responses, ``cir[r, t, :]`` for tx ``t`` to rx ``r``."""

    cir: np.ndarray
    M: int

    @property
    def nr(self):
        return self.cir.shape[0]

    @property
    def nt(self):
        return self.cir.shape[1]

    @property
    def cfr(self):
        """Frequency responses, shape (M, nr, nt)."""
        return cfr(self, self.M)


def quantize_delays(profile, sample_rate):
    """Nearest-sample delays; returns integer sample indices."""
    return np.rint(np.asarray(profile.tap_delays) * sample_rate).astype(int)


def draw_realization(profile, nt, nr, M, sample_rate, seed, strict=True):
    """Draw independent per-link taps.

    Taps falling on the same sample are summed.  The first tap's line-of-sight
    component has a uniformly random phase per link.

    Parameters
    ----------
    strict : bool
        Raise (True) or warn (False) when the delay spread exceeds ``M/2``
        samples.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    delays = quantize_delays(profile, sample_rate)
    if delays[-1] > M // 2:
        msg = f"delay spread of {delays[-1]} samples exceeds M/2={M // 2}"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg)
    p = profile.linear_powers
    K = np.asarray(profile.tap_rice_k, float)
    los = np.sqrt(p * K / (K + 1.0))
    nlos = np.sqrt(p / (K + 1.0))
    shape = (nr, nt, len(p))
    diffuse = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    phase = np.exp(2j * np.pi * rng.random(shape))
    taps = los * phase + nlos * diffuse
    cir = np.zeros((nr, nt, delays[-1] + 1), dtype=np.complex128)
    for i, d in enumerate(delays):
        cir[:, :, d] += taps[:, :, i]
    return ChannelRealization(cir, M)


def cfr(realization, M=None):
    """M-point DFT of each zero-padded CIR, returned as (M, nr, nt)."""
    M = realization.M if M is None else M
    h = realization.cir
    if h.shape[2] > M:
        raise ValueError("CIR longer than the transform size")
    H = np.fft.fft(h, n=M, axis=2)
    return np.transpose(H, (2, 0, 1))


def awgn(shape, noise_var, rng):
    """Circular complex Gaussian noise with ``E|n|^2 = noise_var``."""
    return np.sqrt(noise_var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def propagate(tx, realization):
    """Noiseless MIMO convolution; output length ``len(tx) + taps - 1``."""
    tx = np.atleast_2d(np.asarray(tx, dtype=np.complex128))
    h = realization.cir
    if tx.shape[0] != h.shape[1]:
        raise ValueError(f"{tx.shape[0]} tx signals for a channel with nt={h.shape[1]}")
    T = tx.shape[1] + h.shape[2] - 1
    out = np.zeros((h.shape[0], T), dtype=np.complex128)
    for r in range(h.shape[0]):
        for t in range(h.shape[1]):
            out[r] += np.convolve(tx[t], h[r, t])
    return out


def apply(tx, realization, snr_db, seed, signal_power=None):
    """Pass ``nt`` transmit signals through the channel and add noise.

    Parameters
    ----------
    tx : array_like, shape (nt, T)
        Equal-length transmit signals.
    snr_db : float
        ``inf`` disables noise.
    signal_power : float, optional
        Reference received power per sample.  Defaults to the measured mean
        received power of the noiseless output.

    Returns
    -------
    rx : ndarray, shape (nr, T + taps - 1)
    noise_var : float
    """
    rx = propagate(tx, realization)
    if np.isinf(snr_db) and snr_db > 0:
        return rx, 0.0
    if signal_power is None:
        signal_power = float(np.mean(np.abs(rx) ** 2))
    noise_var = signal_power / 10.0 ** (snr_db / 10.0)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rx + awgn(rx.shape, noise_var, rng), noise_var
