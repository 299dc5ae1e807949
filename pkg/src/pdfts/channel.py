"""Tapped-delay-line channels (AWGN, EPA, EVA, custom) and symbol reception through them.

Tap tables are the LTE extended pedestrian / vehicular A profiles
(3GPP TS 36.101 Annex B.2). Fading is block Rayleigh: one independent
realisation per symbol, no Doppler inside a symbol.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import InvalidInputError, as_vector
from .txchain import ConfigError

__all__ = [
    "ChannelModel",
    "ChannelRealization",
    "EPA",
    "EVA",
    "AWGN",
    "get_channel_model",
    "realize",
    "realize_batch",
    "apply",
    "noise_var_for_snr",
]

SAMPLE_RATE = 30.72e6


@dataclass(frozen=True)
class ChannelModel:
    name: str
    tap_delays: tuple  # seconds
    tap_powers_db: tuple
    fading: str = "rayleigh_block"

    def __post_init__(self):
        delays = np.asarray(self.tap_delays, dtype=float)
        if delays.size == 0 or delays.size != len(self.tap_powers_db):
            raise ConfigError(f"channel {self.name}: need one power per delay")
        if np.any(delays < 0) or np.any(np.diff(delays) <= 0):
            raise ConfigError(f"channel {self.name}: delays must be non-negative and strictly increasing")
        if self.fading not in ("static", "rayleigh_block"):
            raise ConfigError(f"channel {self.name}: fading must be 'static' or 'rayleigh_block'")

    @property
    def linear_powers(self):
        p = 10.0 ** (np.asarray(self.tap_powers_db, dtype=float) / 10.0)
        return p / p.sum()

    def sample_profile(self, sample_rate=SAMPLE_RATE):
        """Per-sample power-delay profile (delays rounded, colliding taps summed)."""
        idx = np.rint(np.asarray(self.tap_delays) * sample_rate).astype(int)
        prof = np.zeros(idx.max() + 1)
        np.add.at(prof, idx, self.linear_powers)
        return prof

    @classmethod
    def custom(cls, pairs, fading="rayleigh_block", name="custom"):
        """Build from ``(delay_ns, power_db)`` pairs."""
        pairs = list(pairs)
        return cls(name, tuple(d * 1e-9 for d, _ in pairs), tuple(p for _, p in pairs), fading)


AWGN = ChannelModel("awgn", (0.0,), (0.0,), "static")
EPA = ChannelModel(
    "epa",
    tuple(d * 1e-9 for d in (0, 30, 70, 90, 110, 190, 410)),
    (0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8),
)
EVA = ChannelModel(
    "eva",
    tuple(d * 1e-9 for d in (0, 30, 150, 310, 370, 710, 1090, 1730, 2510)),
    (0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9),
)

_MODELS = {"awgn": AWGN, "epa": EPA, "eva": EVA}


def get_channel_model(name):
    try:
        return _MODELS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown channel model {name!r}; expected one of {sorted(_MODELS)} or custom") from None


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray  # (..., L+1)
    n_fft: int

    @property
    def freq_response(self):
        """sqrt(N) * unitary DFT of the zero-padded taps, i.e. the per-bin gain."""
        return np.fft.fft(self.taps, n=self.n_fft, axis=-1)


def realize_batch(model, rng, n, n_fft=2048, cp_len=144, sample_rate=SAMPLE_RATE):
    """``n`` independent realisations stacked as taps of shape ``(n, L+1)``."""
    prof = model.sample_profile(sample_rate)
    if prof.size > cp_len and prof.size > 1:
        raise ConfigError(
            f"channel {model.name}: delay spread of {prof.size - 1} samples exceeds cp_len={cp_len}"
        )
    if model.fading == "static":
        taps = np.broadcast_to(np.sqrt(prof).astype(complex), (n, prof.size)).copy()
    else:
        g = rng.standard_normal((n, prof.size, 2)) @ np.array([1.0, 1j])
        taps = g * np.sqrt(prof / 2.0)
    return ChannelRealization(taps, n_fft)


def realize(model, rng, sample_rate=SAMPLE_RATE, n_fft=2048, cp_len=144):
    """One realisation; taps are 1-D."""
    ch = realize_batch(model, rng, 1, n_fft, cp_len, sample_rate)
    return ChannelRealization(ch.taps[0], n_fft)


def apply(x, ch, noise_var, rng, cp_len):
    """Convolve CP-prefixed symbol(s) with the channel, strip the CP, add noise.

    ``x`` has shape ``(..., cp_len + N)``; the taps broadcast against its
    leading axes. Returns the ``N``-sample bodies.
    """
    x = as_vector(x, "x")
    taps = np.asarray(ch.taps, dtype=complex)
    n_taps = taps.shape[-1]
    if n_taps - 1 > cp_len:
        raise InvalidInputError(f"channel memory {n_taps - 1} exceeds cp_len={cp_len}")
    n = x.shape[-1] - cp_len
    if n <= 0:
        raise InvalidInputError("x shorter than its cyclic prefix")
    if n_taps == 1:
        y = x[..., cp_len:] * taps[..., :1]
    else:
        # linear convolution; only outputs cp_len .. cp_len+N-1 are kept
        y = np.zeros(np.broadcast_shapes(x.shape[:-1], taps.shape[:-1]) + (n,), dtype=complex)
        active = np.flatnonzero(np.any(taps.reshape(-1, n_taps) != 0, axis=0))
        for l in active:
            y += taps[..., l : l + 1] * x[..., cp_len - l : cp_len - l + n]
    if noise_var > 0:
        y = y + np.sqrt(noise_var / 2.0) * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y


def noise_var_for_snr(snr_db):
    """Noise variance giving the requested per-bin Es/N0 for unit-energy symbols.

    With unitary transforms a unit-energy symbol on an allocated bin sees
    per-bin noise equal to the time-domain sample variance, so sigma^2 = 1/snr.
    """
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)
