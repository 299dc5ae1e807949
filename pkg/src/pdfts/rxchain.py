"""Channel estimation, MMSE equalisation and the three demodulation paths.

The punctured receiver first forms ``d_e``: the kept bins are equalised,
divided by the transmit gain alpha, the punctured bins are zeroed and an
M-point IDFT brings everything back to the DFT-spread input. There

    d_e[k] = d_e_true[k] + r[k] + noise,   r[k] = p[k mod N_p] * exp(2j*pi*k*S/M)

and the null slots expose ``p`` directly. ``cancel`` reads ``p`` off the
nulls and subtracts it everywhere; ``iterate`` regenerates ``p`` from hard
decisions instead.
"""

from dataclasses import dataclass

import numpy as np

from .modem import slice_symbols
from .numerics import InvalidInputError, dft, idft
from .txchain import ConfigError, build_pattern, check_null_layout

__all__ = [
    "DegenerateChannelError",
    "EqualizerTaps",
    "ChestResult",
    "extract_bins",
    "estimate_channel",
    "mmse_taps",
    "rx_plain",
    "rx_ofdm",
    "rx_punctured_demap",
    "residues_from_nulls",
    "interference_at",
    "cancel",
    "iterate",
]


class DegenerateChannelError(ValueError):
    """Zero channel gain with zero noise: the MMSE tap is undefined."""


@dataclass(frozen=True)
class EqualizerTaps:
    taps: np.ndarray  # (..., n_bins)
    bias: np.ndarray  # (..., 1): mean of tap * H, divided out for unbiased output


@dataclass(frozen=True)
class ChestResult:
    estimates: np.ndarray  # (..., M)
    rs_bin_estimates: np.ndarray  # (..., N_p)
    noise_var_est: float | None = None


def extract_bins(y, cfg):
    """Unitary N-point DFT of the received body, restricted to the allocation."""
    s = cfg.subcarrier_start
    return dft(y)[..., s : s + cfg.m_alloc]


def estimate_channel(rx_grid, rs, pattern):
    """Least-squares estimates at the pilot bins, linearly interpolated.

    Outside the first/last pilot the nearest pilot estimate is held.
    """
    rx_grid = np.asarray(rx_grid, dtype=complex)
    pilots = pattern.punctured
    if pilots.size < 2:
        raise InvalidInputError("linear interpolation needs at least two reference bins")
    ls = rx_grid[..., pilots] / rs.values
    bins = np.arange(rx_grid.shape[-1])
    flat = ls.reshape(-1, pilots.size)
    est = np.array([np.interp(bins, pilots, row.real) + 1j * np.interp(bins, pilots, row.imag) for row in flat])
    return ChestResult(est.reshape(rx_grid.shape), ls)


def mmse_taps(response, noise_var, es=1.0):
    """Per-bin MMSE taps ``conj(H) / (|H|^2 + noise_var / es)``."""
    h = response.estimates if isinstance(response, ChestResult) else response
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise InvalidInputError("channel response contains NaN or Inf")
    denom = np.abs(h) ** 2 + noise_var / es
    if np.any(denom == 0):
        raise DegenerateChannelError("zero channel gain with zero noise variance")
    taps = h.conj() / denom
    bias = np.mean(taps * h, axis=-1, keepdims=True).real
    return EqualizerTaps(taps, bias)


def _equalize(bins, eq, unbiased):
    z = bins * eq.taps
    return z / eq.bias if unbiased else z


def rx_plain(y, eq, cfg, unbiased=True):
    """Plain DFT-s-OFDM receiver: equalise all M bins, IDFT_M, keep the data slots.

    Applied to a punctured symbol this is the receiver that ignores the
    puncturing altogether (reference bins are treated as data).
    """
    if cfg.waveform_kind == "ofdm":
        raise ConfigError("rx_plain expects a DFT-spread waveform")
    z = _equalize(extract_bins(y, cfg), eq, unbiased)
    return idft(z)[..., : cfg.n_data]


def rx_ofdm(y, eq, cfg, unbiased=True):
    return _equalize(extract_bins(y, cfg), eq, unbiased)


def rx_punctured_demap(y, eq, cfg, pattern=None, unbiased=True):
    """Form ``d_e`` (length M) from a received punctured symbol.

    ``eq`` holds taps either for the kept bins only or for all M bins.
    """
    pattern = build_pattern(cfg) if pattern is None else pattern
    bins = extract_bins(y, cfg)
    taps = np.asarray(eq.taps)
    if taps.shape[-1] == cfg.m_alloc:
        taps = taps[..., pattern.kept]
    elif taps.shape[-1] != pattern.kept.size:
        raise InvalidInputError(f"equalizer has {taps.shape[-1]} taps for {pattern.kept.size} kept bins")
    gain = cfg.alpha if pattern.n_punct else 1.0
    z = np.zeros(bins.shape, dtype=complex)
    z[..., pattern.kept] = bins[..., pattern.kept] * taps / (gain * (eq.bias if unbiased else 1.0))
    return idft(z)


def _rotation(positions, offset, m):
    return np.exp(2j * np.pi * np.asarray(positions) * offset / m)


def residues_from_nulls(values, null_positions, n_punct, offset, m):
    """Estimate ``p[0..N_p)`` from the null-slot samples of ``d_e``.

    Samples are de-rotated and averaged within each residue class.
    """
    null_positions = np.asarray(null_positions)
    cls = null_positions % n_punct
    weights = np.zeros((null_positions.size, n_punct))
    weights[np.arange(null_positions.size), cls] = 1.0
    weights /= weights.sum(axis=0, keepdims=True)
    return (values * _rotation(null_positions, -offset, m)) @ weights


def interference_at(positions, residues, offset, m):
    positions = np.asarray(positions)
    n_punct = residues.shape[-1]
    return residues[..., positions % n_punct] * _rotation(positions, offset, m)


def _layout(cfg, pattern, null_positions):
    pattern = build_pattern(cfg) if pattern is None else pattern
    m = cfg.m_alloc
    if null_positions is None:
        nulls = cfg.null_positions
        data = cfg.data_positions
    else:
        nulls = np.sort(np.asarray(null_positions, dtype=int))
        data = np.setdiff1d(np.arange(m), nulls)
    if pattern.n_punct:
        try:
            check_null_layout(m, pattern.n_punct, nulls)
        except ConfigError as exc:
            raise ConfigError(f"unrecoverable null layout: {exc}") from None
    return pattern, data, nulls


def _subtract(d_e, source, pattern, data, nulls, m):
    if pattern.n_punct == 0:
        return d_e[..., data]
    p = residues_from_nulls(source[..., nulls], nulls, pattern.n_punct, pattern.offset, m)
    return d_e[..., data] - interference_at(data, p, pattern.offset, m)


def cancel(d_e_tilde, cfg, pattern=None, null_positions=None):
    """Low-complexity interference cancellation; returns the data slots."""
    d_e_tilde = np.asarray(d_e_tilde, dtype=complex)
    pattern, data, nulls = _layout(cfg, pattern, null_positions)
    return _subtract(d_e_tilde, d_e_tilde, pattern, data, nulls, cfg.m_alloc)


def iterate(d_e_tilde, cfg, n_iters, pattern=None, null_positions=None, constellation=None):
    """Decision-feedback receiver; ``n_iters = 0`` is ``cancel``.

    Each iteration slices the current estimate, passes it through the
    puncturing channel (DFT, zero punctured bins, IDFT) and takes the
    interference samples from the regenerated null slots.
    """
    if n_iters < 0:
        raise InvalidInputError("n_iters must be >= 0")
    d_e_tilde = np.asarray(d_e_tilde, dtype=complex)
    pattern, data, nulls = _layout(cfg, pattern, null_positions)
    m = cfg.m_alloc
    c = cfg.constellation if constellation is None else constellation
    est = _subtract(d_e_tilde, d_e_tilde, pattern, data, nulls, m)
    if pattern.n_punct == 0:
        return est
    for _ in range(n_iters):
        frame = np.zeros(d_e_tilde.shape, dtype=complex)
        frame[..., data] = slice_symbols(est, c)
        spec = dft(frame)
        spec[..., pattern.punctured] = 0
        regen = idft(spec)
        est = _subtract(d_e_tilde, regen, pattern, data, nulls, m)
    return est
