"""Gray-labelled QPSK / 16QAM mapping, hard decisions and AWGN BER.

Labelling (bit tuples are written MSB first, label index = integer value):

QPSK::

    b0 b1  ->  ((1 - 2*b0) + 1j*(1 - 2*b1)) / sqrt(2)

16QAM (same layout as the LTE uplink table)::

    b0 b1 b2 b3  ->  ((1 - 2*b0)*(1 + 2*b2) + 1j*(1 - 2*b1)*(1 + 2*b3)) / sqrt(10)

so b0/b1 carry the in-phase/quadrature sign and b2/b3 the magnitude. Along
each axis the levels -3, -1, +1, +3 carry the bit pairs 11, 10, 00, 01,
which is a Gray sequence.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc

from .numerics import InvalidInputError

__all__ = [
    "Constellation",
    "qpsk",
    "qam16",
    "get_constellation",
    "modulate",
    "demodulate",
    "slice_symbols",
    "awgn_ber_bound",
    "qfunc",
]

_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray  # shape (order,), indexed by label
    labels: np.ndarray  # shape (order, bits_per_symbol), uint8

    @property
    def order(self):
        return self.points.size

    @property
    def bits_per_symbol(self):
        return self.labels.shape[1]

    def __repr__(self):
        return f"Constellation({self.name!r})"


def _labels(k):
    idx = np.arange(2**k)
    return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)


def _frozen(a):
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def qpsk():
    labels = _labels(2)
    b = labels.astype(float)
    points = ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) / np.sqrt(2)
    return Constellation("qpsk", _frozen(points), _frozen(labels))


@lru_cache(maxsize=None)
def qam16():
    labels = _labels(4)
    b = labels.astype(float)
    re = (1 - 2 * b[:, 0]) * (1 + 2 * b[:, 2])
    im = (1 - 2 * b[:, 1]) * (1 + 2 * b[:, 3])
    return Constellation("16qam", _frozen((re + 1j * im) / np.sqrt(10)), _frozen(labels))


_BY_NAME = {"qpsk": qpsk, "4qam": qpsk, "4": qpsk, "16qam": qam16, "qam16": qam16, "16": qam16}


def get_constellation(name):
    """Look up a constellation by name (``"qpsk"``, ``"16qam"``) or order."""
    key = str(name).lower()
    if key not in _BY_NAME:
        raise InvalidInputError(f"unknown modulation {name!r}; expected qpsk or 16qam")
    return _BY_NAME[key]()


def modulate(bits, c):
    """Map a flat bit sequence onto constellation points."""
    bits = np.asarray(bits)
    k = c.bits_per_symbol
    if bits.ndim != 1 or bits.size % k:
        raise InvalidInputError(f"bit count {bits.size} is not a multiple of {k}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise InvalidInputError("bits must be 0 or 1")
    weights = 1 << np.arange(k - 1, -1, -1)
    idx = bits.reshape(-1, k).astype(np.int64) @ weights
    return c.points[idx]


def _nearest(symbols, c):
    symbols = np.asarray(symbols, dtype=complex)
    if not np.all(np.isfinite(symbols)):
        raise InvalidInputError("symbols contain NaN or Inf")
    flat = symbols.ravel()
    out = np.empty(flat.size, dtype=np.int64)
    for start in range(0, flat.size, _CHUNK):
        blk = flat[start : start + _CHUNK]
        d2 = np.abs(blk[:, None] - c.points[None, :]) ** 2
        # quantised so that rounding noise cannot break a geometric tie;
        # argmin then resolves ties toward the smallest label index
        out[start : start + _CHUNK] = np.argmin(np.round(d2, 12), axis=1)
    return out.reshape(symbols.shape)


def demodulate(symbols, c):
    """Minimum-distance hard decisions, returned as a flat bit array."""
    return c.labels[_nearest(symbols, c)].reshape(-1)


def slice_symbols(symbols, c):
    """Replace each symbol with its nearest constellation point (shape kept)."""
    return c.points[_nearest(symbols, c)]


def qfunc(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2))


def _interval_prob(a, b):
    """P(a < Z < b) for standard normal Z, computed from the nearer tail."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    right = qfunc(a) - qfunc(b)  # accurate when a >= 0
    left = qfunc(-b) - qfunc(-a)  # accurate when b <= 0
    mid = 1.0 - qfunc(-a) - qfunc(b)
    return np.where(a >= 0, right, np.where(b <= 0, left, mid))


def _axis_ber(levels, bits, sigma):
    """Exact bit-error probability of a Gray PAM axis with midpoint thresholds.

    ``levels`` sorted ascending, ``bits`` the per-level label bits on this
    axis (shape ``(n_levels, n_bits)``), ``sigma`` the per-dimension noise
    standard deviation. Returns the error probability summed over bits and
    averaged over levels.
    """
    edges = np.concatenate(([-np.inf], (levels[1:] + levels[:-1]) / 2, [np.inf]))
    total = 0.0
    for i, lv in enumerate(levels):
        p_region = _interval_prob((edges[:-1] - lv) / sigma, (edges[1:] - lv) / sigma)
        flips = np.sum(bits != bits[i], axis=1)
        total += np.sum(p_region * flips)
    return total / len(levels)


def awgn_ber_bound(es_n0_db, c):
    """Exact Gray-labelled BER of ``c`` over AWGN at the given Es/N0 in dB.

    Both supported constellations are separable into two identical Gray PAM
    axes, so the bit error rate is assembled from per-axis interval
    probabilities (sums of Q-function terms).
    """
    es_n0 = 10.0 ** (np.asarray(es_n0_db, dtype=float) / 10.0)
    if not np.all(np.isfinite(es_n0)):
        raise InvalidInputError("es_n0_db must be finite")
    re = np.round(c.points.real, 12)
    levels = np.unique(re)
    # in-phase bits are the ones constant within each in-phase level
    axis_bits = [b for b in range(c.bits_per_symbol)
                 if all(len(set(c.labels[re == lv, b])) == 1 for lv in levels)]
    per_level = np.array([c.labels[np.argmax(re == lv), axis_bits] for lv in levels])
    sigma = np.sqrt(1.0 / (2.0 * np.atleast_1d(es_n0)))  # unit Es
    errs = np.array([_axis_ber(levels, per_level, s) for s in sigma])
    # two axes, each carrying half of the bits
    ber = 2 * errs / c.bits_per_symbol
    return ber.reshape(np.shape(es_n0)) if np.ndim(es_n0) else float(ber[0])
