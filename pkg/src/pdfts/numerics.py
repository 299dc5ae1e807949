"""Unitary transforms and circular convolution.

All transforms act on the last axis so that a batch of symbols can be
processed as a 2-D array of shape ``(n_symbols, length)``. The forward DFT
uses the kernel ``exp(-2j*pi*k*n/L)``, the inverse ``exp(+2j*pi*k*n/L)``,
and both are scaled by ``1/sqrt(L)``.
"""

import numpy as np

__all__ = [
    "InvalidInputError",
    "as_vector",
    "dft",
    "idft",
    "dft_direct",
    "idft_direct",
    "dft_matrix",
    "circulant",
    "circular_convolve",
]


class InvalidInputError(ValueError):
    """Raised when a vector argument violates a precondition."""


def as_vector(v, name="v"):
    """Return ``v`` as a complex array, rejecting empty or non-finite input."""
    arr = np.asarray(v, dtype=complex)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise InvalidInputError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return arr


def dft(v):
    """Unitary forward DFT along the last axis (any length)."""
    return np.fft.fft(as_vector(v), axis=-1, norm="ortho")


def idft(v):
    """Unitary inverse DFT along the last axis (any length)."""
    return np.fft.ifft(as_vector(v), axis=-1, norm="ortho")


def dft_matrix(m):
    """Dense unitary DFT matrix ``D`` with ``D @ v == dft(v)``."""
    k = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(k, k) / m) / np.sqrt(m)


def dft_direct(v):
    """O(L^2) direct-summation DFT; reference path for testing ``dft``."""
    arr = as_vector(v)
    return arr @ dft_matrix(arr.shape[-1]).T


def idft_direct(v):
    """O(L^2) direct-summation inverse DFT."""
    arr = as_vector(v)
    return arr @ dft_matrix(arr.shape[-1]).conj()


def circulant(h, n):
    """Dense ``n x n`` circular-convolution matrix for impulse response ``h``."""
    h = as_vector(h, "h")
    if h.ndim != 1 or h.size > n:
        raise InvalidInputError("h must be 1-D and no longer than n")
    col = np.zeros(n, dtype=complex)
    col[: h.size] = h
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def circular_convolve(x, h):
    """Circular convolution ``y[k] = sum_l h[l] x[(k - l) mod N]``.

    ``x`` may be batched along leading axes; ``h`` is 1-D or broadcastable
    against ``x`` on the leading axes.
    """
    x = as_vector(x, "x")
    h = as_vector(h, "h")
    n = x.shape[-1]
    if h.shape[-1] > n:
        raise InvalidInputError(f"h has {h.shape[-1]} taps but x only {n} samples")
    hf = np.fft.fft(h, n=n, axis=-1)
    return np.fft.ifft(np.fft.fft(x, axis=-1) * hf, axis=-1)
