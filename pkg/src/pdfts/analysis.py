"""Interference structure, dense-matrix reference receiver, PAPR and noise estimation.

The dense matrices here exist only for verification. Production paths in
``txchain``/``rxchain`` use index arithmetic and FFTs.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import InvalidInputError, dft, dft_matrix, idft
from .txchain import ConfigError, build_pattern, kept_gain

__all__ = [
    "InterferenceReport",
    "LemmaCheck",
    "OracleResult",
    "PaprRecord",
    "interference_vector",
    "periodicity_deviation",
    "verify_lemma1",
    "puncture_matrix",
    "nulling_matrix",
    "layout_matrix",
    "transmit_matrix",
    "oracle_receiver",
    "matrix_rank",
    "papr",
    "ccdf",
    "papr_at_ccdf",
    "estimate_noise_power",
    "snr_at_ber",
    "CCDF_THRESHOLDS_DB",
]

CCDF_THRESHOLDS_DB = np.round(np.arange(0.0, 12.0 + 1e-9, 0.1), 1)


@dataclass(frozen=True)
class InterferenceReport:
    r: np.ndarray
    residues: np.ndarray
    max_periodicity_deviation: float


def _derotated(r, offset, m):
    k = np.arange(m)
    return r * np.exp(-2j * np.pi * k * offset / m)


def periodicity_deviation(r, n_punct, offset):
    """max_k |r_k e^{-j2pi kS/M} - r_{k+Np} e^{-j2pi (k+Np)S/M}| (indices mod M)."""
    m = r.shape[-1]
    if n_punct == 0:
        return 0.0
    q = _derotated(r, offset, m)
    return float(np.max(np.abs(q - np.roll(q, -n_punct, axis=-1)), initial=0.0))


def interference_vector(d_e, pattern):
    """Interference added to ``d_e`` by zeroing the punctured DFT outputs."""
    d_e = np.asarray(d_e, dtype=complex)
    if d_e.shape[-1] != pattern.m:
        raise InvalidInputError(f"d_e must have length {pattern.m}")
    spec = dft(d_e)
    spec[..., pattern.punctured] = 0
    r = idft(spec) - d_e
    n_p = pattern.n_punct
    if n_p == 0:
        return InterferenceReport(r, np.zeros(r.shape[:-1] + (0,), dtype=complex), 0.0)
    residues = _derotated(r, pattern.offset, pattern.m)[..., :n_p]
    return InterferenceReport(r, residues, periodicity_deviation(r, n_p, pattern.offset))


@dataclass(frozen=True)
class LemmaCheck:
    periodicity: float  # worst relative de-rotated periodicity deviation
    construction: float  # worst relative mismatch to the short-IDFT construction

    @property
    def max_deviation(self):
        return max(self.periodicity, self.construction)


def verify_lemma1(m, n_i, s, trials, rng):
    """Numerically check that interleaved zeroing yields periodic interference.

    For ``trials`` random spectra X: zero bins n = s (mod n_i+1), take the
    unitary IDFT and form r = y - x. Two checks, both relative to max|r|:

    * the de-rotated r is periodic with period M/(n_i+1);
    * r_k equals sqrt(Np/M) * IDFT_Np(-X[(n_i+1)m + s])[k mod Np]
      * exp(j2pi k s/M), built independently from the zeroed samples.
    """
    if n_i < 1 or m % (n_i + 1):
        raise ConfigError(f"divisibility: n_i+1={n_i + 1} must divide m={m}")
    if not 0 <= s <= n_i:
        raise ConfigError(f"offset {s} outside [0, {n_i}]")
    step = n_i + 1
    n_p = m // step
    X = rng.standard_normal((trials, m)) + 1j * rng.standard_normal((trials, m))
    Y = X.copy()
    zeroed = np.arange(s, m, step)
    Y[:, zeroed] = 0
    r = idft(Y) - idft(X)

    scale = np.max(np.abs(r), axis=-1)
    scale = np.where(scale > 0, scale, 1.0)

    q = _derotated(r, s, m)
    per = np.max(np.abs(q - np.roll(q, -n_p, axis=-1)), axis=-1) / scale

    k = np.arange(m)
    short = np.sqrt(n_p / m) * idft(-X[:, zeroed])
    built = short[:, k % n_p] * np.exp(2j * np.pi * k * s / m)
    con = np.max(np.abs(built - r), axis=-1) / scale
    return LemmaCheck(float(per.max(initial=0.0)), float(con.max(initial=0.0)))


def puncture_matrix(m, n_i, s):
    """Row-selection matrix keeping every bin except n = s (mod n_i+1).

    Built as a Kronecker product of identity blocks, independently of the
    index-set construction in ``build_pattern``.
    """
    block = np.delete(np.eye(n_i + 1), s, axis=0)
    return np.kron(np.eye(m // (n_i + 1)), block)


def nulling_matrix(m, n_i, s, variant="reinsert"):
    """Map the M - Np kept bins back into M slots.

    ``"reinsert"`` puts them back at their own positions (empty slots at the
    punctured bins). ``"block_end"`` is ``I_Np kron [I_Ni 0]^T``, which packs
    each block's kept bins to its front and leaves the block's last slot empty.
    """
    n_p = m // (n_i + 1)
    if variant == "reinsert":
        return puncture_matrix(m, n_i, s).T
    if variant == "block_end":
        return np.kron(np.eye(n_p), np.vstack([np.eye(n_i), np.zeros((1, n_i))]))
    raise InvalidInputError(f"unknown nulling variant {variant!r}")


def layout_matrix(m, null_positions):
    """Permutation ``M_t`` whose first columns address data slots, last the nulls."""
    nulls = np.sort(np.asarray(null_positions, dtype=int))
    data = np.setdiff1d(np.arange(m), nulls)
    return np.eye(m)[:, np.concatenate([data, nulls])], data.size


def transmit_matrix(cfg, null_positions=None, variant="reinsert", exact_alpha=None):
    """Dense ``alpha * N P D M_t`` restricted to the data columns (M x N_d)."""
    if not cfg.punctured:
        raise ConfigError("transmit_matrix needs a punctured waveform config")
    m = cfg.m_alloc
    nulls = cfg.null_positions if null_positions is None else null_positions
    mt, n_d = layout_matrix(m, nulls)
    P = puncture_matrix(m, cfg.n_interval, cfg.offset)
    N = nulling_matrix(m, cfg.n_interval, cfg.offset, variant)
    exact = cfg.exact_alpha if exact_alpha is None else exact_alpha
    alpha = kept_gain(m, n_d, cfg.n_punct, exact)
    return alpha * (N @ P @ dft_matrix(m) @ mt)[:, :n_d]


def matrix_rank(a, rtol=1e-8):
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


@dataclass(frozen=True)
class OracleResult:
    data: np.ndarray
    rank: int
    n_data: int

    @property
    def full_rank(self):
        return self.rank == self.n_data


def oracle_receiver(rx_bins, cfg, null_positions=None, variant="reinsert"):
    """Least-squares data estimate from the M equalised allocated bins.

    ``rx_bins`` are channel-equalised but still carry the transmit gain
    alpha. Pilot bins map to zero rows of the transmit matrix, so their
    content does not affect the solution. Rank deficiency is reported,
    never raised.
    """
    A = transmit_matrix(cfg, null_positions, variant)
    rx_bins = np.asarray(rx_bins, dtype=complex)
    pinv = np.linalg.pinv(A, rcond=1e-8)
    return OracleResult(rx_bins @ pinv.T, matrix_rank(A), A.shape[1])


def _baseband(spec):
    """Circularly rotate a spectrum so its longest empty run straddles Nyquist."""
    n = spec.shape[-1]
    occupied = np.any(np.abs(spec) > 1e-12 * np.max(np.abs(spec)), axis=tuple(range(spec.ndim - 1)))
    if occupied.all() or not occupied.any():
        return spec
    # longest circular run of empty bins
    idx = np.flatnonzero(occupied)
    gaps = np.diff(np.concatenate([idx, idx[:1] + n]))
    j = int(np.argmax(gaps))
    band_start = idx[(j + 1) % idx.size]
    width = n - (gaps[j] - 1)
    return np.roll(spec, -(band_start + width // 2), axis=-1)


def papr(x_body, oversample=4):
    """PAPR in dB of each symbol body, with band-limited oversampling.

    The spectrum is moved to baseband (a frequency shift leaves the
    envelope unchanged), zero-padded to ``oversample * N`` and transformed
    back; PAPR is max|x|^2 / mean|x|^2 over the oversampled samples.
    """
    if int(oversample) != oversample or oversample < 1:
        raise InvalidInputError("oversample must be a positive integer")
    oversample = int(oversample)
    x = np.asarray(x_body, dtype=complex)
    energy = np.sum(np.abs(x) ** 2, axis=-1)
    if np.any(energy == 0):
        raise InvalidInputError("zero-energy symbol has no PAPR")
    n = x.shape[-1]
    spec = _baseband(np.fft.fft(x, axis=-1))
    if oversample > 1:
        half = (n + 1) // 2
        pad = np.zeros(x.shape[:-1] + ((oversample - 1) * n,), dtype=complex)
        spec = np.concatenate([spec[..., :half], pad, spec[..., half:]], axis=-1)
    p = np.abs(np.fft.ifft(spec, axis=-1)) ** 2
    out = 10 * np.log10(np.max(p, axis=-1) / np.mean(p, axis=-1))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PaprRecord:
    name: str
    papr_db: np.ndarray
    thresholds_db: np.ndarray
    ccdf: np.ndarray


def ccdf(papr_db, thresholds_db=CCDF_THRESHOLDS_DB):
    """Fraction of symbols whose PAPR exceeds each threshold.

    Exceedances smaller than 1e-9 dB are treated as rounding noise, so a
    constant-envelope signal has zero mass above 0 dB.
    """
    vals = np.sort(np.asarray(papr_db, dtype=float).ravel())
    above = vals.size - np.searchsorted(vals, np.asarray(thresholds_db) + 1e-9, side="right")
    return above / vals.size


def papr_at_ccdf(papr_db, prob=1e-3):
    """PAPR level exceeded with probability ``prob`` (empirical quantile)."""
    return float(np.quantile(np.asarray(papr_db, dtype=float), 1.0 - prob))


def estimate_noise_power(zero_bins):
    """Mean |bin|^2 over bins that carried no signal."""
    zero_bins = np.asarray(zero_bins, dtype=complex)
    if zero_bins.size == 0:
        raise InvalidInputError("need at least one zeroed bin")
    return float(np.mean(np.abs(zero_bins) ** 2))


def snr_at_ber(snr_db, ber, target=1e-3):
    """SNR where a decreasing BER curve first crosses ``target``.

    Interpolates linearly in (SNR, log10 BER) between the bracketing points.
    Raises ``ValueError`` when the curve never crosses within the sweep.
    """
    snr_db, ber = np.asarray(snr_db, dtype=float), np.asarray(ber, dtype=float)
    for i in range(snr_db.size - 1):
        if ber[i] >= target > ber[i + 1]:
            if ber[i + 1] == 0:
                return float(snr_db[i + 1])
            lo, hi, t = np.log10(ber[i]), np.log10(ber[i + 1]), np.log10(target)
            return float(snr_db[i] + (lo - t) / (lo - hi) * (snr_db[i + 1] - snr_db[i]))
    raise ValueError(f"BER curve does not cross {target:g} between {snr_db[0]:g} and {snr_db[-1]:g} dB")
