"""Waveform configuration and the three transmitters.

The punctured transmitter follows the chain

    data -> [data, 0 * n_null] -> DFT_M -> drop every (n_interval+1)-th bin
         -> scale kept bins by alpha -> write reference symbols into the
            dropped bins -> map onto n_fft subcarriers -> IDFT_N -> CP

Every array-valued function works on the last axis, so a batch of symbols
is simply a 2-D array.
"""

import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from .modem import get_constellation
from .numerics import InvalidInputError, as_vector, dft, idft

__all__ = [
    "ConfigError",
    "WAVEFORM_KINDS",
    "WaveformConfig",
    "PuncturePattern",
    "ReferenceSequence",
    "build_pattern",
    "check_null_layout",
    "largest_prime_le",
    "generate_zc",
    "map_to_grid",
    "add_cp",
    "punctured_grid",
    "tx_plain",
    "tx_punctured",
    "tx_ofdm",
    "transmit",
    "kept_gain",
    "reference_for",
]

WAVEFORM_KINDS = ("plain_dfts", "punctured_dfts", "ofdm")


class ConfigError(ValueError):
    """A configuration violates one of the waveform constraints."""


@dataclass(frozen=True)
class WaveformConfig:
    """Static parameters of one waveform.

    ``n_null=None`` means "as many nulls as punctured bins". Plain DFT-s-OFDM
    and OFDM ignore ``n_interval``, ``offset`` and ``n_null``.
    ``exact_alpha`` switches the kept-bin gain from sqrt(N_d/(N_d-N_p)) to
    the energy-preserving sqrt(M/(M-N_p)).
    """

    n_fft: int = 2048
    m_alloc: int = 48
    subcarrier_start: int | None = None
    n_interval: int = 5
    offset: int = 0
    n_null: int | None = None
    cp_len: int = 144
    modulation: str = "16qam"
    waveform_kind: str = "punctured_dfts"
    zc_root: int = 1
    exact_alpha: bool = False

    def __post_init__(self):
        if self.waveform_kind not in WAVEFORM_KINDS:
            raise ConfigError(f"waveform_kind must be one of {WAVEFORM_KINDS}, got {self.waveform_kind!r}")
        if self.subcarrier_start is None:
            object.__setattr__(self, "subcarrier_start", (self.n_fft - self.m_alloc) // 2)
        if self.m_alloc < 1 or self.n_fft < 1:
            raise ConfigError("n_fft and m_alloc must be positive")
        if self.m_alloc > self.n_fft:
            raise ConfigError(f"m_alloc={self.m_alloc} exceeds n_fft={self.n_fft}")
        if self.subcarrier_start < 0 or self.subcarrier_start + self.m_alloc > self.n_fft:
            raise ConfigError("subcarrier_start + m_alloc must lie within [0, n_fft]")
        if self.cp_len < 0 or self.cp_len >= self.n_fft:
            raise ConfigError("cp_len must satisfy 0 <= cp_len < n_fft")
        try:
            get_constellation(self.modulation)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from None
        if self.waveform_kind != "punctured_dfts":
            return
        if self.n_interval < 1:
            raise ConfigError("n_interval must be >= 1")
        if self.m_alloc % (self.n_interval + 1):
            raise ConfigError(
                f"divisibility: n_interval+1={self.n_interval + 1} must divide m_alloc={self.m_alloc}"
            )
        if not 0 <= self.offset <= self.n_interval:
            raise ConfigError(f"offset={self.offset} must satisfy 0 <= offset <= n_interval={self.n_interval}")
        n_p = self.m_alloc // (self.n_interval + 1)
        if self.n_null is None:
            object.__setattr__(self, "n_null", n_p)
        if self.n_null < n_p:
            raise ConfigError(f"null count: n_null={self.n_null} must be >= n_punct={n_p}")
        if self.n_null >= self.m_alloc:
            raise ConfigError("n_null must leave at least one data slot")
        if self.m_alloc - self.n_null <= n_p and not self.exact_alpha:
            raise ConfigError("alpha undefined: n_data must exceed n_punct (or set exact_alpha)")
        check_null_layout(self.m_alloc, n_p, self.null_positions)
        if n_p >= 2 and math.gcd(self.zc_root, largest_prime_le(n_p)) != 1:
            raise ConfigError(f"zc_root={self.zc_root} is not coprime with the ZC length")

    @property
    def punctured(self):
        return self.waveform_kind == "punctured_dfts"

    @property
    def n_punct(self):
        return self.m_alloc // (self.n_interval + 1) if self.punctured else 0

    @property
    def n_zero(self):
        """Number of null slots at the DFT-spread input (N_z)."""
        return self.n_null if self.punctured else 0

    @property
    def n_data(self):
        return self.m_alloc - self.n_zero

    @property
    def data_positions(self):
        return np.arange(self.n_data)

    @property
    def null_positions(self):
        return np.arange(self.m_alloc - self.n_zero, self.m_alloc)

    @property
    def alpha(self):
        return kept_gain(self.m_alloc, self.n_data, self.n_punct, self.exact_alpha)

    @property
    def constellation(self):
        return get_constellation(self.modulation)

    @property
    def bits_per_ofdm_symbol(self):
        return self.n_data * self.constellation.bits_per_symbol

    @property
    def mean_bin_energy(self):
        """Expected energy per allocated subcarrier for unit-energy data."""
        if not self.punctured:
            return 1.0
        kept = self.m_alloc - self.n_punct
        return (self.data_bin_energy * kept + self.n_punct) / self.m_alloc

    @property
    def data_bin_energy(self):
        """Mean energy of an alpha-scaled data-bearing bin for unit-energy data."""
        if self.waveform_kind == "ofdm":
            return 1.0
        return self.alpha**2 * self.n_data / self.m_alloc

    def to_dict(self):
        return asdict(self)


def kept_gain(m, n_data, n_punct, exact=False):
    """Gain applied to the kept DFT outputs after puncturing."""
    if n_punct == 0:
        return 1.0
    if exact:
        return math.sqrt(m / (m - n_punct))
    return math.sqrt(n_data / (n_data - n_punct))


def check_null_layout(m, n_punct, null_positions):
    """Raise ``ConfigError`` unless the null slots see every interference residue.

    The interference is periodic with period ``n_punct`` after de-rotation,
    so the nulls must hit every class ``k mod n_punct``.
    """
    if n_punct == 0:
        return
    residues = {int(k) % n_punct for k in null_positions}
    missing = sorted(set(range(n_punct)) - residues)
    if missing:
        raise ConfigError(f"rank condition: null slots miss interference residues {missing} (mod {n_punct})")


@dataclass(frozen=True)
class PuncturePattern:
    """Kept / punctured index sets over the ``m`` DFT-spread outputs."""

    m: int
    kept: np.ndarray
    punctured: np.ndarray
    offset: int = 0
    period: int = 0

    @property
    def n_punct(self):
        return self.punctured.size

    @cached_property
    def mask(self):
        """Boolean mask over the m bins, True where a bin is kept."""
        mk = np.ones(self.m, dtype=bool)
        mk[self.punctured] = False
        return mk

    @classmethod
    def none(cls, m):
        """Degenerate pattern without punctures."""
        return cls(m, np.arange(m), np.array([], dtype=int), 0, 0)


def build_pattern(cfg):
    """Puncture every bin ``n`` with ``n = offset (mod n_interval + 1)``."""
    if not cfg.punctured:
        return PuncturePattern.none(cfg.m_alloc)
    step = cfg.n_interval + 1
    punctured = np.arange(cfg.offset, cfg.m_alloc, step)
    kept = np.setdiff1d(np.arange(cfg.m_alloc), punctured)
    return PuncturePattern(cfg.m_alloc, kept, punctured, cfg.offset, cfg.n_punct)


def largest_prime_le(n):
    for p in range(n, 1, -1):
        if all(p % q for q in range(2, int(math.isqrt(p)) + 1)):
            return p
    raise ConfigError(f"no prime <= {n}")


@dataclass(frozen=True)
class ReferenceSequence:
    values: np.ndarray
    root: int


def generate_zc(n_p, root=1):
    """Zadoff-Chu sequence of the largest prime length <= n_p, cyclically extended.

    Uses exp(-j*pi*u*n*(n + (Nzc mod 2))/Nzc), which covers the even
    length Nzc = 2.
    """
    if n_p < 2:
        raise ConfigError(f"cannot build a Zadoff-Chu sequence for n_p={n_p} (no prime <= n_p)")
    nzc = largest_prime_le(n_p)
    if math.gcd(root, nzc) != 1:
        raise ConfigError(f"root {root} is not coprime with Zadoff-Chu length {nzc}")
    n = np.arange(nzc)
    base = np.exp(-1j * np.pi * root * n * (n + nzc % 2) / nzc)
    values = base[np.arange(n_p) % nzc]
    values.setflags(write=False)
    return ReferenceSequence(values, root)


def reference_for(cfg):
    """Reference sequence used by a punctured config (None otherwise)."""
    if not cfg.punctured:
        return None
    if cfg.n_punct == 1:
        # a single pilot has no ZC counterpart
        return ReferenceSequence(np.ones(1, dtype=complex), cfg.zc_root)
    return generate_zc(cfg.n_punct, cfg.zc_root)


def map_to_grid(bins, cfg):
    """Place ``m_alloc`` bins on consecutive subcarriers of the ``n_fft`` grid."""
    bins = np.asarray(bins, dtype=complex)
    grid = np.zeros(bins.shape[:-1] + (cfg.n_fft,), dtype=complex)
    grid[..., cfg.subcarrier_start : cfg.subcarrier_start + cfg.m_alloc] = bins
    return grid


def add_cp(body, cp_len):
    if cp_len == 0:
        return body
    return np.concatenate([body[..., -cp_len:], body], axis=-1)


def _check_len(data, n, what):
    data = as_vector(data, "data")
    if data.shape[-1] != n:
        raise InvalidInputError(f"{what} expects {n} data symbols, got {data.shape[-1]}")
    return data


def tx_plain(data, cfg):
    """Plain DFT-s-OFDM symbol(s): IDFT_N(map(DFT_M(data))) with CP."""
    data = _check_len(data, cfg.m_alloc, "plain DFT-s-OFDM")
    return add_cp(idft(map_to_grid(dft(data), cfg)), cfg.cp_len)


def punctured_grid(data, rs, cfg, pattern=None):
    """The ``m_alloc`` frequency bins of a punctured symbol before subcarrier mapping."""
    pattern = build_pattern(cfg) if pattern is None else pattern
    data = _check_len(data, cfg.n_data, "punctured DFT-s-OFDM")
    d_e = np.zeros(data.shape[:-1] + (cfg.m_alloc,), dtype=complex)
    d_e[..., : cfg.n_data] = data
    gain = kept_gain(cfg.m_alloc, cfg.n_data, pattern.n_punct, cfg.exact_alpha)
    grid = gain * dft(d_e)
    # pilots keep unit power, independent of the data gain; rs=None leaves
    # the punctured bins empty (usable for noise estimation)
    grid[..., pattern.punctured] = 0 if rs is None else rs.values
    return grid


def tx_punctured(data, rs, cfg, pattern=None):
    """Punctured DFT-s-OFDM symbol(s) with frequency-domain reference symbols.

    ``rs=None`` transmits nothing on the punctured bins.
    """
    n_p = cfg.n_punct if pattern is None else pattern.n_punct
    if rs is not None and rs.values.size != n_p:
        raise InvalidInputError(f"reference sequence has {rs.values.size} values for {n_p} punctured bins")
    return add_cp(idft(map_to_grid(punctured_grid(data, rs, cfg, pattern), cfg)), cfg.cp_len)


def tx_ofdm(data, cfg):
    """OFDM symbol(s): data straight onto the allocated subcarriers."""
    data = _check_len(data, cfg.m_alloc, "OFDM")
    return add_cp(idft(map_to_grid(data, cfg)), cfg.cp_len)


def transmit(data, cfg, rs=None):
    """Dispatch on ``cfg.waveform_kind``."""
    if cfg.waveform_kind == "plain_dfts":
        return tx_plain(data, cfg)
    if cfg.waveform_kind == "ofdm":
        return tx_ofdm(data, cfg)
    return tx_punctured(data, rs if rs is not None else reference_for(cfg), cfg)
