"""Experiment specs, config-file loading and the BER / PAPR / lemma runners.

SNR convention: the sweep value is the per-allocated-subcarrier Es/N0.
The noise variance is ``mean_bin_energy / snr``, where ``mean_bin_energy``
is the expected energy of one allocated subcarrier for unit-energy data
(1 for plain DFT-s-OFDM and OFDM). The analytical AWGN bound uses the same
number as its Es/N0.

Reproducibility: every batch of symbols draws its data, channel and noise
from three generators seeded by ``(seed, snr_index, batch_index, stream)``.
Batches are merged in index order and a curve stops at the first batch
that satisfies its stop rule, so the worker count never changes a result. All curves see the same channel
realisations and noise samples, and curves sharing a waveform also share
the transmitted symbols, so curve-to-curve differences are paired.
"""

import configparser
import csv
import io
import json
import re
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import CCDF_THRESHOLDS_DB, PaprRecord, ccdf, papr, verify_lemma1
from .channel import AWGN, ChannelModel, apply, get_channel_model, realize_batch
from .modem import demodulate, modulate
from .rxchain import estimate_channel, extract_bins, iterate, mmse_taps, rx_ofdm, rx_plain, rx_punctured_demap
from .txchain import ConfigError, WaveformConfig, build_pattern, reference_for, transmit

__all__ = [
    "CurveSpec",
    "StopRule",
    "ExperimentSpec",
    "BerPoint",
    "LinkResult",
    "LemmaRow",
    "load_spec",
    "default_curves",
    "run_ber",
    "run_papr",
    "run_lemma",
    "ber_csv",
    "papr_csv",
    "lemma_csv",
    "version_string",
    "metadata_json",
]

RECEIVERS = ("plain", "cancel", "iterate")
EXPERIMENTS = ("ber", "papr", "lemma")


@dataclass(frozen=True)
class CurveSpec:
    name: str
    waveform: WaveformConfig
    receiver: str = "plain"
    n_iters: int = 0

    def __post_init__(self):
        if self.receiver not in RECEIVERS:
            raise ConfigError(f"curve:{self.name}.receiver: expected one of {RECEIVERS}, got {self.receiver!r}")
        if self.receiver != "plain" and not self.waveform.punctured:
            raise ConfigError(f"curve:{self.name}.receiver: {self.receiver} needs waveform_kind=punctured_dfts")
        if self.n_iters < 0:
            raise ConfigError(f"curve:{self.name}.n_iters: must be >= 0")

    @property
    def iterations(self):
        return self.n_iters if self.receiver == "iterate" else 0


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 200
    max_bits: int = 20_000_000
    min_bits: int = 0

    def __post_init__(self):
        if self.min_errors <= 0 or self.max_bits <= 0 or self.min_bits < 0:
            raise ConfigError("experiment.stop: min_errors and max_bits must be positive")

    def satisfied(self, bits, errors):
        return bits >= self.max_bits or (errors >= self.min_errors and bits >= self.min_bits)


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str = "ber"
    curves: tuple = ()
    channel: ChannelModel = AWGN
    snr_start: float = 0.0
    snr_stop: float = 30.0
    snr_step: float = 2.0
    chest: str = "ideal"
    stop: StopRule = field(default_factory=StopRule)
    seed: int = 1
    out: str | None = None
    batch_size: int = 500
    n_symbols: int = 100_000
    oversample: int = 4
    lemma_cases: tuple = ()
    trials: int = 1000
    threshold: float = 1e-9

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment.kind: expected one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.snr_step <= 0:
            raise ConfigError("experiment.snr_step: must be > 0")
        if self.snr_stop < self.snr_start:
            raise ConfigError("experiment.snr_stop: must be >= snr_start")
        if self.chest not in ("ideal", "estimated"):
            raise ConfigError("experiment.chest: expected ideal or estimated")
        if self.batch_size <= 0 or self.n_symbols <= 0 or self.trials <= 0:
            raise ConfigError("experiment: batch_size, n_symbols and trials must be positive")
        if int(self.oversample) != self.oversample or self.oversample < 1:
            raise ConfigError("experiment.oversample: must be a positive integer")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("experiment.seed: must be an unsigned 64-bit integer")
        for m, ni, s in self.lemma_cases:
            if m < 2 or ni < 1 or m % (ni + 1) or not 0 <= s <= ni:
                raise ConfigError(f"experiment.cases: ({m}, {ni}, {s}) violates divisibility or offset range")
        names = [c.name for c in self.curves]
        if len(set(names)) != len(names):
            raise ConfigError("curve names must be unique")
        if self.chest == "estimated":
            for c in self.curves:
                if c.waveform.punctured and c.waveform.n_punct < 2:
                    raise ConfigError(f"curve:{c.name}: estimated CHEST needs at least two reference bins")

    @property
    def snr_points(self):
        n = int(np.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return np.round(self.snr_start + self.snr_step * np.arange(n), 9)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "curves": [
                {"name": c.name, "receiver": c.receiver, "n_iters": c.n_iters, "waveform": c.waveform.to_dict()}
                for c in self.curves
            ],
            "channel": {
                "name": self.channel.name,
                "tap_delays_ns": [round(d * 1e9, 6) for d in self.channel.tap_delays],
                "tap_powers_db": list(self.channel.tap_powers_db),
                "fading": self.channel.fading,
            },
            "snr_db": [float(s) for s in self.snr_points],
            "chest": self.chest,
            "stop": {"min_errors": self.stop.min_errors, "max_bits": self.stop.max_bits, "min_bits": self.stop.min_bits},
            "seed": self.seed,
            "batch_size": self.batch_size,
            "n_symbols": self.n_symbols,
            "oversample": self.oversample,
            "lemma_cases": [list(c) for c in self.lemma_cases],
            "trials": self.trials,
            "threshold": self.threshold,
        }


def default_curves(experiment, base=None):
    """Default curve sets: the three waveforms for PAPR, receiver variants for BER."""
    base = WaveformConfig() if base is None else base
    plain = replace(base, waveform_kind="plain_dfts")
    if experiment == "papr":
        return (
            CurveSpec("plain", plain),
            CurveSpec("punct_ni11", replace(base, waveform_kind="punctured_dfts", n_interval=11, n_null=None)),
            CurveSpec("punct_ni5", replace(base, waveform_kind="punctured_dfts", n_interval=5, n_null=None)),
            CurveSpec("ofdm", replace(base, waveform_kind="ofdm")),
        )
    curves = [CurveSpec("plain", plain)]
    for ni in (5, 11):
        w = replace(base, waveform_kind="punctured_dfts", n_interval=ni, n_null=None)
        curves += [
            CurveSpec(f"ni{ni}_nocancel", w, "plain"),
            CurveSpec(f"ni{ni}_iter0", w, "cancel"),
            CurveSpec(f"ni{ni}_iter2", w, "iterate", 2),
        ]
    return tuple(curves)


DEFAULT_LEMMA_CASES = tuple(
    (m, ni, s)
    for m in (8, 24, 48)
    for ni in range(1, m)
    if m % (ni + 1) == 0
    for s in sorted({0, 1, ni})
)


# --------------------------------------------------------------------------
# config files

_WAVEFORM_FIELDS = {f.name: f.type for f in fields(WaveformConfig)}
_RX_RE = re.compile(r"^iterate\((\d+)\)$")


def _convert(path, value, typ):
    value = value.strip()
    try:
        if typ in (bool, "bool"):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if "int" in str(typ):
            if value.lower() in ("none", "auto", ""):
                if "None" in str(typ):
                    return None
                raise ValueError(value)
            return int(value)
        if typ in (float, "float"):
            return float(value)
    except ValueError:
        raise ConfigError(f"{path}: cannot parse {value!r}") from None
    return value


def _waveform(section, base, path):
    kw = {}
    for key, value in section.items():
        if key in ("receiver", "n_iters"):
            continue
        if key not in _WAVEFORM_FIELDS:
            raise ConfigError(f"{path}.{key}: unknown waveform field")
        kw[key] = _convert(f"{path}.{key}", value, _WAVEFORM_FIELDS[key])
    try:
        cfg = replace(base, **kw)
        if "n_interval" in kw and "n_null" not in kw and base.punctured:
            cfg = replace(cfg, n_null=None)
        if "waveform_kind" in kw and kw["waveform_kind"] == "punctured_dfts" and "n_null" not in kw:
            cfg = replace(cfg, n_null=None)
        return cfg
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_taps(text):
    pairs = []
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            d, p = item.split(":")
            pairs.append((float(d), float(p)))
        except ValueError:
            raise ConfigError(f"channel.taps: expected 'delay_ns:power_db' items, got {item.strip()!r}") from None
    return pairs


def _apply_override(cp, text):
    if "=" not in text:
        raise ConfigError(f"override {text!r}: expected key=value")
    key, value = text.split("=", 1)
    key = key.strip()
    section, _, name = key.rpartition(".")
    section = section or "experiment"
    if not cp.has_section(section):
        cp.add_section(section)
    cp.set(section, name, value.strip())


def load_spec(path=None, overrides=(), seed=None, experiment=None, out=None):
    """Build an ``ExperimentSpec`` from an INI-style file plus overrides.

    Sections: ``[experiment]``, ``[waveform]`` (defaults for every curve),
    ``[channel]`` and any number of ``[curve:NAME]``. Overrides use
    ``section.key=value``; a bare ``key=value`` targets ``[experiment]``.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    if path is not None:
        text = Path(path).read_text()
        try:
            cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for ov in overrides:
        _apply_override(cp, ov)

    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    known = {
        "kind", "seed", "snr_start", "snr_stop", "snr_step", "chest", "channel", "min_errors", "max_bits",
        "min_bits", "batch_size", "n_symbols", "oversample", "trials", "threshold", "cases", "out",
    }
    for k in exp:
        if k not in known:
            raise ConfigError(f"experiment.{k}: unknown key")
    kind = experiment or exp.get("kind", "ber").strip()

    base = _waveform(dict(cp["waveform"]) if cp.has_section("waveform") else {}, WaveformConfig(), "waveform")

    curves = []
    for sec in cp.sections():
        if not sec.startswith("curve:"):
            continue
        name = sec.split(":", 1)[1].strip()
        body = dict(cp[sec])
        wf = _waveform(body, base, sec)
        rx = body.get("receiver", "plain").strip()
        n_iters = _convert(f"{sec}.n_iters", body.get("n_iters", "0"), int)
        m = _RX_RE.match(rx)
        if m:
            rx, n_iters = "iterate", int(m.group(1))
        curves.append(CurveSpec(name, wf, rx, n_iters))
    if not curves and kind in ("ber", "papr"):
        curves = list(default_curves(kind, base))

    ch_name = exp.get("channel", "awgn").strip()
    if cp.has_section("channel"):
        chs = dict(cp["channel"])
        ch_name = chs.get("name", ch_name).strip()
        if "taps" in chs:
            channel = ChannelModel.custom(_parse_taps(chs["taps"]), chs.get("fading", "rayleigh_block").strip(), ch_name)
        else:
            channel = get_channel_model(ch_name)
            if "fading" in chs:
                channel = replace(channel, fading=chs["fading"].strip())
    else:
        channel = get_channel_model(ch_name)

    def num(key, typ, default):
        return _convert(f"experiment.{key}", exp[key], typ) if key in exp else default

    cases = DEFAULT_LEMMA_CASES
    if "cases" in exp:
        try:
            cases = tuple(tuple(int(v) for v in c.split(":")) for c in exp["cases"].split(",") if c.strip())
        except ValueError:
            raise ConfigError("experiment.cases: expected m:n_i:s items") from None
        if any(len(c) != 3 for c in cases):
            raise ConfigError("experiment.cases: expected m:n_i:s items")

    stop = StopRule(num("min_errors", int, 200), num("max_bits", int, 20_000_000), num("min_bits", int, 0))
    spec = ExperimentSpec(
        experiment=kind,
        curves=tuple(curves),
        channel=channel,
        snr_start=num("snr_start", float, 0.0),
        snr_stop=num("snr_stop", float, 30.0),
        snr_step=num("snr_step", float, 2.0),
        chest=exp.get("chest", "ideal").strip(),
        stop=stop,
        seed=seed if seed is not None else num("seed", int, 1),
        out=out if out is not None else exp.get("out"),
        batch_size=num("batch_size", int, 500),
        n_symbols=num("n_symbols", int, 100_000),
        oversample=num("oversample", int, 4),
        lemma_cases=cases,
        trials=num("trials", int, 1000),
        threshold=num("threshold", float, 1e-9),
    )
    # channel memory vs CP is checked once up front
    for c in spec.curves:
        prof = spec.channel.sample_profile()
        if prof.size - 1 > c.waveform.cp_len:
            raise ConfigError(f"curve:{c.name}.cp_len: channel delay spread {prof.size - 1} samples exceeds CP")
    return spec


# --------------------------------------------------------------------------
# BER


@dataclass
class BerPoint:
    snr_db: float
    bits: int = 0
    bit_errors: int = 0
    symbols: int = 0

    @property
    def ber(self):
        return self.bit_errors / self.bits if self.bits else float("nan")


@dataclass
class LinkResult:
    curves: dict
    metadata: dict

    def curve(self, name):
        return self.curves[name]

    def snr(self, name):
        return np.array([p.snr_db for p in self.curves[name]])

    def ber(self, name):
        return np.array([p.ber for p in self.curves[name]])


def _batch_rng(seed, *counters):
    return np.random.default_rng(np.random.SeedSequence([seed, *counters]))


def _detect(curve, y, H, noise_var, chest):
    cfg = curve.waveform
    es = cfg.data_bin_energy
    if cfg.waveform_kind == "ofdm":
        return rx_ofdm(y, mmse_taps(H, noise_var, 1.0), cfg)
    pattern = build_pattern(cfg)
    if chest == "estimated" and cfg.punctured:
        H = estimate_channel(extract_bins(y, cfg), reference_for(cfg), pattern).estimates
    if curve.receiver == "plain":
        return rx_plain(y, mmse_taps(H, noise_var, es), cfg)
    d_e = rx_punctured_demap(y, mmse_taps(H[..., pattern.kept], noise_var, es), cfg, pattern)
    return iterate(d_e, cfg, curve.iterations, pattern)


def _ber_batch(curves, channel, chest, snr_db, seed, snr_idx, batch_idx, batch_size):
    """Counts ``[(bits, errors, symbols), ...]`` for curves sharing one waveform."""
    cfg = curves[0].waveform
    c = cfg.constellation
    # separate streams so that every waveform sees the same channels and noise
    data_rng, channel_rng, noise_rng = (_batch_rng(seed, snr_idx, batch_idx, k) for k in range(3))
    k = c.bits_per_symbol
    bits = data_rng.integers(0, 2, (batch_size, cfg.n_data * k), dtype=np.uint8)
    x = transmit(modulate(bits.ravel(), c).reshape(batch_size, cfg.n_data), cfg)
    ch = realize_batch(channel, channel_rng, batch_size, cfg.n_fft, cfg.cp_len)
    noise_var = cfg.mean_bin_energy * 10.0 ** (-snr_db / 10.0)
    y = apply(x, ch, noise_var, noise_rng, cfg.cp_len)
    s = cfg.subcarrier_start
    H = ch.freq_response[..., s : s + cfg.m_alloc]
    out = []
    for curve in curves:
        d_hat = _detect(curve, y, H, noise_var, chest)
        errors = int(np.count_nonzero(demodulate(d_hat, c) != bits.ravel()))
        out.append((bits.size, errors, batch_size))
    return out


def _ber_batch_star(args):
    return _ber_batch(*args)


def run_ber(spec, workers=1, progress=None):
    """Monte-Carlo BER for every curve at every SNR point of ``spec``."""
    groups = {}
    for curve in spec.curves:
        groups.setdefault(curve.waveform, []).append(curve)
    result = {c.name: [] for c in spec.curves}
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for si, snr in enumerate(spec.snr_points):
            points = {c.name: BerPoint(float(snr)) for c in spec.curves}
            for members in groups.values():
                active = tuple(members)
                b = 0
                while active:
                    args = [
                        (active, spec.channel, spec.chest, float(snr), spec.seed, si, bi, spec.batch_size)
                        for bi in range(b, b + max(1, workers))
                    ]
                    outs = pool.map(_ber_batch_star, args) if pool else map(_ber_batch_star, args)
                    done = set()
                    # merge in batch order; a curve ignores batches after the one that stopped it
                    for out in outs:
                        for curve, (nb, ne, ns) in zip(active, out):
                            if curve.name in done:
                                continue
                            p = points[curve.name]
                            p.bits += nb
                            p.bit_errors += ne
                            p.symbols += ns
                            if spec.stop.satisfied(p.bits, p.bit_errors):
                                done.add(curve.name)
                    active = tuple(c for c in active if c.name not in done)
                    b += len(args)
            for c in spec.curves:
                result[c.name].append(points[c.name])
            if progress:
                progress(float(snr), points)
    finally:
        if pool:
            pool.shutdown()
    return LinkResult(result, {"spec": spec.to_dict(), "seed": spec.seed, "version": version_string()})


def ber_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "snr_db", "bits", "bit_errors", "ber"])
    for name, pts in result.curves.items():
        for p in pts:
            w.writerow([name, repr(p.snr_db), p.bits, p.bit_errors, repr(p.ber)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# PAPR


def _papr_batch(cfg, seed, curve_idx, batch_idx, n, oversample):
    rng = _batch_rng(seed, curve_idx, batch_idx)
    c = cfg.constellation
    bits = rng.integers(0, 2, n * cfg.n_data * c.bits_per_symbol, dtype=np.uint8)
    x = transmit(modulate(bits, c).reshape(n, cfg.n_data), cfg)
    return papr(x[:, cfg.cp_len :], oversample)


def run_papr(spec, workers=1):
    """PAPR samples and CCDF per curve; receivers are irrelevant here."""
    records = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for ci, curve in enumerate(spec.curves):
            sizes = [min(spec.batch_size, spec.n_symbols - s) for s in range(0, spec.n_symbols, spec.batch_size)]
            args = [(curve.waveform, spec.seed, ci, bi, n, spec.oversample) for bi, n in enumerate(sizes)]
            parts = list(pool.map(_papr_star, args)) if pool else [_papr_star(a) for a in args]
            vals = np.concatenate(parts)
            records.append(PaprRecord(curve.name, vals, CCDF_THRESHOLDS_DB, ccdf(vals, CCDF_THRESHOLDS_DB)))
    finally:
        if pool:
            pool.shutdown()
    return records


def _papr_star(args):
    return _papr_batch(*args)


def papr_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "threshold_db", "ccdf"])
    for rec in records:
        for t, p in zip(rec.thresholds_db, rec.ccdf):
            w.writerow([rec.name, f"{t:.1f}", repr(float(p))])
    return buf.getvalue()


# --------------------------------------------------------------------------
# lemma


@dataclass(frozen=True)
class LemmaRow:
    m: int
    n_i: int
    s: int
    trials: int
    max_deviation: float
    passed: bool


def run_lemma(spec):
    """Run the periodic-interference check for every configured case."""
    rows = []
    for idx, (m, ni, s) in enumerate(spec.lemma_cases):
        chk = verify_lemma1(m, ni, s, spec.trials, _batch_rng(spec.seed, idx))
        rows.append(LemmaRow(m, ni, s, spec.trials, chk.max_deviation, chk.max_deviation <= spec.threshold))
    return rows


def lemma_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "n_i", "s", "trials", "max_deviation", "pass"])
    for r in rows:
        w.writerow([r.m, r.n_i, r.s, r.trials, f"{r.max_deviation:.3e}", "true" if r.passed else "false"])
    return buf.getvalue()


def version_string():
    """Package version plus the short git hash of the working tree, when available."""
    try:
        sha = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        sha = ""
    return f"{__version__}+g{sha}" if sha else __version__


def metadata_json(result):
    return json.dumps(result.metadata, indent=2, sort_keys=True)
