import csv
import io

import numpy as np
import pytest

from pdfts import cli
from pdfts.analysis import papr_at_ccdf
from pdfts.channel import EPA
from pdfts.sim import (DEFAULT_LEMMA_CASES, CurveSpec, ExperimentSpec, StopRule, ber_csv, lemma_csv, load_spec,
                       papr_csv, run_ber, run_lemma, run_papr)
from pdfts.txchain import ConfigError, WaveformConfig

CONFIG = """
[experiment]
kind = ber
snr_start = 10
snr_stop = 14
snr_step = 2
min_errors = 50
max_bits = 40000
batch_size = 20

[waveform]
modulation = qpsk

[curve:plain]
waveform_kind = plain_dfts

[curve:p5]
n_interval = 5
receiver = iterate(2)

[curve:p11_nc]
n_interval = 11
receiver = plain
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "exp.ini"
    p.write_text(CONFIG)
    return p


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_load_spec_fields(cfg_file):
    spec = load_spec(cfg_file, seed=7)
    assert spec.seed == 7
    assert [c.name for c in spec.curves] == ["plain", "p5", "p11_nc"]
    assert spec.curves[1].receiver == "iterate" and spec.curves[1].n_iters == 2
    assert spec.curves[1].waveform.n_punct == 8
    assert spec.curves[2].waveform.n_zero == 4
    assert all(c.waveform.modulation == "qpsk" for c in spec.curves)
    assert list(spec.snr_points) == [10.0, 12.0, 14.0]


def test_defaults_without_file():
    spec = load_spec(None, experiment="ber")
    assert spec.stop == StopRule(200, 20_000_000)
    assert [c.name for c in spec.curves][:2] == ["plain", "ni5_nocancel"]
    w = spec.curves[0].waveform
    assert (w.n_fft, w.m_alloc, w.cp_len, w.modulation, w.subcarrier_start) == (2048, 48, 144, "16qam", 1000)
    assert len(load_spec(None, experiment="papr").curves) == 4
    assert load_spec(None, experiment="lemma").lemma_cases == DEFAULT_LEMMA_CASES


def test_overrides(cfg_file):
    spec = load_spec(cfg_file, ["snr_stop=12", "curve:p5.offset=3", "channel.name=epa"])
    assert list(spec.snr_points) == [10.0, 12.0]
    assert spec.curves[1].waveform.offset == 3
    assert spec.channel == EPA


@pytest.mark.parametrize(
    "override,needle",
    [
        ("snr_step=0", "experiment.snr_step"),
        ("curve:p5.n_interval=6", "curve:p5"),
        ("curve:p5.bogus=1", "curve:p5.bogus"),
        ("min_errors=-1", "experiment.stop"),
        ("curve:plain.receiver=cancel", "curve:plain.receiver"),
        ("seed=abc", "experiment.seed"),
        ("channel.taps=0:0,bad", "channel.taps"),
        ("waveform.cp_len=4", "cp_len"),
        ("unknown=1", "experiment.unknown"),
    ],
)
def test_config_errors_carry_field_path(cfg_file, override, needle):
    extra = ["channel.name=eva"] if "cp_len" in override else []
    with pytest.raises(ConfigError, match=needle):
        load_spec(cfg_file, [override, *extra])


def test_ber_deterministic_and_worker_independent(cfg_file):
    spec = load_spec(cfg_file, seed=3)
    a = ber_csv(run_ber(spec))
    assert a == ber_csv(run_ber(spec))
    assert a == ber_csv(run_ber(spec, workers=3))
    assert a != ber_csv(run_ber(load_spec(cfg_file, seed=4)))


def test_ber_csv_contract(cfg_file):
    spec = load_spec(cfg_file)
    res = run_ber(spec)
    text = ber_csv(res)
    assert text.splitlines()[0] == "curve,snr_db,bits,bit_errors,ber"
    for row in _rows(text):
        bits, errs = int(row["bits"]), int(row["bit_errors"])
        assert 0 <= errs <= bits
        assert float(row["ber"]) == errs / bits
        assert bits >= min(spec.stop.max_bits, 1) and (errs >= 50 or bits >= 40_000)
    assert res.metadata["seed"] == spec.seed


def test_plain_beats_unmitigated_punctured(cfg_file):
    res = run_ber(load_spec(cfg_file))
    assert np.all(res.ber("plain") < res.ber("p11_nc"))


def test_papr_single_subcarrier_all_mass_at_zero():
    one = CurveSpec("one", WaveformConfig(m_alloc=1, waveform_kind="plain_dfts"))
    spec = ExperimentSpec("papr", (one,), n_symbols=200, batch_size=64)
    rec = run_papr(spec)[0]
    assert rec.papr_db.size == 200
    assert np.max(np.abs(rec.papr_db)) < 1e-9
    assert rec.ccdf[0] == 0.0 and np.all(rec.ccdf == 0)


@pytest.mark.slow
def test_papr_ccdf_converged():
    curve = CurveSpec("p5", WaveformConfig(n_interval=5))
    small = run_papr(ExperimentSpec("papr", (curve,), n_symbols=50_000, batch_size=5000, seed=11))[0]
    big = run_papr(ExperimentSpec("papr", (curve,), n_symbols=100_000, batch_size=5000, seed=11))[0]
    assert abs(papr_at_ccdf(small.papr_db) - papr_at_ccdf(big.papr_db)) < 0.1


def test_papr_deterministic_and_csv():
    spec = ExperimentSpec("papr", (CurveSpec("plain", WaveformConfig(waveform_kind="plain_dfts")),),
                          n_symbols=300, batch_size=100)
    text = papr_csv(run_papr(spec))
    assert text == papr_csv(run_papr(spec, workers=2))
    lines = text.splitlines()
    assert lines[0] == "curve,threshold_db,ccdf"
    assert len(lines) == 1 + 121
    probs = [float(r["ccdf"]) for r in _rows(text)]
    assert all(b <= a for a, b in zip(probs, probs[1:]))


def test_lemma_rows():
    spec = ExperimentSpec("lemma", lemma_cases=((8, 3, 1), (48, 11, 11)), trials=20)
    rows = run_lemma(spec)
    assert all(r.passed for r in rows)
    assert lemma_csv(rows).splitlines()[0] == "m,n_i,s,trials,max_deviation,pass"


def test_cli_lemma_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "lemma.csv"
    assert cli.main(["lemma", "--override", "trials=10", "--override", "cases=8:3:0,24:5:2", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("m,n_i,s,trials,max_deviation,pass\n")
    assert text.count("true") == 2
    # an impossible threshold turns into the threshold-failure exit code
    assert cli.main(["lemma", "--override", "trials=10", "--override", "cases=8:3:1",
                     "--override", "threshold=0"]) == 3
    assert cli.main(["lemma", "--override", "cases=8:4:0"]) == 2
    assert cli.main(["ber", "--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["ber", "--workers", "0"]) == 2
    capsys.readouterr()


def test_cli_validate_config_and_ber(cfg_file, tmp_path, capsys):
    assert cli.main(["validate-config", "--config", str(cfg_file)]) == 0
    assert '"experiment": "ber"' in capsys.readouterr().out
    out = tmp_path / "ber.csv"
    rc = cli.main(["ber", "--config", str(cfg_file), "--seed", "5", "--out", str(out),
                   "--override", "snr_stop=10", "--workers", "2"])
    assert rc == 0
    assert out.read_text().splitlines()[0] == "curve,snr_db,bits,bit_errors,ber"
    assert len(out.read_text().splitlines()) == 4
    assert (tmp_path / "ber.csv.json").exists()


def test_cli_papr(tmp_path):
    out = tmp_path / "papr.csv"
    assert cli.main(["papr", "--override", "n_symbols=100", "--override", "batch_size=50", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 4 * 121
