import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdfts.analysis import papr, papr_at_ccdf
from pdfts.modem import modulate, qam16, qpsk
from pdfts.numerics import InvalidInputError, dft, idft
from pdfts.txchain import (ConfigError, PuncturePattern, WaveformConfig, build_pattern, check_null_layout,
                           generate_zc, punctured_grid, reference_for, tx_ofdm, tx_plain, tx_punctured)

from conftest import crandn, small_cfg


def test_worked_example_pattern():
    p = build_pattern(small_cfg(8, 3, 0))
    np.testing.assert_array_equal(p.punctured, [0, 4])
    np.testing.assert_array_equal(p.kept, [1, 2, 3, 5, 6, 7])


def test_default_parameters_pattern():
    p = build_pattern(WaveformConfig(n_interval=5))
    assert p.n_punct == 8
    np.testing.assert_array_equal(p.punctured, np.arange(0, 48, 6))
    assert build_pattern(WaveformConfig(n_interval=11)).n_punct == 4


def test_offset_pattern_by_enumeration():
    p = build_pattern(WaveformConfig(n_interval=11, offset=1))
    np.testing.assert_array_equal(p.punctured, [n for n in range(48) if n % 12 == 1])


@given(st.sampled_from([8, 12, 24, 48, 60]), st.data())
def test_pattern_partition_and_period(m, data):
    ni = data.draw(st.sampled_from([d - 1 for d in range(2, m + 1) if m % d == 0]))
    s = data.draw(st.integers(0, ni))
    cfg = small_cfg(m, ni, s, n_fft=2 * m)
    p = build_pattern(cfg)
    assert np.array_equal(np.sort(np.concatenate([p.kept, p.punctured])), np.arange(m))
    assert np.all(np.diff(p.punctured) == ni + 1)
    assert p.punctured.size == m // (ni + 1)
    # trailing nulls with n_null = n_punct always see every residue
    check_null_layout(m, p.n_punct, cfg.null_positions)


def test_derived_quantities():
    cfg = WaveformConfig()
    assert (cfg.n_punct, cfg.n_zero, cfg.n_data) == (8, 8, 40)
    assert cfg.alpha == pytest.approx(np.sqrt(40 / 32))
    assert cfg.alpha == pytest.approx(1.11803, abs=1e-5)
    assert WaveformConfig(exact_alpha=True).alpha == pytest.approx(np.sqrt(48 / 40))


@pytest.mark.parametrize(
    "kw,needle",
    [
        (dict(n_interval=4), "divisibility"),
        (dict(n_null=7), "null count"),
        (dict(offset=6), "offset"),
        (dict(m_alloc=4096), "exceeds"),
        (dict(subcarrier_start=2040), "subcarrier_start"),
        (dict(waveform_kind="ofdma"), "waveform_kind"),
        (dict(modulation="8psk"), "modulation"),
    ],
)
def test_config_errors_name_constraint(kw, needle):
    with pytest.raises(ConfigError, match=needle):
        WaveformConfig(**kw)


def test_rank_condition_violation():
    with pytest.raises(ConfigError, match="rank condition"):
        check_null_layout(8, 2, [0, 2])
    check_null_layout(8, 2, [6, 7])


def test_zc_unit_modulus():
    for n in (2, 3, 4, 8, 13, 48):
        assert np.allclose(np.abs(generate_zc(n).values), 1.0)


def test_zc_cyclic_extension():
    v = generate_zc(4).values
    assert v.size == 4
    assert v[3] == v[0]
    v8 = generate_zc(8).values
    assert v8[7] == v8[0]


def test_zc_distinct_roots_low_correlation():
    a, b = generate_zc(8, 1).values, generate_zc(8, 2).values
    assert abs(np.vdot(a, b)) < 8
    assert abs(np.vdot(a, a)) == pytest.approx(8)


def test_zc_errors():
    with pytest.raises(ConfigError):
        generate_zc(1)
    with pytest.raises(ConfigError):
        generate_zc(8, root=7)


def test_plain_impulse_has_unit_energy():
    cfg = WaveformConfig(waveform_kind="plain_dfts")
    d = np.zeros(48, dtype=complex)
    d[0] = 1
    body = tx_plain(d, cfg)[cfg.cp_len:]
    assert np.sum(np.abs(body) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_plain_wrong_length():
    with pytest.raises(InvalidInputError):
        tx_plain(np.ones(40), WaveformConfig(waveform_kind="plain_dfts"))


def test_worked_example_frequency_grid(rng):
    cfg = small_cfg(8, 3, 0)
    d = crandn(rng, 6)
    rs = reference_for(cfg)
    x = dft(np.concatenate([d, [0, 0]]))
    a = np.sqrt(6 / 4)
    expect = np.array([rs.values[0], a * x[1], a * x[2], a * x[3], rs.values[1], a * x[5], a * x[6], a * x[7]])
    np.testing.assert_allclose(punctured_grid(d, rs, cfg), expect, atol=1e-14)
    # and the time signal is the IDFT of that grid placed on the allocated subcarriers
    body = tx_punctured(d, rs, cfg)[cfg.cp_len:]
    grid = np.zeros(cfg.n_fft, dtype=complex)
    grid[cfg.subcarrier_start:cfg.subcarrier_start + 8] = expect
    np.testing.assert_allclose(body, idft(grid), atol=1e-14)


def test_no_puncture_reduces_to_plain(rng):
    cfg = small_cfg(8, 3, 0)
    d = crandn(rng, cfg.n_data)
    got = tx_punctured(d, None, cfg, pattern=PuncturePattern.none(8))
    plain = tx_plain(np.concatenate([d, np.zeros(cfg.n_zero)]), cfg)
    np.testing.assert_allclose(got, plain, atol=1e-14)


def test_cp_is_tail_copy(rng):
    for cfg in (WaveformConfig(), WaveformConfig(waveform_kind="plain_dfts"), WaveformConfig(waveform_kind="ofdm")):
        d = modulate(rng.integers(0, 2, 4 * cfg.n_data), qam16())
        x = (tx_punctured(d, reference_for(cfg), cfg) if cfg.punctured
             else tx_plain(d, cfg) if cfg.waveform_kind == "plain_dfts" else tx_ofdm(d, cfg))
        assert x.size == cfg.n_fft + cfg.cp_len
        np.testing.assert_array_equal(x[:cfg.cp_len], x[-cfg.cp_len:])


def _mean_body_energy(rng, cfg, n=10_000):
    d = modulate(rng.integers(0, 2, 4 * cfg.n_data * n), qam16()).reshape(n, cfg.n_data)
    body = tx_punctured(d, reference_for(cfg), cfg)[:, cfg.cp_len:]
    return np.mean(np.sum(np.abs(body) ** 2, axis=1))


@pytest.mark.parametrize("ni", [5, 11])
def test_punctured_energy_with_energy_exact_gain(rng, ni):
    cfg = WaveformConfig(n_interval=ni, exact_alpha=True)
    assert _mean_body_energy(rng, cfg) == pytest.approx(cfg.n_data + cfg.n_punct, rel=0.02)


def test_punctured_energy_with_default_gain(rng):
    # the default gain restores N_d only approximately; the exact expectation is
    # alpha^2 * N_d * (M - N_p) / M + N_p
    for ni in (5, 11):
        cfg = WaveformConfig(n_interval=ni)
        expect = cfg.alpha**2 * cfg.n_data * (48 - cfg.n_punct) / 48 + cfg.n_punct
        assert _mean_body_energy(rng, cfg) == pytest.approx(expect, rel=0.02)
        assert expect == pytest.approx(cfg.mean_bin_energy * 48)
    cfg = WaveformConfig(n_interval=11)
    assert _mean_body_energy(rng, cfg) == pytest.approx(cfg.n_data + cfg.n_punct, rel=0.02)


def test_ofdm_single_tone_and_energy(rng):
    cfg = WaveformConfig(waveform_kind="ofdm")
    d = np.zeros(48, dtype=complex)
    d[17] = 1
    body = tx_ofdm(d, cfg)[cfg.cp_len:]
    assert papr(body, 1) == pytest.approx(0.0, abs=1e-9)
    d = modulate(rng.integers(0, 2, 4 * 48), qam16())
    body = tx_ofdm(d, cfg)[cfg.cp_len:]
    assert np.sum(np.abs(body) ** 2) == pytest.approx(np.sum(np.abs(d) ** 2))


def test_single_carrier_papr_advantage(rng):
    n = 10_000
    plain = WaveformConfig(waveform_kind="plain_dfts")
    ofdm = WaveformConfig(waveform_kind="ofdm")
    d = modulate(rng.integers(0, 2, 2 * 48 * n), qpsk()).reshape(n, 48)
    p_sc = papr(tx_plain(d, plain)[:, plain.cp_len:], 4)
    p_of = papr(tx_ofdm(d, ofdm)[:, ofdm.cp_len:], 4)
    assert np.mean(p_sc) < np.mean(p_of)
    assert papr_at_ccdf(p_sc, 1e-2) < papr_at_ccdf(p_of, 1e-2)


def test_ofdm_worse_than_plain_at_1e3(rng):
    n = 10_000
    plain = WaveformConfig(waveform_kind="plain_dfts")
    ofdm = WaveformConfig(waveform_kind="ofdm")
    d = modulate(rng.integers(0, 2, 4 * 48 * n), qam16()).reshape(n, 48)
    assert papr_at_ccdf(papr(tx_ofdm(d, ofdm)[:, 144:]), 1e-3) > papr_at_ccdf(papr(tx_plain(d, plain)[:, 144:]), 1e-3)
