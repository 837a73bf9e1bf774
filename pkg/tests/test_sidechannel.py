import math

import numpy as np
import pytest

from oracles import normal_two_sided_p
from quadrsa import hwsim, rsa
from quadrsa import sidechannel as sc
from quadrsa.errors import DomainError, ParseError


def test_power_model_substitution():
    tr = hwsim.SimTrace.from_toggle_counts([0, 5, 2])
    assert sc.power_model(tr, unit=1.0, baseline=10.0).samples.tolist() == [10.0, 15.0, 12.0]
    idle = hwsim.SimTrace.from_toggle_counts([0] * 8)
    assert set(sc.power_model(idle, 2.0, 3.5).samples.tolist()) == {3.5}


def test_bitstream_determinism_and_spread():
    a = sc.random_bitstream(5, 10000)
    assert np.array_equal(a, sc.random_bitstream(5, 10000))
    for s in range(10):
        diff = np.count_nonzero(sc.random_bitstream(s, 10000) != sc.random_bitstream(s + 1, 10000))
        assert diff >= 3000


def test_monobit_statistic_in_band():
    bits = sc.random_bitstream(0, 20000)
    ones = int(bits.sum())
    s_obs = abs(ones - (20000 - ones)) / math.sqrt(20000)
    res = sc.monobit_test(bits)
    assert res.statistic == pytest.approx(s_obs)
    assert res.p_value == pytest.approx(normal_two_sided_p(s_obs))
    assert s_obs < 2.5758  # two-sided 99% normal quantile


def test_randomness_edge_cases():
    zeros = np.zeros(1000, dtype=int)
    assert not sc.monobit_test(zeros).passed
    alt = np.arange(1000) % 2
    assert sc.monobit_test(alt).passed
    runs = sc.runs_test(alt)
    assert runs.statistic == 1000  # every position starts a new run
    assert not runs.passed
    with pytest.raises(DomainError):
        sc.randomness_tests([0, 1] * 10)
    with pytest.raises(DomainError):
        sc.randomness_tests([0, 2] * 100)


def test_runs_statistic_against_direct_count():
    bits = sc.random_bitstream(3, 5000)
    runs = 1 + sum(1 for a, b in zip(bits[:-1], bits[1:]) if a != b)
    assert sc.runs_test(bits).statistic == runs


def test_countermeasure_properties():
    clean = sc.PowerTrace(np.linspace(0, 50, 400))
    assert np.array_equal(sc.apply_countermeasure(clean, sc.NoiseConfig(1, 0.0)).samples, clean.samples)
    a = sc.apply_countermeasure(clean, sc.NoiseConfig(1, 20.0))
    b = sc.apply_countermeasure(clean, sc.NoiseConfig(1, 20.0))
    c = sc.apply_countermeasure(clean, sc.NoiseConfig(2, 20.0))
    assert np.array_equal(a.samples, b.samples) and a.protected
    assert a.samples.mean() != c.samples.mean()
    noise = a.samples - clean.samples
    assert noise.min() >= 0 and noise.max() <= 20.0
    with pytest.raises(DomainError):
        sc.NoiseConfig(0, -1.0)


@pytest.mark.parametrize("dist", list(sc.NoiseDistribution))
def test_noise_std_matches_config(dist):
    cfg = sc.NoiseConfig(7, 10.0, dist)
    samples = sc.noise_samples(cfg, 200000)
    assert samples.mean() == pytest.approx(cfg.mean, rel=0.02)
    assert samples.std() == pytest.approx(cfg.std, rel=0.02)


@pytest.fixture(scope="module")
def toy_set():
    pair = rsa.keygen_toy(64, 8, d_bits=16)
    ts = sc.collect_traces(pair.private.d, pair.public.modulus, 20, seed=1, n_bits=64)
    return pair, ts


def test_collect_and_calibrate(toy_set):
    pair, ts = toy_set
    assert ts.traces.shape[0] == 20
    noise = sc.calibrate_noise(ts, seed=3)
    assert noise.std == pytest.approx(2 * sc.data_dependent_std(ts.traces))
    prot = sc.protect_traceset(ts, noise)
    assert prot.traces.shape == ts.traces.shape and prot.protected
    assert prot.alignment == ts.alignment
    assert not np.array_equal(prot.traces[0] - ts.traces[0], prot.traces[1] - ts.traces[1])


def test_traceset_csv_round_trip(toy_set, tmp_path):
    _, ts = toy_set
    path = tmp_path / "ts.csv"
    sc.write_traceset_csv(ts, path)
    back = sc.read_traceset_csv(path, 64)
    assert np.array_equal(back.traces, ts.traces)
    assert back.plaintexts == ts.plaintexts
    assert back.alignment == ts.alignment


def test_traceset_csv_malformed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("plaintext,s0,protected\n1,abc,0\n")
    with pytest.raises(ParseError):
        sc.read_traceset_csv(bad, 64)
    bad.write_text("plaintext,s0,s1,protected\n1,2.0,3.0,0\n")
    with pytest.raises(ParseError):
        sc.read_traceset_csv(bad, 64)
    with pytest.raises(ParseError):
        sc.read_traceset_csv(tmp_path / "missing.csv", 64)
