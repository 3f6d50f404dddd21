import math

import numpy as np
import pytest

from fidstring.engine import normalize
from fidstring.errors import InversionFailure
from fidstring.geometry import Curve
from fidstring.engine import Scenario
from fidstring.noise import GaussianNoise, make_rng
from fidstring.oracle import OracleResult, ks_distance, slab_oracle, tube_oracle
from fidstring.priors import Jeffreys, Shift
from fidstring.scenarios import circle_scenario, line_scenario, seidenfeld_slab_inverse


class Uniform01:
    @staticmethod
    def cdf(t):
        return np.clip(t, 0.0, 1.0)


def test_ks_single_sample_at_median():
    assert ks_distance([0.5], Uniform01) == 0.5


def test_ks_known_values():
    assert ks_distance([0.25, 0.75], Uniform01) == 0.25
    assert ks_distance([2.0], Uniform01) == 1.0
    with pytest.raises(ValueError):
        ks_distance([], Uniform01)


def test_ks_of_exact_samples(seid0):
    rf = normalize(seid0.scenario, Jeffreys())
    n = 100_000
    hits = [ks_distance(rf.sample(make_rng(seed), n), rf) <= 1.95 / math.sqrt(n) for seed in range(5)]
    assert sum(hits) >= 4


def test_ks_detects_mismatch(seid11):
    jeff = normalize(seid11.scenario, Jeffreys())
    shift = normalize(seid11.scenario, Shift((1, 0)))
    assert ks_distance(jeff.sample(make_rng(1), 50_000), shift) > 0.05


@pytest.mark.parametrize("eps", [0.0, -0.01, float("nan")])
def test_epsilon_must_be_positive(seid0, eps):
    with pytest.raises(ValueError):
        tube_oracle(seid0.scenario, eps, 100, 1)
    with pytest.raises(ValueError):
        slab_oracle(seid0.scenario, (1, 0), eps, 100, 1)


def test_other_preconditions(seid0):
    with pytest.raises(ValueError):
        tube_oracle(seid0.scenario, 0.01, 0, 1)
    with pytest.raises(ValueError):
        slab_oracle(seid0.scenario, (0, 0), 0.01, 100, 1)


def test_report_fields(seid0):
    res = tube_oracle(seid0.scenario, 0.02, 200_000, 3)
    rep = res.report()
    assert set(rep) >= {"kind", "acceptance_rate", "n_accepted", "ks_distance", "epsilon", "seed", "n_proposed"}
    assert rep["n_accepted"] == res.accepted_t.size and 0 < rep["acceptance_rate"] <= 1
    assert np.all((res.accepted_t >= -2) & (res.accepted_t <= 2))
    assert rep["ks_distance"] is None
    assert 0 <= res.compare(normalize(seid0.scenario, Jeffreys())).ks_distance <= 1


@pytest.mark.slow
def test_acceptance_rate_linear_in_epsilon(seid0):
    inverse = seidenfeld_slab_inverse((1, 0))
    rates = {eps: slab_oracle(seid0.scenario, (1, 0), eps, 4_000_000, 11, inverse=inverse).acceptance_rate
             for eps in (0.005, 0.01, 0.02)}
    for eps, rate in rates.items():
        assert abs(rate / eps / (rates[0.01] / 0.01) - 1.0) <= 0.10
    tube = {eps: tube_oracle(seid0.scenario, eps, 1_000_000, 11).acceptance_rate for eps in (0.005, 0.02)}
    assert abs(tube[0.02] / tube[0.005] / 4 - 1.0) <= 0.10


def test_workers_and_batches_do_not_change_results(seid0):
    a = tube_oracle(seid0.scenario, 0.02, 300_000, 5, batch_size=50_000, workers=1)
    b = tube_oracle(seid0.scenario, 0.02, 300_000, 5, batch_size=50_000, workers=3)
    assert a.accepted_t.tobytes() == b.accepted_t.tobytes()
    c = slab_oracle(seid0.scenario, (0, 1), 0.02, 300_000, 5, batch_size=50_000, workers=1)
    d = slab_oracle(seid0.scenario, (0, 1), 0.02, 300_000, 5, batch_size=50_000, workers=4)
    assert c.accepted_t.tobytes() == d.accepted_t.tobytes()


def test_same_seed_same_result(seid0):
    a = tube_oracle(seid0.scenario, 0.02, 100_000, 9)
    b = tube_oracle(seid0.scenario, 0.02, 100_000, 9)
    assert a.accepted_t.tobytes() == b.accepted_t.tobytes()


@pytest.mark.parametrize("d", [(1, 0), (0, 1)])
def test_numeric_slab_inversion_matches_closed_form(seid11, d):
    a = slab_oracle(seid11.scenario, d, 0.01, 2_000_000, 17, inverse=seidenfeld_slab_inverse(d))
    b = slab_oracle(seid11.scenario, d, 0.01, 2_000_000, 17)
    assert a.n_accepted == b.n_accepted
    assert np.max(np.abs(np.sort(a.accepted_t) - np.sort(b.accepted_t))) <= 1e-10
    assert b.n_inversion_failures == 0


def test_slab_oracle_generic_direction(seid11):
    d = (1.0, -0.5)
    res = slab_oracle(seid11.scenario, d, 0.01, 3_000_000, 4, reference=normalize(seid11.scenario, Shift(d)))
    assert res.n_accepted > 10_000
    assert res.ks_distance <= 1.95 / math.sqrt(res.n_accepted) + 0.005


def test_slab_inversion_failure_aborts():
    # (t^2, t^3) along d = (0, 1): cross(mu, d) = t^2 has two roots for every target
    curve = Curve.from_strings("t^2", "t^3", -1, 1, check_regularity=False)
    sc = Scenario(curve, GaussianNoise(), (0.5, 0.0))
    with pytest.raises(InversionFailure):
        slab_oracle(sc, (0, 1), 0.01, 100_000, 1)


@pytest.mark.slow
def test_tube_oracle_line():
    sc, ref = line_scenario((0, 0), (1, 0), (-10, 10), (0, 0))
    res = tube_oracle(sc, 0.01, 5_000_000, 21, reference=ref)
    assert res.n_accepted > 30_000
    assert res.ks_distance <= 0.01


@pytest.mark.slow
def test_tube_oracle_circle():
    sc, ref = circle_scenario(2.0, (1, 1))
    res = tube_oracle(sc, 0.01, 5_000_000, 22, reference=ref)
    assert res.n_accepted > 30_000
    assert res.ks_distance <= 0.015


@pytest.mark.slow
def test_slab_epsilon_halving_is_within_noise(seid0):
    inverse = seidenfeld_slab_inverse((0, 1))
    rf = normalize(seid0.scenario, Shift((0, 1)))
    ks = {}
    for eps in (0.02, 0.01):
        res = slab_oracle(seid0.scenario, (0, 1), eps, 8_000_000, 31, inverse=inverse, reference=rf)
        ks[eps] = (res.ks_distance, 1.0 / math.sqrt(res.n_accepted))
    noise = max(n for _, n in ks.values())
    assert abs(ks[0.02][0] - ks[0.01][0]) <= 2 * 1.36 * noise


def test_result_copy():
    r = OracleResult("tube", np.array([0.1, 0.9]), 10, 0.01, 1)
    assert r.acceptance_rate == 0.2 and r.compare(Uniform01).ks_distance == 0.4
