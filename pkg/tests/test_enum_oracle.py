import itertools
import math

import numpy as np
import pytest

from droplet.contour import contour_from_sites, extract_contours
from droplet.enum_oracle import (
    binomial_pmf_uniform,
    conditional_expectation,
    enumerate_distribution,
    expectation,
    read_pmf_csv,
    site_magnetizations,
    skeleton_event_probabilities,
    skeleton_event_probability,
    write_pmf_csv,
)
from droplet.lattice import Boundary, SpinGrid
from droplet.skeleton import build_skeleton, check_compatible


def test_single_site_closed_form():
    b = 0.37
    law = enumerate_distribution(1, b)
    z = math.exp(4 * b) + math.exp(-4 * b)
    assert law.pmf(1) == pytest.approx(math.exp(4 * b) / z, rel=1e-13)
    assert law.pmf(-1) == pytest.approx(math.exp(-4 * b) / z, rel=1e-13)


def test_infinite_temperature_is_binomial():
    law = enumerate_distribution(2, 0.0)
    for M, p in binomial_pmf_uniform(2).items():
        assert law.pmf(M) == pytest.approx(p, abs=1e-15)
    assert law.pmf(4) == pytest.approx(1 / 16)
    assert law.pmf(0) == pytest.approx(6 / 16)


@pytest.mark.parametrize("L,beta", [(3, 0.4), (4, 0.6), (4, 2.5)])
def test_pmf_normalized_and_parity(L, beta):
    law = enumerate_distribution(L, beta)
    assert math.fsum(law.magnetization_pmf.values()) == pytest.approx(1.0, abs=1e-12)
    assert all((M - L * L) % 2 == 0 for M in law.magnetization_pmf)
    assert law.pmf(L * L - 1) == 0.0


def test_plus_minus_symmetry():
    plus = enumerate_distribution(4, 0.6, "plus")
    minus = enumerate_distribution(4, 0.6, "minus")
    for M, p in plus.magnetization_pmf.items():
        assert minus.pmf(-M) == p
    assert plus.log_Z == minus.log_Z


def test_log_z_matches_direct_sum():
    L, beta = 3, 0.45
    law = enumerate_distribution(L, beta)
    terms = []
    for code in range(1 << 9):
        spins = np.array([1 if (code >> k) & 1 else -1 for k in range(9)], dtype=np.int8).reshape(3, 3)
        terms.append(-beta * SpinGrid(3, Boundary.PLUS, spins).energy())
    assert law.log_Z == pytest.approx(np.logaddexp.reduce(sorted(terms)), abs=1e-12)


def test_rejects_large_boxes():
    with pytest.raises(ValueError):
        enumerate_distribution(6, 0.5)


def test_conditional_expectations():
    law = enumerate_distribution(4, 0.6)
    assert conditional_expectation(law, 8, lambda g: g.magnetization) == pytest.approx(8.0, abs=1e-12)
    zero = enumerate_distribution(2, 0.0)
    assert conditional_expectation(zero, 0, lambda g: float(g.spins[0, 0])) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        conditional_expectation(law, 7, lambda g: 1.0)


def test_reference_values_l4_beta06():
    # frozen from the full 65536-term enumeration
    law = enumerate_distribution(4, 0.6)
    cond = site_magnetizations(law, M=8)
    assert cond[2, 2] == pytest.approx(0.18448930745186, abs=1e-12)
    assert site_magnetizations(law)[2, 2] == pytest.approx(0.97512083500901, abs=1e-12)
    assert cond.sum() == pytest.approx(8.0, abs=1e-10)
    assert np.allclose(cond, cond.T, atol=1e-12)
    assert np.allclose(cond, cond[::-1, ::-1], atol=1e-12)
    assert expectation(law, lambda g: g.magnetization) == pytest.approx(law.mean_M(), abs=1e-10)


def test_pmf_csv_roundtrip(tmp_path):
    law = enumerate_distribution(3, 0.8, "minus")
    write_pmf_csv(law, tmp_path / "pmf.csv")
    back = read_pmf_csv(tmp_path / "pmf.csv")
    assert back.magnetization_pmf == law.magnetization_pmf
    assert back.log_Z == law.log_Z and back.boundary is Boundary.MINUS


def _brute_force(L, beta, events, s):
    d2min = math.ceil((2 * s) ** 2 - 1e-9)
    tot, Z = np.zeros(len(events)), 0.0
    for code in range(1 << (L * L)):
        spins = np.array([1 if (code >> k) & 1 else -1 for k in range(L * L)], dtype=np.int8).reshape(L, L)
        g = SpinGrid(L, Boundary.PLUS, spins)
        w = math.exp(-beta * g.energy())
        Z += w
        large = [c for c in extract_contours(g, mark_external=False) if c.diam2 >= d2min]
        for k, ev in enumerate(events):
            if len(large) != len(ev):
                continue
            if not ev or any(all(check_compatible(c, S) for c, S in zip(large, perm))
                             for perm in itertools.permutations(ev)):
                tot[k] += w
    return tot / Z


def test_skeleton_events_match_brute_force():
    L, beta, s = 3, 0.9, 1.0
    law = enumerate_distribution(L, beta)

    def sk(sites):
        return build_skeleton(contour_from_sites(L, sites), s)

    events = [
        [],
        [sk([(1, 1)])],
        [sk([(0, 0), (0, 1)])],
        [sk([(r, c) for r in range(3) for c in range(3)])],
        [sk([(0, 0)]), sk([(2, 2)])],
    ]
    got = skeleton_event_probabilities(law, events, s)
    want = _brute_force(L, beta, events, s)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-15)
    assert skeleton_event_probability(law, events[1], s) == pytest.approx(got[1], rel=1e-12)


def test_no_large_contour_probability():
    L = 3
    big_s = L * math.sqrt(2) + 1
    cold = enumerate_distribution(L, 30.0)
    assert skeleton_event_probability(cold, [], big_s) == pytest.approx(1.0, abs=1e-12)
    warm = enumerate_distribution(L, 0.3)
    assert skeleton_event_probability(warm, [], big_s) == pytest.approx(1.0, abs=1e-12)
    p = skeleton_event_probability(warm, [], 1.0)
    assert 0.0 <= p < 1.0
