import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwre.env import EnvironmentSpec, SiteLaw, constant_environment, environment_from_laws, sample_environment
from rwre.errors import InvalidLaw, UndefinedDelta
from rwre.matrix import (ProductAccumulator, build_matrix, dump_log_deltas, log_delta, log_delta_profile,
                         log_delta_sum, top_rows)

from conftest import LAW_A, LAW_B


def test_build_matrix_L2():
    m = build_matrix(LAW_A)
    assert m.a == pytest.approx((0.6, 0.2), abs=1e-15)
    dense = m.dense()
    assert np.allclose(dense, [[0.6, 0.2], [1.0, 0.0]])


def test_build_matrix_L1():
    assert build_matrix(SiteLaw.from_dict({-1: 0.25, 0: 0.25, 1: 0.5})).a == pytest.approx((0.5,))
    assert build_matrix(SiteLaw.from_dict({-1: 0.5, 0: 0.0, 1: 0.5})).a == (1.0,)


def test_build_matrix_rejects_invalid():
    with pytest.raises(InvalidLaw):
        build_matrix(SiteLaw.from_dict({-1: 0.5, 0: 0.5, 1: 0.0}))
    with pytest.raises(InvalidLaw):
        build_matrix(SiteLaw.from_dict({-2: 0.0, -1: 0.3, 0: 0.2, 1: 0.5}), kappa=0.1)


@given(st.lists(st.floats(0.01, 1.0), min_size=4, max_size=6))
def test_top_row_nested_tails(ws):
    p = np.array(ws) / sum(ws)
    a = top_rows(p)
    assert np.all(np.diff(a) <= 1e-15)
    L = len(ws) - 2
    assert a[-1] == pytest.approx(p[0] / p[-1])
    assert a[0] == pytest.approx(p[:L].sum() / p[-1])


def test_log_delta_empty_product():
    env = constant_environment(LAW_A)
    assert log_delta(env, 4, 5) == 0.0


def test_log_delta_scalar():
    env = constant_environment(SiteLaw.nearest_neighbor(0.5))
    assert log_delta(env, 3, 1) == pytest.approx(3 * math.log(0.5), rel=1e-14)


@pytest.mark.parametrize("k", range(1, 21))
def test_log_delta_matches_dense_power(k):
    env = constant_environment(LAW_A)
    A = np.array([[0.6, 0.2], [1.0, 0.0]])
    expect = math.log(np.linalg.matrix_power(A, k)[0, 0])
    assert log_delta(env, k, 1) == pytest.approx(expect, rel=1e-12, abs=1e-13)


def _exact_delta(laws):
    """(1,1) entry of A_k ... A_l with exact rational arithmetic; laws ordered l..k."""
    L = laws[0].L
    v = [Fraction(1)] + [Fraction(0)] * (L - 1)
    for law in laws:
        p = [Fraction(x) for x in law.probs]
        a = [sum(p[: L - i]) / p[L + 1] for i in range(L)]
        v = [sum(ai * vi for ai, vi in zip(a, v))] + v[:-1]
    return v[0]


@pytest.mark.parametrize("seed", range(10))
def test_renormalized_matches_exact_rational(seed):
    spec = EnvironmentSpec(2, 0.1, ((LAW_A, 0.5), (LAW_B, 0.5)))
    env = sample_environment(spec, (0, 49), seed)
    laws = [env.law(x) for x in range(50)]
    exact = _exact_delta(laws)
    got = log_delta(env, 49, 0)
    assert math.exp(got - math.log(exact)) == pytest.approx(1.0, abs=1e-10)


def test_nearest_neighbor_reduction():
    rhos = np.random.default_rng(0).uniform(0.2, 3.0, 40)
    env = environment_from_laws([SiteLaw.nearest_neighbor(r) for r in rhos])
    prof = log_delta_profile(env, 0, 39)
    assert np.allclose(prof[1:], np.cumsum(np.log(rhos)), rtol=1e-13, atol=1e-13)


@given(seed=st.integers(0, 10**6), m=st.integers(0, 28))
@settings(max_examples=40, deadline=None)
def test_supermultiplicative_split(seed, m):
    spec = EnvironmentSpec(3, 0.05, (
        (SiteLaw.from_dict({-3: 0.1, -2: 0.1, -1: 0.2, 0: 0.1, 1: 0.5}), 0.5),
        (SiteLaw.from_dict({-3: 0.05, -2: 0.2, -1: 0.1, 0: 0.25, 1: 0.4}), 0.5)))
    env = sample_environment(spec, (0, 30), seed)
    whole = log_delta(env, 30, 0)
    parts = log_delta(env, 30, m + 1) + log_delta(env, m, 0)
    assert whole >= parts - 1e-12


@given(seed=st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_strict_positivity_after_L_factors(seed):
    spec = EnvironmentSpec(3, 0.05, ((SiteLaw.from_dict({-3: 0.1, -2: 0.1, -1: 0.2, 0: 0.1, 1: 0.5}), 1.0),))
    env = sample_environment(spec, (0, 10), seed)
    P = np.eye(3)
    for x in range(3):
        P = build_matrix(env.law(x)).dense() @ P
    assert (P > 0).all()


def test_accumulator_reconstructs_product():
    rows = top_rows(np.array([LAW_A.probs, LAW_B.probs] * 10))
    acc = ProductAccumulator(2)
    direct = np.array([1.0, 0.0])
    for a in rows:
        acc.push(a)
        direct = np.array([[a[0], a[1]], [1, 0]]) @ direct
    assert np.allclose(acc.value(), direct, rtol=1e-13)
    assert acc.count == 20
    assert np.all(acc.v <= 1.0) and acc.v.max() == 1.0


def test_accumulator_survives_long_products():
    env = constant_environment(SiteLaw.nearest_neighbor(0.25))
    assert log_delta(env, 5000, 1) == pytest.approx(5000 * math.log(0.25), rel=1e-12)


def test_log_delta_sum_unit_terms():
    env = constant_environment(SiteLaw.nearest_neighbor(1.0))
    assert log_delta_sum(env, (3, 3), 4) == 0.0
    M = 37
    assert log_delta_sum(env, (0, M), 1) == pytest.approx(math.log(M + 1), rel=1e-14)


@pytest.mark.parametrize("M", [1, 5, 30, 200])
def test_log_delta_sum_geometric(M):
    env = constant_environment(SiteLaw.nearest_neighbor(2.0))
    # sum_{j=1}^M 2^j = 2^{M+1} - 2
    expect = math.log(2.0) + math.log(2.0 ** M - 1) if M < 1000 else None
    assert log_delta_sum(env, (1, M), 1) == pytest.approx(expect, rel=1e-13)


def test_undefined_delta_guard():
    law = SiteLaw.from_dict({-2: 0.0, -1: 0.5, 0: 0.0, 1: 0.5})  # a = (1, 0): breaks ellipticity
    zero_top = SiteLaw.from_dict({-2: 0.0, -1: 0.0, 0: 0.5, 1: 0.5})  # a = (0, 0)
    env = environment_from_laws([zero_top, law], lo=0)
    with pytest.raises(UndefinedDelta):
        log_delta(env, 0, 0)


def test_dump_csv(tmp_path):
    env = constant_environment(SiteLaw.nearest_neighbor(2.0))
    path = tmp_path / "d.csv"
    dump_log_deltas(env, 1, 3, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "j,log_delta"
    assert len(lines) == 5
    assert float(lines[-1].split(",")[1]) == pytest.approx(3 * math.log(2))
