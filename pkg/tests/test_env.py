import json
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rwre.env import (EnvironmentSpec, SiteLaw, constant_environment, sample_environment, shifted_view,
                      validate_site_law)
from rwre.errors import InvalidSpec

from conftest import LAW_A, LAW_B, golden_spec, two_atom_l2_spec


def test_validate_ok():
    law = SiteLaw.from_dict({-1: 0.3, 0: 0.2, 1: 0.5})
    assert validate_site_law(law, 0.1).ok


def test_validate_zero_right_jump():
    law = SiteLaw.from_dict({-1: 0.5, 0: 0.5, 1: 0.0})
    assert "ZeroRightJump" in validate_site_law(law, 0.1).codes


@pytest.mark.parametrize("kappa", [0.01, 0.1, 0.5])
def test_validate_not_normalized(kappa):
    law = SiteLaw.from_dict({-1: 0.2, 0: 0.2, 1: 0.2})
    assert "NotNormalized" in validate_site_law(law, kappa).codes


def test_validate_ellipticity_lists_each_violation():
    law = SiteLaw.from_dict({-3: 0.0, -2: 0.01, -1: 0.3, 0: 0.19, 1: 0.5})
    verdict = validate_site_law(law, 0.1)
    assert verdict.codes == ["EllipticityViolated", "EllipticityViolated"]


def test_validate_stay_probability_unconstrained():
    law = SiteLaw.from_dict({-1: 0.5, 0: 0.0, 1: 0.5})
    assert validate_site_law(law, 0.9).ok


def test_kappa_at_least_one_rejected():
    law = SiteLaw.from_dict({-1: 0.6, 0: 0.0, 1: 0.4})
    assert "InvalidKappa" in validate_site_law(law, 1.0).codes


def test_spec_rejects_bad_atom_and_weights():
    bad = SiteLaw.from_dict({-1: 0.2, 0: 0.2, 1: 0.2})
    with pytest.raises(InvalidSpec) as info:
        EnvironmentSpec(1, 0.1, ((bad, 0.7), (SiteLaw.nearest_neighbor(1.0), 0.2)))
    codes = [v.code for v in info.value.violations]
    assert "NotNormalized" in codes and "WeightsNotNormalized" in codes


def test_spec_json_round_trip():
    spec = two_atom_l2_spec()
    text = spec.to_json()
    data = json.loads(text)
    assert set(data) == {"L", "kappa", "atoms"}
    assert set(data["atoms"][0]["probs"]) == {"-2", "-1", "0", "1"}
    assert EnvironmentSpec.from_json(text) == spec


def test_single_atom_spec_every_site_same():
    spec = EnvironmentSpec.point_mass(LAW_A, kappa=0.1)
    env = sample_environment(spec, (-50, 50), seed=3)
    assert (env.atoms(np.arange(-50, 51)) == 0).all()


def test_degenerate_weights():
    spec = EnvironmentSpec(2, 0.1, ((LAW_A, 1.0), (LAW_B, 0.0)))
    env = sample_environment(spec, (0, 1000), seed=9)
    assert (env.atoms(np.arange(0, 1001)) == 0).all()


def test_same_seed_identical_windows():
    spec = golden_spec()
    e1 = sample_environment(spec, (-20, 20), 42)
    e2 = sample_environment(spec, (-20, 20), 42)
    xs = np.arange(-20, 21)
    assert (e1.atoms(xs) == e2.atoms(xs)).all()
    e3 = sample_environment(spec, (-20, 20), 43)
    assert (e1.atoms(xs) != e3.atoms(xs)).any()


def test_realization_order_independent():
    spec = golden_spec()
    a = sample_environment(spec, (0, 10), 5)
    a.extend(-100, 200)
    b = sample_environment(spec, (150, 200), 5)
    b.extend(-100, 0)
    b.extend(-100, 200)
    xs = np.arange(-100, 201)
    assert (a.atoms(xs) == b.atoms(xs)).all()


def test_extension_never_changes_realized_sites():
    spec = golden_spec()
    env = sample_environment(spec, (0, 30), 1)
    before = env.atoms(np.arange(0, 31)).copy()
    env.extend(-500, 500)
    assert (env.atoms(np.arange(0, 31)) == before).all()
    assert env.interval == (-500, 500)


def test_concurrent_extension_consistent():
    spec = golden_spec()
    env = sample_environment(spec, (0, 0), 77)
    reference = spec.draw_atoms(77, np.arange(-2000, 2000))

    def worker(k):
        env.extend(-k * 100, k * 100)

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(1, 21)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert (env.atoms(np.arange(-2000, 2000)) == reference).all()


def test_atom_frequencies_chi_square():
    spec = EnvironmentSpec(2, 0.1, ((LAW_A, 0.3), (LAW_B, 0.7)))
    env = sample_environment(spec, (0, 99_999), seed=2024)
    counts = np.bincount(env.atoms(np.arange(100_000)), minlength=2)
    _, p = stats.chisquare(counts, 100_000 * np.array([0.3, 0.7]))
    assert p > 0.01


def test_shift_identity_and_inverse():
    env = sample_environment(golden_spec(), (-10, 10), 8)
    assert shifted_view(env, 0) == env
    assert shifted_view(shifted_view(env, 5), -5) == env


@given(a=st.integers(-50, 50), b=st.integers(-50, 50), x=st.integers(-100, 100))
@settings(max_examples=60, deadline=None)
def test_shift_composition_and_resolution(a, b, x):
    env = sample_environment(golden_spec(), (-200, 200), 8)
    assert shifted_view(shifted_view(env, a), b) == shifted_view(env, a + b)
    assert shifted_view(env, a).atom(x) == env.atom(x + a)


def test_shift_shares_storage():
    env = sample_environment(golden_spec(), (-10, 10), 8)
    view = shifted_view(env, 3)
    assert view.source is env.source


def test_constant_environment():
    law = SiteLaw.nearest_neighbor(0.5)
    env = constant_environment(law)
    assert np.allclose(env.probs(np.array([-1000, 0, 7])), law.row())


def test_nearest_neighbor_ratio():
    law = SiteLaw.nearest_neighbor(2.0, stay=0.1)
    assert law[-1] / law[1] == pytest.approx(2.0)
    assert sum(law.probs) == pytest.approx(1.0)
