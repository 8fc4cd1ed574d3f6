"""Acceptance criteria 1-10, one PASS/FAIL line each at the stated tolerances.

Criteria 8 and 9 run at full scale and take a few minutes.  Criterion 10
reruns 3-9 with three workers and compares the report files byte for byte.
"""

import math
import time

import numpy as np
import pytest

from rwre import rng
from rwre.env import EnvironmentSpec, SiteLaw, constant_environment, sample_environment
from rwre.exit import (exit_prob_closed, exit_probs_closed, exit_probs_linear, iterate_survival, trap_quantities)
from rwre.lyapunov import (RegimeKind, characterize, estimate_F, estimate_gamma, exact_evaluator,
                           exact_F_enumeration, find_root_s, legendre_rate)
from rwre.reports import write_report
from rwre.slowdown import DEFAULT_N_GRID, slowdown_curve, trap_frequency_scan

from conftest import GOLDEN_S, golden_spec, pointmass_l2_spec, positive_speed_spec, two_atom_l2_spec, unit_rho_spec

LOG_LAMBDA = math.log((0.6 + math.sqrt(0.6**2 + 4 * 0.2)) / 2)
RUNTIME = {1: 10, 2: 30, 3: 5, 4: 30, 5: 60, 6: 300, 7: 60, 8: 600, 9: 900}
SEEDS = {3: 7, 4: 21, 5: 5, 6: 6, 7: 1, 8: 12, 9: 11}

# (criterion, workers) -> (result dict, seconds)
_RUNS = {}


def random_spec(L, rs, atoms=3, kappa=0.01):
    laws = []
    for _ in range(atoms):
        w = rs.uniform(0.2, 1.0, L + 2)
        w[L] = rs.uniform(0.0, 1.0)
        laws.append((SiteLaw(L, tuple(w / w.sum())), 1 / atoms))
    return EnvironmentSpec(L, kappa, tuple(laws))


def random_l1_spec(rs):
    rhos = np.exp(rs.uniform(-1.5, 1.5, 3))
    stay = rs.uniform(0, 0.5)
    return EnvironmentSpec.nearest_neighbor(list(rhos), kappa=0.01, stay=stay)


def _window(rs, max_sites=200):
    sites = int(rs.integers(1, max_sites + 1))
    a = int(rs.integers(-100, 0))
    return a, a + sites + 1


def crit1():
    worst = 0.0
    for i in range(100):
        rs = np.random.default_rng(1000 + i)
        a, b = _window(rs)
        env = sample_environment(random_l1_spec(rs), (a, b), i)
        minus, _ = exit_probs_linear(env, a, b)
        closed = exit_probs_closed(env, a, b)
        worst = max(worst, float(np.max(np.abs(closed - minus))))
    sym = constant_environment(SiteLaw.nearest_neighbor(1.0))
    exact = all(exit_prob_closed(sym, 1, 0, M + 1) == M / (M + 1) for M in range(1, 201))
    return {"max_abs_discrepancy": worst, "symmetric_exact": exact}


def crit2():
    worst, checks = 0.0, True
    per_L = {2: 0.0, 3: 0.0}
    for i in range(100):
        rs = np.random.default_rng(2000 + i)
        L = 2 + i % 2
        a, b = _window(rs)
        env = sample_environment(random_spec(L, rs), (a - L, b), i)
        minus, plus = exit_probs_linear(env, a, b)
        closed = exit_probs_closed(env, a, b)
        d = float(np.max(np.abs(closed - minus)))
        per_L[L] = max(per_L[L], d)
        worst = max(worst, d)
        checks &= bool(np.all((minus >= 0) & (minus <= 1)) and np.all(np.diff(minus) <= 0)
                       and np.max(np.abs(minus + plus - 1)) <= 1e-12)
    return {"max_abs_discrepancy": worst, "by_L": {str(k): v for k, v in per_L.items()}, "self_checks": checks}


def crit3(workers):
    spec = golden_spec()
    char = characterize(spec, SEEDS[3], workers=workers)
    root = find_root_s(exact_evaluator(spec), "positive", gamma=char.gamma)
    return {"s": root.s, "method": root.method, "regime": char.regime.kind.value}


def crit4(workers):
    a = estimate_gamma(pointmass_l2_spec(), 10_000, 4, SEEDS[4], workers=workers)
    b = estimate_gamma(golden_spec(), 1000, 200, SEEDS[4], workers=workers)
    return {"pointmass": {"value": a.value, "std_error": a.std_error},
            "golden": {"value": b.value, "std_error": b.std_error}}


def crit5(workers):
    spec = two_atom_l2_spec()
    us = (-1.0, -0.5, 0.5, 1.0)
    curve = estimate_F(spec, us, n=12, replicas=50_000, seed=SEEDS[5], workers=workers)
    exact = exact_F_enumeration(spec, np.array(us), 12)
    full = estimate_F(spec, n=12, replicas=20_000, seed=SEEDS[5] + 1, workers=workers)
    rate = legendre_rate(full, [0.0], on_boundary="drop")
    return {"points": [{"u": u, "F_hat": curve.at(u).value, "std_err": curve.at(u).std_error, "exact": float(e)}
                       for u, e in zip(us, exact)],
            "F0": curve.at(0.0).value, "F0_se": curve.at(0.0).std_error,
            "repaired_min_second_difference": float(np.min(np.diff(rate.repaired, 2)))}


def crit6(workers):
    spec = golden_spec()
    M = N = 50
    n = 1000
    L = spec.L
    envs = [sample_environment(spec, (-N - L - 1, M + 1), rng.derive_seed(SEEDS[6], i)) for i in range(500)]
    b6 = b7 = b5 = 0
    gammas = []
    for env in envs:
        tq = trap_quantities(env, N, M)
        gammas.append(tq.gamma_U)
        _, plus = exit_probs_linear(env, 0, M + 1)
        # P_1(left first) >= (1 - e^{-M R})_+ checked as P_1(right first) <= min(1, e^{-M R})
        b6 += plus[0] <= math.exp(min(0.0, -M * tq.R_plus))
        minus, _ = exit_probs_linear(env, -(N + 1), 0)
        b7 += all(minus[N - k] <= math.exp(min(0.0, N * tq.R_minus)) for k in range(1, L + 1))
    P = np.stack([e.probs_range(-N, M) for e in envs])
    surv = iterate_survival(P, N, n)
    b5 = int(np.sum(surv >= (1.0 - np.array(gammas)) ** n))
    g = estimate_gamma(spec, 1000, 200, SEEDS[6], workers=workers)
    curve = estimate_F(spec, (-1.0, 1.0), n=32, replicas=100_000, seed=SEEDS[6] + 1, workers=workers)
    F1, Fm1 = curve.at(1.0), curve.at(-1.0)
    jensen1 = g.value <= F1.value + 3 * math.hypot(g.std_error, F1.std_error)
    jensen2 = Fm1.value >= -F1.value - 3 * math.hypot(F1.std_error, Fm1.std_error)
    return {"envs": 500, "bound6_held": int(b6), "bound7_held": int(b7), "bound5_held": b5,
            "gamma": g.value, "F1": F1.value, "Fm1": Fm1.value, "jensen_gamma_F1": jensen1,
            "jensen_Fm1_F1": jensen2}


def crit7(workers):
    out = {}
    for name, spec_fn in (("golden", golden_spec), ("positive_speed", positive_speed_spec),
                          ("unit_rho", unit_rho_spec)):
        out[name] = characterize(spec_fn(), SEEDS[7], workers=workers).as_dict()
    return out


def crit8(workers):
    rep = slowdown_curve(golden_spec(), (0.9, 1.0), DEFAULT_N_GRID, walkers=2000, seed=SEEDS[8],
                         workers=workers)
    return rep.to_dict() | {"_report": rep}


def crit9(workers):
    rep = trap_frequency_scan(golden_spec(), DEFAULT_N_GRID, "auto", 2000, SEEDS[9], workers=workers)
    return rep.to_dict() | {"in_band": rep.in_band}


CRITERIA = {1: crit1, 2: crit2, 3: crit3, 4: crit4, 5: crit5, 6: crit6, 7: crit7, 8: crit8, 9: crit9}


def run_criterion(n, workers=1):
    key = (n, workers)
    if key not in _RUNS:
        t0 = time.perf_counter()
        res = CRITERIA[n](workers) if n >= 3 else CRITERIA[n]()
        _RUNS[key] = (res, time.perf_counter() - t0)
    return _RUNS[key]


def _time_note(n, secs):
    return f"[{secs:.1f}s / limit {RUNTIME[n]}s]"


def test_criterion_1(acceptance_log):
    res, secs = run_criterion(1)
    ok = res["max_abs_discrepancy"] <= 1e-12 and res["symmetric_exact"] and secs < RUNTIME[1]
    acceptance_log(1, ok, f"L=1 closed vs linear max |diff| = {res['max_abs_discrepancy']:.2e} (<= 1e-12), "
                          f"symmetric M/(M+1) exact: {res['symmetric_exact']} {_time_note(1, secs)}")
    assert ok


def test_criterion_2(acceptance_log):
    res, secs = run_criterion(2)
    ok = res["self_checks"] and secs < RUNTIME[2]
    acceptance_log(2, ok, f"L=2,3 linear self-checks: {res['self_checks']}; closed vs linear max |diff| "
                          f"L=2 {res['by_L']['2']:.2e}, L=3 {res['by_L']['3']:.2e} (reported) "
                          f"{_time_note(2, secs)}")
    assert ok


def test_criterion_3(acceptance_log):
    res, secs = run_criterion(3)
    err = abs(res["s"] - GOLDEN_S)
    ok = err <= 1e-4 and res["method"] == "exact-enumeration" and secs < RUNTIME[3]
    acceptance_log(3, ok, f"s = {res['s']:.7f}, |s - log2(phi)| = {err:.1e} (<= 1e-4) {_time_note(3, secs)}")
    assert ok


def test_criterion_4(acceptance_log):
    res, secs = run_criterion(4)
    pm, gd = res["pointmass"], res["golden"]
    err_a = abs(pm["value"] - LOG_LAMBDA)
    z_b = abs(gd["value"] + 0.5 * math.log(2)) / gd["std_error"]
    ok = err_a <= 1e-3 and z_b <= 3 and secs < RUNTIME[4]
    acceptance_log(4, ok, f"(a) gamma = {pm['value']:.6f} vs {LOG_LAMBDA:.6f}, |diff| = {err_a:.1e} (<= 1e-3); "
                          f"(b) gamma = {gd['value']:.5f} +- {gd['std_error']:.5f}, |z| = {z_b:.2f} (<= 3) "
                          f"{_time_note(4, secs)}")
    assert ok


def test_criterion_5(acceptance_log):
    res, secs = run_criterion(5)
    zs = [abs(p["F_hat"] - p["exact"]) / p["std_err"] for p in res["points"]]
    convex = res["repaired_min_second_difference"] >= -1e-12
    ok = max(zs) <= 3 and res["F0"] == 0.0 and res["F0_se"] == 0.0 and convex and secs < RUNTIME[5]
    acceptance_log(5, ok, f"max |F_hat - F_exact| / SE = {max(zs):.2f} (<= 3), F(0) = {res['F0']}, "
                          f"repaired convex: {convex} {_time_note(5, secs)}")
    assert ok


def test_criterion_6(acceptance_log):
    res, secs = run_criterion(6)
    E = res["envs"]
    ok = (res["bound6_held"] == E and res["bound7_held"] == E and res["bound5_held"] == E
          and res["jensen_gamma_F1"] and res["jensen_Fm1_F1"] and secs < RUNTIME[6])
    acceptance_log(6, ok, f"return bound right {res['bound6_held']}/{E}, left {res['bound7_held']}/{E}, "
                          f"survival bound {res['bound5_held']}/{E}, Jensen {res['jensen_gamma_F1']}/"
                          f"{res['jensen_Fm1_F1']} {_time_note(6, secs)}")
    assert ok


def test_criterion_7(acceptance_log):
    res, secs = run_criterion(7)
    g, p, u = res["golden"], res["positive_speed"], res["unit_rho"]
    ok = (g["regime"] == RegimeKind.TransientRightZeroSpeed.value
          and p["regime"] == RegimeKind.TransientRightPositiveSpeed.value
          and u["regime"] == RegimeKind.Recurrent.value
          and min(abs(g["gamma"]["z"]), abs(g["F1"]["z"]), abs(p["gamma"]["z"]), abs(p["F1"]["z"])) >= 3
          and abs(u["gamma"]["z"]) < 3 and secs < RUNTIME[7])
    acceptance_log(7, ok, f"golden -> {g['regime']}, 1/9,1/3 -> {p['regime']}, rho=1 -> {u['regime']}; "
                          f"decisive |z| >= {min(abs(g['gamma']['z']), abs(p['gamma']['z'])):.1f} "
                          f"{_time_note(7, secs)}")
    assert ok


@pytest.mark.slow
def test_criterion_8(acceptance_log):
    res, secs = run_criterion(8)
    rep = res["_report"]
    med = rep.series(0.9)
    se = rep.series(0.9, "median_se")
    steps = [b < a + 2 * math.hypot(sa, sb) for a, b, sa, sb in zip(med, med[1:], se, se[1:])]
    speed = rep.median[(DEFAULT_N_GRID[-1], 1.0)]
    ok = all(steps) and med[-1] < 0.5 * med[0] and speed < 0.05 and secs < RUNTIME[8]
    acceptance_log(8, ok, f"median X_n/n^0.9 {med[0]:.4f} -> {med[-1]:.4f} (ratio {med[-1] / med[0]:.3f} < 0.5), "
                          f"decreasing with 2SE slack: {all(steps)}; median X_n/n at 2^16 = {speed:.4f} (< 0.05) "
                          f"{_time_note(8, secs)}")
    assert ok


@pytest.mark.slow
def test_criterion_9(acceptance_log):
    res, secs = run_criterion(9)
    lo, hi = res["target_band"]
    flagged = "slope_outside_band" in res["flags"]
    # soft diagnostic: a slope outside the band must show up as a flag
    honest = flagged == (not res["in_band"])
    ok = res["in_band"] and honest and secs < RUNTIME[9]
    acceptance_log(9, ok, f"slope = {res['slope']:.3f} +- {res['slope_se']:.3f}, band [{lo:.3f}, {hi:.3f}], "
                          f"K = {res['K']:g}, q_hat = {[round(q, 4) for q in res['q_hat']]}, flags = {res['flags']} "
                          f"{_time_note(9, secs)}")
    assert honest
    assert ok


@pytest.mark.slow
def test_criterion_10(acceptance_log, tmp_path):
    same, differ = [], []
    for n in range(3, 10):
        paths = []
        for workers in (1, 3):
            res, _ = run_criterion(n, workers)
            res = {k: v for k, v in res.items() if not k.startswith("_")}
            out = tmp_path / f"w{workers}"
            write_report(out, f"criterion_{n}", {"criterion": n, "seed": SEEDS[n]}, res)
            paths.append(out / f"criterion_{n}.json")
        (same if paths[0].read_bytes() == paths[1].read_bytes() else differ).append(n)
    ok = not differ
    acceptance_log(10, ok, f"reports byte-identical across workers 1 vs 3 for criteria {same}"
                           + (f"; differ: {differ}" if differ else ""))
    assert ok
