"""Top Lyapunov exponent, moment Lyapunov function F(u), its Legendre
transform, the slowdown root F(s) = 0 and the regime classifier.

Replica ``r`` of every Monte Carlo estimate uses the environment seeded by
``derive_seed(seed, REPLICA, r)`` on sites ``0 .. n-1``, so estimates with
more replicas extend (never reshuffle) the ones with fewer.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from . import rng
from .env import EnvironmentSpec
from .errors import GridTooNarrow, HeavyTailWarning, NoSlowdownRoot, TooLarge, Unresolved
from .matrix import build_matrix, prefix_log_deltas, top_rows
from .parallel import map_chunks

DEFAULT_U_GRID = tuple(np.round(np.arange(-15, 16) * 0.1, 10))
ENUMERATION_LIMIT = 10**7
EVALUATOR_LIMIT = 2**20
Z_DECISIVE = 3.0


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float = 0.0

    @property
    def z(self) -> float:
        return z_score(self.value, self.std_error)


@dataclass(frozen=True)
class LyapunovEstimate(Estimate):
    n: int = 0
    replicas: int = 1


def z_score(value, se):
    if se > 0:
        return value / se
    if value == 0:
        return 0.0
    return math.copysign(math.inf, value)


def replica_log_deltas(spec: EnvironmentSpec, n: int, replicas: int, seed: int,
                       first: int = 0, workers: int = 1) -> np.ndarray:
    """``log delta(n-1, 0)`` for replicas ``first .. first + replicas - 1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a_table = top_rows(spec.table)
    sites = np.arange(n, dtype=np.int64)

    def chunk(lo, hi):
        seeds = rng.hash64(seed, rng.REPLICA, np.arange(first + lo, first + hi, dtype=np.int64))
        atoms = spec.draw_atoms(seeds[None, :], sites[:, None])  # (n, R)
        return prefix_log_deltas(a_table[atoms])[-1]

    return map_chunks(chunk, replicas, workers, chunk_size=max(1, 2_000_000 // max(n, 1)))


def estimate_gamma(spec: EnvironmentSpec, n: int, replicas: int, seed: int, workers: int = 1) -> LyapunovEstimate:
    """Mean of ``log delta(n-1, 0) / n`` over independent environments."""
    if n < spec.L:
        raise ValueError(f"need n >= L = {spec.L}")
    if replicas < 1:
        raise ValueError("need at least one replica")
    per = replica_log_deltas(spec, n, replicas, seed, workers=workers) / n
    mean = float(per.mean())
    se = float(per.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    return LyapunovEstimate(mean, se, n, replicas)


def log_mean_exp(values: np.ndarray, n: int) -> tuple[float, float, float]:
    """``(1/n) log mean exp(values)``, its delta-method standard error, and the
    largest normalized weight."""
    R = len(values)
    lse = logsumexp(values)
    w = np.exp(values - lse)
    est = (lse - math.log(R)) / n
    if R > 1:
        var = np.sum((R * w - 1.0) ** 2) / (R - 1)
        se = math.sqrt(var / R) / n
    else:
        se = math.inf
    return float(est), float(se), float(w.max())


@dataclass(frozen=True)
class MomentCurve:
    grid: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    n: int
    replicas: int
    method: str

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if np.any(np.diff(grid) <= 0):
            raise ValueError("u grid must be strictly increasing")

    def at(self, u: float) -> Estimate:
        i = int(np.flatnonzero(np.isclose(self.grid, u, atol=1e-12, rtol=0))[0])
        return Estimate(float(self.values[i]), float(self.std_errors[i]))

    def rows(self):
        for u, f, se in zip(self.grid, self.values, self.std_errors):
            yield {"u": float(u), "F_hat": float(f), "std_err": float(se), "method": self.method}

    def to_dict(self):
        return {"n": self.n, "replicas": self.replicas, "method": self.method,
                "points": list(self.rows())}

    @classmethod
    def from_dict(cls, data):
        pts = data["points"]
        return cls(np.array([p["u"] for p in pts]), np.array([p["F_hat"] for p in pts]),
                   np.array([p["std_err"] for p in pts]), int(data["n"]), int(data["replicas"]),
                   data["method"])


def _curve_from_log_deltas(ld, u_grid, n, method):
    grid = np.asarray(sorted(set(float(u) for u in u_grid) | {0.0}))
    vals = np.empty(len(grid))
    ses = np.empty(len(grid))
    for i, u in enumerate(grid):
        if u == 0.0:
            vals[i], ses[i] = 0.0, 0.0
            continue
        est, se, top = log_mean_exp(u * ld, n)
        if top > 0.99:
            warnings.warn(f"F({u:g}) dominated by a single replica (weight {top:.3f}); estimate unreliable",
                          HeavyTailWarning, stacklevel=3)
        vals[i], ses[i] = est, se
    return MomentCurve(grid, vals, ses, n, len(ld), method)


def estimate_F(spec: EnvironmentSpec, u_grid=DEFAULT_U_GRID, n: int = 32, replicas: int = 10_000,
               seed: int = 0, workers: int = 1) -> MomentCurve:
    """Monte Carlo ``F_n(u) = (1/n) log E delta(n-1, 0)^u`` on a grid of ``u``.

    Uses the same replicas for every ``u``; ``F(0)`` is set to 0.
    """
    if n < spec.L:
        raise ValueError(f"need n >= L = {spec.L}")
    if replicas < 2:
        raise ValueError("need at least two replicas")
    ld = replica_log_deltas(spec, n, replicas, seed, workers=workers)
    return _curve_from_log_deltas(ld, u_grid, n, "monte-carlo")


def enumerate_log_deltas(spec: EnvironmentSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """All atom sequences of length ``n``: (log probability, log delta(n-1, 0)).

    Plain dense products without renormalization, independent of the
    accumulator used by the Monte Carlo path.
    """
    keep = [i for i, w in enumerate(spec.weights) if w > 0]
    m = len(keep)
    if m ** n > ENUMERATION_LIMIT:
        raise TooLarge(f"{m}^{n} sequences exceed {ENUMERATION_LIMIT}")
    mats = [build_matrix(spec.laws[i]).dense() for i in keep]
    logw = np.log(spec.weights[keep])
    L = spec.L
    vecs = np.zeros((1, L))
    vecs[0, 0] = 1.0
    lp = np.zeros(1)
    for _ in range(n):
        vecs = np.concatenate([vecs @ A.T for A in mats])
        lp = np.concatenate([lp + lw for lw in logw])
    with np.errstate(divide="ignore"):
        return lp, np.log(vecs[:, 0])


def exact_F_enumeration(spec: EnvironmentSpec, u, n: int):
    """Exact ``(1/n) log E delta(n-1, 0)^u`` by exhaustive enumeration."""
    lp, ld = enumerate_log_deltas(spec, n)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.array([logsumexp(lp + x * ld) / n if x != 0 else 0.0 for x in us])
    return float(out[0]) if np.ndim(u) == 0 else out


def exact_curve(spec: EnvironmentSpec, u_grid=DEFAULT_U_GRID, n: int = 1) -> MomentCurve:
    lp, ld = enumerate_log_deltas(spec, n)
    grid = np.asarray(sorted(set(float(u) for u in u_grid) | {0.0}))
    vals = np.array([logsumexp(lp + u * ld) / n if u != 0 else 0.0 for u in grid])
    return MomentCurve(grid, vals, np.zeros(len(grid)), n, 0, "exact-enumeration")


# evaluators: callable(u, replicas) -> Estimate

def exact_evaluator(spec: EnvironmentSpec, n: int | None = None, differenced: bool | None = None):
    """Exact evaluator of F by enumeration.

    For L = 1 the finite-n value is already the limit (i.i.d. scalar
    factors), so ``n`` defaults to 1.  For L >= 2 the default is the
    increment ``log E delta_n^u - log E delta_{n-1}^u``, which converges to
    F much faster than the ratio with ``1/n``.
    """
    m = int(np.sum(spec.weights > 0))
    if n is None:
        n = 1 if spec.L == 1 else max(2, int(math.log(EVALUATOR_LIMIT) / math.log(max(m, 2))))
    if differenced is None:
        differenced = spec.L > 1
    lp_n, ld_n = enumerate_log_deltas(spec, n)
    if differenced:
        lp_p, ld_p = enumerate_log_deltas(spec, n - 1)

    def evaluate(u, replicas=None):
        if u == 0:
            return Estimate(0.0, 0.0)
        top = logsumexp(lp_n + u * ld_n)
        if differenced:
            return Estimate(float(top - logsumexp(lp_p + u * ld_p)), 0.0)
        return Estimate(float(top / n), 0.0)

    evaluate.method = "exact-enumeration"
    evaluate.n = n
    return evaluate


class MonteCarloEvaluator:
    """Monte Carlo F_n(u); replica log-deltas are cached and extended on demand."""

    method = "monte-carlo"

    def __init__(self, spec: EnvironmentSpec, n: int, seed: int, workers: int = 1):
        self.spec, self.n, self.seed, self.workers = spec, n, seed, workers
        self._ld = np.empty(0)

    def log_deltas(self, replicas: int) -> np.ndarray:
        have = len(self._ld)
        if replicas > have:
            more = replica_log_deltas(self.spec, self.n, replicas - have, self.seed, first=have,
                                      workers=self.workers)
            self._ld = np.concatenate([self._ld, more])
        return self._ld[:replicas]

    def __call__(self, u, replicas=1000):
        if u == 0:
            return Estimate(0.0, 0.0)
        est, se, _ = log_mean_exp(u * self.log_deltas(replicas), self.n)
        return Estimate(est, se)


@dataclass
class RootResult:
    s: float
    side: str
    tolerance: float
    replicas_used: int
    evaluations: int
    method: str = ""

    def as_dict(self):
        return dict(s=self.s, side=self.side, tolerance=self.tolerance,
                    replicas_used=self.replicas_used, evaluations=self.evaluations, method=self.method)


def find_root_s(evaluator: Callable, side: str = "positive", *, gamma: Estimate | None = None,
                tol: float = 1e-6, replicas: int = 1000, budget: int = 10**7) -> RootResult:
    """Bisection for the nonzero root of F on ``(0, 1)`` or ``(-1, 0)``.

    Every sign is decided at 3 standard errors; Monte Carlo evaluators get
    their replica count multiplied by 4 until the sign resolves, within a
    total budget of replica evaluations.
    """
    if side not in ("positive", "negative"):
        raise ValueError(f"side must be 'positive' or 'negative', got {side!r}")
    sgn = 1.0 if side == "positive" else -1.0
    spent = 0
    evals = 0

    def sign_at(u):
        nonlocal spent, evals
        R = replicas
        while True:
            est = evaluator(u, R)
            spent += R
            evals += 1
            if est.std_error == 0 or abs(est.value) >= Z_DECISIVE * est.std_error:
                return (est.value > 0) - (est.value < 0)
            R *= 4
            if spent + R > budget:
                raise Unresolved(f"sign of F({u:.6g}) unresolved within {budget} replica evaluations")

    if gamma is not None:
        wrong = gamma.value * sgn >= 0 or abs(gamma.z) < Z_DECISIVE
        if wrong:
            want = "< 0" if side == "positive" else "> 0"
            raise NoSlowdownRoot(f"need gamma_L {want}, got {gamma.value:.6g} (z = {gamma.z:.3g})")
    end = sgn * 1.0
    if sign_at(end) <= 0:
        raise NoSlowdownRoot(f"F({end:+g}) <= 0: no slowdown root on the {side} side")
    inner = None
    u = 0.5
    while u > 2**-20:
        sg = sign_at(sgn * u)
        if sg == 0:
            return RootResult(sgn * u, side, tol, spent, evals, getattr(evaluator, "method", ""))
        if sg < 0:
            inner = sgn * u
            break
        u /= 2
    if inner is None:
        raise NoSlowdownRoot(f"F does not go negative on the {side} side near 0")
    # invariant: F(neg) < 0 < F(pos)
    neg, pos = inner, end
    while abs(pos - neg) > 2 * tol:
        mid = 0.5 * (neg + pos)
        sg = sign_at(mid)
        if sg == 0:
            neg = pos = mid
            break
        if sg < 0:
            neg = mid
        else:
            pos = mid
    return RootResult(0.5 * (neg + pos), side, tol, spent, evals, getattr(evaluator, "method", ""))


def convex_minorant(u: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Greatest convex minorant of the points ``(u_i, f_i)``, evaluated at ``u``."""
    hull = []
    for i in range(len(u)):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            # drop k if it lies on or above the chord j -> i
            if (f[k] - f[j]) * (u[i] - u[j]) >= (f[i] - f[j]) * (u[k] - u[j]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(u, u[hull], f[hull])


@dataclass(frozen=True)
class RateFunction:
    curve: MomentCurve
    x: np.ndarray
    I: np.ndarray
    argmax_u: np.ndarray
    repaired: np.ndarray = field(repr=False)

    def rows(self):
        for x, i, u in zip(self.x, self.I, self.argmax_u):
            yield {"x": float(x), "I": float(i), "argmax_u": float(u)}

    def __call__(self, x):
        return np.interp(x, self.x, self.I)


def legendre_rate(curve: MomentCurve, x_grid, on_boundary: str = "raise") -> RateFunction:
    """``I(x) = max_u (u x - F(u))`` over the curve's grid after convex repair.

    When the maximizer for some ``x`` sits on the first or last grid point the
    supremum over all real ``u`` is not captured: ``on_boundary='raise'``
    raises :class:`GridTooNarrow`, ``'drop'`` omits those ``x``.
    """
    u = np.asarray(curve.grid, dtype=float)
    if len(u) < 5 or not (u[0] < 0 < u[-1]):
        raise GridTooNarrow("curve needs >= 5 points on an interval containing 0")
    f = convex_minorant(u, np.asarray(curve.values, dtype=float))
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    vals = xs[:, None] * u[None, :] - f[None, :]
    best = vals.max(axis=1)
    tied = vals >= best[:, None] - 1e-12 * (1.0 + np.abs(best[:, None]))
    # among ties prefer the maximizer closest to u = 0
    pick = np.where(tied, np.abs(u)[None, :], np.inf).argmin(axis=1)
    at_edge = (pick == 0) | (pick == len(u) - 1)
    if at_edge.any():
        if on_boundary == "raise":
            raise GridTooNarrow(f"supremum at grid edge for x = {xs[at_edge].tolist()}")
        keep = ~at_edge
        xs, best, pick = xs[keep], best[keep], pick[keep]
    return RateFunction(curve, xs, np.maximum(best, 0.0), u[pick], f)


class RegimeKind(enum.Enum):
    TransientRightPositiveSpeed = "TransientRightPositiveSpeed"
    TransientRightZeroSpeed = "TransientRightZeroSpeed"
    TransientLeftNegativeSpeed = "TransientLeftNegativeSpeed"
    TransientLeftZeroSpeed = "TransientLeftZeroSpeed"
    Recurrent = "Recurrent"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    gamma: Estimate
    F1: Estimate
    Fm1: Estimate
    inconclusive: tuple[str, ...] = ()

    @property
    def slowdown(self) -> bool:
        return self.kind in (RegimeKind.TransientRightZeroSpeed, RegimeKind.TransientLeftZeroSpeed)

    def as_dict(self):
        def est(e):
            return {"value": e.value, "std_error": e.std_error, "z": e.z}
        return {"regime": self.kind.value, "gamma": est(self.gamma), "F1": est(self.F1),
                "Fm1": est(self.Fm1), "inconclusive": list(self.inconclusive)}


def _as_estimate(e):
    if isinstance(e, Estimate):
        return e
    value, se = e
    return Estimate(float(value), float(se))


def classify_regime(gamma, F1, Fm1) -> Regime:
    """Transience direction from the sign of gamma, speed from the sign of F(+-1)."""
    gamma, F1, Fm1 = _as_estimate(gamma), _as_estimate(F1), _as_estimate(Fm1)
    flags = []
    if abs(gamma.z) < Z_DECISIVE:
        return Regime(RegimeKind.Recurrent, gamma, F1, Fm1, ("gamma",))
    K = RegimeKind
    if gamma.value < 0:
        kind = K.TransientRightPositiveSpeed if F1.value < 0 else K.TransientRightZeroSpeed
        if abs(F1.z) < Z_DECISIVE:
            flags.append("F1")
    else:
        kind = K.TransientLeftNegativeSpeed if Fm1.value < 0 else K.TransientLeftZeroSpeed
        if abs(Fm1.z) < Z_DECISIVE:
            flags.append("Fm1")
    return Regime(kind, gamma, F1, Fm1, tuple(flags))


@dataclass(frozen=True)
class Characterization:
    gamma: LyapunovEstimate
    F1: Estimate
    Fm1: Estimate
    regime: Regime
    method: str

    def as_dict(self):
        d = self.regime.as_dict()
        d["gamma_n"] = self.gamma.n
        d["gamma_replicas"] = self.gamma.replicas
        d["F_method"] = self.method
        return d


def characterize(spec: EnvironmentSpec, seed: int, *, gamma_n: int = 1000, gamma_replicas: int = 64,
                 F_n: int = 32, F_replicas: int = 100_000, workers: int = 1) -> Characterization:
    """Estimate gamma_L and F(+-1) and classify the regime.

    F(+-1) is exact when the enumeration evaluator applies (L = 1), Monte
    Carlo otherwise.
    """
    gamma = estimate_gamma(spec, gamma_n, gamma_replicas, rng.derive_seed(seed, 1), workers=workers)
    if spec.L == 1:
        ev = exact_evaluator(spec)
        F1, Fm1 = ev(1.0), ev(-1.0)
        method = "exact-enumeration"
    else:
        curve = estimate_F(spec, (-1.0, 1.0), F_n, F_replicas, rng.derive_seed(seed, 2), workers=workers)
        F1, Fm1 = curve.at(1.0), curve.at(-1.0)
        method = "monte-carlo"
    return Characterization(gamma, F1, Fm1, classify_regime(gamma, F1, Fm1), method)


def slowdown_evaluator(spec: EnvironmentSpec, seed: int, n: int = 32, workers: int = 1):
    """Exact evaluator when enumeration is feasible and exact, Monte Carlo otherwise."""
    if spec.L == 1:
        return exact_evaluator(spec)
    try:
        return exact_evaluator(spec)
    except TooLarge:
        return MonteCarloEvaluator(spec, n, seed, workers)
