"""Slowdown experiments: trap frequencies, X_n / n^{s'} curves and annealed tails."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .env import EnvironmentSpec
from .errors import AllZeroWarning, RegimeMismatch
from .exit import iterate_survival
from .lyapunov import Characterization, RegimeKind, characterize, find_root_s, slowdown_evaluator
from .parallel import map_chunks
from .walk import batch_final_positions

TRAP_THRESHOLD = math.exp(-2)
DEFAULT_N_GRID = tuple(2**k for k in range(10, 17))
MIN_SUCCESSES = 10


def _side(char: Characterization):
    kind = char.regime.kind
    if kind is RegimeKind.TransientRightZeroSpeed:
        return "positive"
    if kind is RegimeKind.TransientLeftZeroSpeed:
        return "negative"
    raise RegimeMismatch(f"spec is in regime {kind.value}, not a slowdown regime")


def slowdown_exponent(spec: EnvironmentSpec, seed: int, char: Characterization | None = None) -> float:
    char = char or characterize(spec, seed)
    return find_root_s(slowdown_evaluator(spec, seed), _side(char), gamma=char.gamma).s


def binomial_se(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass
class TrapScanReport:
    n_grid: list[int]
    K: float
    half_widths: list[int]
    env_samples: int
    threshold: float
    successes: list[int]
    q_hat: list[float]
    std_err: list[float]
    slope: float | None
    slope_se: float | None
    slope_band: tuple[float, float] | None
    s: float | None
    target_band: tuple[float, float] | None
    flags: list[str]
    seed: int
    gamma: float | None = None

    @property
    def in_band(self) -> bool:
        return (self.slope is not None and self.target_band is not None
                and self.target_band[0] <= self.slope <= self.target_band[1])

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["in_band"] = self.in_band
        return d

    def rows(self):
        for n, q, se in zip(self.n_grid, self.q_hat, self.std_err):
            yield {"n": n, "s_prime": "", "statistic": "q_hat", "value": q, "std_err": se}


def fit_loglog(n_grid, q_hat, successes, min_successes=MIN_SUCCESSES):
    """Least-squares slope of log q against log n over well-populated points."""
    pts = [(math.log(n), math.log(q)) for n, q, k in zip(n_grid, q_hat, successes) if k >= min_successes]
    if len(pts) < 2:
        return None, None
    x, y = np.array(pts).T
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    if len(pts) < 3:
        return slope, None
    resid = y - A @ coef
    sigma2 = float(resid @ resid) / (len(pts) - 2)
    se = math.sqrt(sigma2 / float(((x - x.mean()) ** 2).sum()))
    return slope, se


def trap_frequency_scan(spec: EnvironmentSpec, n_grid=DEFAULT_N_GRID, K="auto", env_samples: int = 2000,
                        seed: int = 0, *, s: float | None = None, char: Characterization | None = None,
                        check_regime: bool = True, workers: int = 1) -> TrapScanReport:
    """Fraction of environments where the walk from 0 stays in ``[-m, m]``,
    ``m = ceil(K log n)``, for ``n`` steps with probability at least ``e^-2``.

    ``K='auto'`` uses ``ceil(2 / |gamma_L|)``.  A log-log slope of the
    fractions against ``n`` is fitted over points with at least 10 trapping
    environments and compared with ``[-1.5 |s|, -0.5 |s|]``.
    """
    if env_samples < 100:
        raise ValueError("env_samples must be >= 100")
    gamma = None
    if check_regime or K == "auto" or s is None:
        char = char or characterize(spec, seed, workers=workers)
        gamma = char.gamma.value
        if check_regime:
            side = _side(char)
            if s is None:
                s = find_root_s(slowdown_evaluator(spec, seed), side, gamma=char.gamma).s
    if K == "auto":
        K = float(math.ceil(2.0 / abs(gamma)))
    K = float(K)
    table = spec.table
    half_widths, succ, qs, ses = [], [], [], []
    for n in n_grid:
        m = int(math.ceil(K * math.log(n)))
        sites = np.arange(-m, m + 1, dtype=np.int64)

        def chunk(lo, hi, n=n, sites=sites, m=m):
            keys = rng.hash64(seed, rng.TRAP, n, np.arange(lo, hi, dtype=np.int64))
            P = table[spec.draw_atoms(keys[:, None], sites[None, :])]
            surv = iterate_survival(P, m, n, stop_below=TRAP_THRESHOLD, check_every=8)
            return (surv >= TRAP_THRESHOLD).astype(np.int64)

        hits = map_chunks(chunk, env_samples, workers, chunk_size=500)
        k = int(hits.sum())
        q = k / env_samples
        half_widths.append(m)
        succ.append(k)
        qs.append(q)
        ses.append(binomial_se(q, env_samples))
    flags = []
    if not any(succ):
        flags.append("all_zero")
        warnings.warn("no trapping environment at any n; K may be too small", AllZeroWarning, stacklevel=2)
    if any(b > a for a, b in zip(qs, qs[1:])):
        flags.append("non_monotone")
    slope, slope_se = fit_loglog(n_grid, qs, succ)
    band = None if slope_se is None else (slope - 2 * slope_se, slope + 2 * slope_se)
    target = None
    if s is not None:
        target = (-1.5 * abs(s), -0.5 * abs(s))
    if slope is None:
        flags.append("insufficient_points")
    elif target is not None and not target[0] <= slope <= target[1]:
        flags.append("slope_outside_band")
    return TrapScanReport(list(n_grid), K, half_widths, env_samples, TRAP_THRESHOLD, succ, qs, ses,
                          slope, slope_se, band, s, target, flags, int(seed), gamma)


@dataclass
class SlowdownReport:
    spec: dict
    s: float | None
    sign: int
    s_prime_grid: list[float]
    n_grid: list[int]
    walkers: int
    seed: int
    # keyed by (n, s_prime)
    median: dict = field(default_factory=dict)
    upper_quartile: dict = field(default_factory=dict)
    median_se: dict = field(default_factory=dict)
    median_ci: dict = field(default_factory=dict)

    def series(self, s_prime, what="median"):
        table = getattr(self, what)
        return [table[(n, s_prime)] for n in self.n_grid]

    def to_dict(self):
        pts = []
        for n in self.n_grid:
            for sp in self.s_prime_grid:
                key = (n, sp)
                pts.append({"n": n, "s_prime": sp, "median": self.median[key],
                            "upper_quartile": self.upper_quartile[key], "median_se": self.median_se[key],
                            "median_ci": list(self.median_ci[key])})
        return {"spec": self.spec, "s": self.s, "sign": self.sign, "s_prime_grid": self.s_prime_grid,
                "n_grid": self.n_grid, "walkers": self.walkers, "seed": self.seed, "points": pts}

    def rows(self):
        for n in self.n_grid:
            for sp in self.s_prime_grid:
                key = (n, sp)
                yield {"n": n, "s_prime": sp, "statistic": "median", "value": self.median[key],
                       "std_err": self.median_se[key]}
                yield {"n": n, "s_prime": sp, "statistic": "upper_quartile",
                       "value": self.upper_quartile[key], "std_err": ""}


def bootstrap_medians(values: np.ndarray, reps: int, seed: int) -> np.ndarray:
    gen = np.random.Generator(np.random.PCG64(seed))
    idx = gen.integers(0, len(values), size=(reps, len(values)))
    return np.median(values[idx], axis=1)


def slowdown_curve(spec: EnvironmentSpec, s_prime_grid, n_grid=DEFAULT_N_GRID, walkers: int = 2000,
                   seed: int = 0, *, char: Characterization | None = None, check_regime: bool = True,
                   bootstrap: int = 200, workers: int = 1) -> SlowdownReport:
    """Quantiles of ``X_n / n^{s'}`` over annealed walkers, for each ``n`` and ``s'``.

    In the leftward regime the statistic is ``-X_n / n^{s'}``.
    """
    if walkers < 1000 and check_regime:
        raise ValueError("slowdown curves need >= 1000 walkers per n")
    sign, s = 1, None
    if check_regime:
        char = char or characterize(spec, seed, workers=workers)
        side = _side(char)
        sign = 1 if side == "positive" else -1
        s = find_root_s(slowdown_evaluator(spec, seed), side, gamma=char.gamma).s
    s_prime_grid = [float(x) for x in s_prime_grid]
    rep = SlowdownReport(spec.to_dict(), s, sign, s_prime_grid, [int(n) for n in n_grid], walkers, int(seed))
    for n in rep.n_grid:
        res = batch_final_positions(spec, n, walkers, rng.derive_seed(seed, n), workers=workers)
        stat = sign * res.final.astype(np.float64)
        med = float(np.median(stat))
        q75 = float(np.quantile(stat, 0.75))
        boots = bootstrap_medians(stat, bootstrap, rng.derive_seed(seed, rng.BOOTSTRAP, n))
        se = float(boots.std(ddof=1))
        lo, hi = (float(v) for v in np.quantile(boots, [0.025, 0.975]))
        for sp in s_prime_grid:
            scale = float(n) ** sp
            key = (n, sp)
            rep.median[key] = med / scale
            rep.upper_quartile[key] = q75 / scale
            rep.median_se[key] = se / scale
            rep.median_ci[key] = (lo / scale, hi / scale)
    return rep


@dataclass(frozen=True)
class TailEstimate:
    n: int
    s_prime: float
    walkers: int
    exceed: int
    p: float
    std_err: float

    def as_dict(self):
        return dict(n=self.n, s_prime=self.s_prime, walkers=self.walkers, exceed=self.exceed,
                    p=self.p, std_err=self.std_err)


def annealed_tail(spec: EnvironmentSpec, n: int, s_prime: float, walkers: int, seed: int,
                  sign: int = 1, workers: int = 1) -> TailEstimate:
    """Binomial estimate of ``P_0(sign * X_n > n^{s'})`` under the annealed law."""
    res = batch_final_positions(spec, n, walkers, rng.derive_seed(seed, n), workers=workers)
    k = int(np.sum(sign * res.final > float(n) ** s_prime))
    p = k / walkers
    return TailEstimate(int(n), float(s_prime), walkers, k, p, binomial_se(p, walkers))
