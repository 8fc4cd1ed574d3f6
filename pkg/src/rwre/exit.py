"""Quenched exit probabilities, trap quantities and exact survival tails."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import EnvironmentWindow
from .errors import NumericalFault, UndefinedDelta, WindowTooLarge
from .matrix import log_delta, log_delta_profile, log_delta_sum

MAX_LINEAR_WINDOW = 10_000
MAX_SURVIVAL_WINDOW = 10_000
MAX_SURVIVAL_STEPS = 10_000_000
MASS_TOL = 1e-12


def _check_order(a, k, b):
    if not a < k < b:
        raise ValueError(f"need a < k < b, got a={a}, k={k}, b={b}")


def exit_prob_closed(env: EnvironmentWindow, k: int, a: int, b: int, direction: str = "minus") -> float:
    """Probability of reaching ``(-inf, a]`` before ``[b, inf)`` from ``k`` (``minus``),
    or its complement (``plus``), from the ratio of delta sums.
    """
    _check_order(a, k, b)
    if direction not in ("minus", "plus"):
        raise ValueError(f"direction must be 'minus' or 'plus', got {direction!r}")
    minus = float(exit_probs_closed(env, a, b)[k - a - 1])
    return minus if direction == "minus" else 1.0 - minus


def exit_probs_closed(env: EnvironmentWindow, a: int, b: int) -> np.ndarray:
    """Minus-side probabilities of :func:`exit_prob_closed` for every start in ``(a, b)``,
    indexed by ``k - a - 1``, from one pass over the delta profile.
    """
    if b - a < 2:
        raise ValueError(f"need b - a >= 2, got a={a}, b={b}")
    prof = log_delta_profile(env, a + 1, b - 1)  # j = a .. b-1
    if np.any(np.isneginf(prof)):
        raise UndefinedDelta(f"some delta(j, {a + 1}) with j < {b} is zero")
    # shifted weights lie in (0, 1]; tail[i] = sum_{j >= a + i} w_j
    w = np.exp(prof - prof.max())
    tail = np.cumsum(w[::-1])[::-1]
    return np.minimum(1.0, tail[1:] / tail[0])


def exit_probs_linear(env: EnvironmentWindow, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Exit-side probabilities for every start in ``(a, b)`` by first-step analysis.

    Returns ``(minus, plus)`` arrays indexed by ``k - a - 1``.  The banded
    system is eliminated from the left without subtractions: after the sites
    below ``x`` are removed, site ``x`` only moves up, stays, or is absorbed
    on the left, so both sides keep full relative accuracy even when one of
    them is tiny.
    """
    if b - a < 2:
        raise ValueError(f"need b - a >= 2, got a={a}, b={b}")
    if b - a > MAX_LINEAR_WINDOW:
        raise WindowTooLarge(f"window b - a = {b - a} exceeds {MAX_LINEAR_WINDOW}")
    P = env.probs_range(a + 1, b - 1)
    L = P.shape[1] - 2
    n = len(P)
    up = P[:, L + 1].astype(float).copy()
    # down[i, z-1]: probability of moving from interior index i to index i - z
    down = P[:, L - 1::-1][:, :L].astype(float).copy()
    left = np.zeros(n)
    for i in range(n):
        for z in range(1, L + 1):
            if i - z < 0:
                left[i] += down[i, z - 1]
                down[i, z - 1] = 0.0
    ratio_up = np.empty(n)
    ratio_left = np.empty(n)
    for x in range(n):
        d = up[x] + left[x]
        if not d > 0:
            raise NumericalFault(f"site {a + 1 + x} cannot leave itself")
        ru, rl = up[x] / d, left[x] / d
        ratio_up[x], ratio_left[x] = ru, rl
        for z in range(1, L + 1):
            y = x + z
            if y >= n:
                break
            q = down[y, z - 1]
            if q == 0.0:
                continue
            down[y, z - 1] = 0.0
            left[y] += q * rl
            # mass sent to x now goes to x + 1, which is y itself when z = 1
            if z > 1:
                down[y, z - 2] += q * ru
    minus = np.empty(n)
    plus = np.empty(n)
    hm, hp = 0.0, 1.0  # values at b
    for x in range(n - 1, -1, -1):
        hm = ratio_left[x] + ratio_up[x] * hm
        hp = ratio_up[x] * hp
        # products of ratios <= 1 keep plus exactly monotone; where minus is the
        # larger side, 1 - plus is correctly rounded and inherits that
        minus[x], plus[x] = (hm if hp > 0.5 else 1.0 - hp), hp
    return minus, plus


def exit_prob_linear(env: EnvironmentWindow, k: int, a: int, b: int, direction: str = "minus") -> float:
    """First-step-analysis oracle for :func:`exit_prob_closed`."""
    _check_order(a, k, b)
    minus, plus = exit_probs_linear(env, a, b)
    return float((minus if direction == "minus" else plus)[k - a - 1])


@dataclass(frozen=True)
class TrapQuantities:
    M: int
    N: int
    R_plus: float
    R_minus: float
    gamma_U: float
    bound6: float
    bound7: float

    def as_dict(self):
        return dict(M=self.M, N=self.N, R_plus=self.R_plus, R_minus=self.R_minus,
                    gamma_U=self.gamma_U, bound6=self.bound6, bound7=self.bound7)


def trap_quantities(env: EnvironmentWindow, N: int, M: int) -> TrapQuantities:
    """Growth rates on both arms of ``U = [-N, M]`` and the escape bound ``gamma(U)``.

    ``R_plus = log delta(M, 1) / M`` and
    ``R_minus = log sum_{j=-L}^{-1} delta(j, -N) / N``.  ``bound6`` and
    ``bound7`` are the lower bounds ``(1 - exp(-M R_plus))_+`` and
    ``(1 - exp(N R_minus))_+`` on returning to 0 from either side.
    """
    L = env.L
    if not M > 1:
        raise ValueError(f"need M > 1, got {M}")
    if not N > L:
        raise ValueError(f"need N > L = {L}, got {N}")
    r_plus = log_delta(env, M, 1) / M
    r_minus = log_delta_sum(env, (-L, -1), -N) / N
    # exponents are clamped at 0 first, so nothing overflows for long arms
    gamma_u = math.exp(min(0.0, max(N * r_minus, -M * r_plus)))
    bound6 = -math.expm1(-M * r_plus) if -M * r_plus < 0 else 0.0
    bound7 = -math.expm1(N * r_minus) if N * r_minus < 0 else 0.0
    return TrapQuantities(M, N, r_plus, r_minus, gamma_u, bound6, bound7)


def _shift_add(out, src, z):
    """``out[..., y] += src[..., y - z]`` wherever both indices are in range."""
    S = src.shape[-1]
    if z >= 0:
        out[..., z:] += src[..., :S - z]
    else:
        out[..., :S + z] += src[..., -z:]


def iterate_survival(P: np.ndarray, start: int, n: int, *, stop_below: float | None = None,
                     check_every: int = 1):
    """Mass left inside the window after ``n`` steps of the walk killed on exit.

    ``P`` holds jump-probability rows over the window, shape ``(S, L + 2)``
    or ``(E, S, L + 2)`` for ``E`` environments at once.  With ``stop_below``
    environments are dropped once their mass falls under the threshold (mass
    never increases, so the comparison with the threshold is already
    decided); their returned value is the mass at the time they were dropped.
    """
    P = np.asarray(P, dtype=np.float64)
    single = P.ndim == 2
    if single:
        P = P[None]
    E, S, width = P.shape
    L = width - 2
    cols = [np.ascontiguousarray(P[:, :, c]) for c in range(width)]
    v = np.zeros((E, S))
    v[:, start] = 1.0
    result = np.ones(E)
    active = np.arange(E)
    prev = np.ones(E)
    for t in range(1, n + 1):
        new = np.zeros_like(v)
        for c in range(width):
            _shift_add(new, v * cols[c], c - L)
        v = new
        if t % check_every == 0 or t == n:
            mass = v.sum(axis=1)
            if np.any(mass > prev + MASS_TOL):
                raise NumericalFault(f"survival mass increased at step {t}")
            prev = mass
            if stop_below is not None:
                done = mass < stop_below
                if done.any():
                    result[active[done]] = mass[done]
                    keep = ~done
                    active, v, prev = active[keep], v[keep], prev[keep]
                    cols = [col[keep] for col in cols]
                    if not len(active):
                        break
    if len(active):
        result[active] = v.sum(axis=1)
    return float(result[0]) if single else result


def survival_exact(env: EnvironmentWindow, U: tuple[int, int], n: int) -> float:
    """``P_{0,omega}(T_U > n)`` for ``U = [-N, M]`` given as ``(-N, M)``."""
    lo, hi = U
    if not lo <= 0 <= hi:
        raise ValueError(f"window {U} must contain the start site 0")
    if hi - lo + 1 > MAX_SURVIVAL_WINDOW:
        raise WindowTooLarge(f"|U| = {hi - lo + 1} exceeds {MAX_SURVIVAL_WINDOW}")
    if n > MAX_SURVIVAL_STEPS:
        raise WindowTooLarge(f"n = {n} exceeds {MAX_SURVIVAL_STEPS}")
    if n == 0:
        return 1.0
    P = env.probs_range(lo, hi)
    return iterate_survival(P, -lo, n)
