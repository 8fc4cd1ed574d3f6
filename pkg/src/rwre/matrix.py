"""Companion matrices and log-renormalized products.

``delta(k, l)`` is the (1, 1) entry of ``A(k) A(k-1) ... A(l)``, where ``A(x)``
is the companion matrix of the site law at ``x``: top row ``a_1..a_L`` with
``a_i = (omega(-i) + ... + omega(-L)) / omega(1)`` and ones on the
subdiagonal.  Only top rows are stored; applying ``A`` to a vector ``v`` is
``(a . v, v_1, ..., v_{L-1})``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .env import EnvironmentWindow, SiteLaw, validate_site_law
from .errors import InvalidLaw, UndefinedDelta


@dataclass(frozen=True)
class CompanionMatrix:
    a: tuple[float, ...]

    @property
    def L(self) -> int:
        return len(self.a)

    def dense(self) -> np.ndarray:
        L = self.L
        m = np.zeros((L, L))
        m[0] = self.a
        m[np.arange(1, L), np.arange(L - 1)] = 1.0
        return m


def top_rows(probs: np.ndarray) -> np.ndarray:
    """Companion top rows for jump-probability rows of shape ``(..., L + 2)``."""
    probs = np.asarray(probs, dtype=np.float64)
    L = probs.shape[-1] - 2
    tails = np.cumsum(probs[..., :L], axis=-1)  # tails[..., j] = omega(-L) + ... + omega(-L + j)
    with np.errstate(divide="ignore", invalid="ignore"):
        return tails[..., ::-1] / probs[..., L + 1: L + 2]


def build_matrix(law: SiteLaw, kappa: float | None = None) -> CompanionMatrix:
    """Companion matrix of one site law.

    With ``kappa`` the full site-law validation (including ellipticity) is
    applied; without it only normalization and a positive right jump are
    required.
    """
    if kappa is not None:
        verdict = validate_site_law(law, kappa)
        if not verdict.ok:
            raise InvalidLaw(f"invalid site law: {verdict.codes}", verdict.violations)
    else:
        p = np.asarray(law.probs)
        if abs(p.sum() - 1.0) > 1e-12 or (p < 0).any():
            raise InvalidLaw("site law is not a probability vector", ["NotNormalized"])
        if law[1] <= 0:
            raise InvalidLaw("probability of jump +1 is zero", ["ZeroRightJump"])
    return CompanionMatrix(tuple(float(x) for x in top_rows(np.array(law.probs))))


class ProductAccumulator:
    """Running product ``A(j) ... A(l) e_1`` kept at unit sup-norm.

    Works on a batch of independent products at once: ``v`` has shape
    ``batch + (L,)``.  The represented vector is ``v * exp(log_scale)``.
    """

    def __init__(self, L: int, batch_shape=()):
        self.L = L
        self.v = np.zeros(tuple(batch_shape) + (L,))
        self.v[..., 0] = 1.0
        self.log_scale = np.zeros(batch_shape)
        self.count = 0

    def push(self, a: np.ndarray):
        """Left-multiply by the companion matrix with top row(s) ``a``."""
        v = self.v
        # explicit loop keeps each batch entry's arithmetic independent of batch size
        first = a[..., 0] * v[..., 0]
        for i in range(1, self.L):
            first = first + a[..., i] * v[..., i]
        new = np.empty_like(v)
        new[..., 0] = first
        new[..., 1:] = v[..., :-1]
        scale = new.max(axis=-1)
        ok = scale > 0
        safe = np.where(ok, scale, 1.0)
        self.v = new / safe[..., None]
        with np.errstate(divide="ignore"):
            self.log_scale = self.log_scale + np.where(ok, np.log(safe), -np.inf)
        self.count += 1

    def log_first(self) -> np.ndarray:
        """log of the first coordinate, i.e. log delta for the product so far."""
        with np.errstate(divide="ignore"):
            return np.log(self.v[..., 0]) + self.log_scale

    def value(self) -> np.ndarray:
        return self.v * np.exp(self.log_scale)[..., None]


def prefix_log_deltas(a: np.ndarray) -> np.ndarray:
    """log delta after each factor for top rows ``a`` of shape ``(n, ..., L)``.

    Entry ``j`` is ``log <e1, A_j ... A_0 e1>`` with factor 0 applied first.
    """
    a = np.asarray(a, dtype=np.float64)
    acc = ProductAccumulator(a.shape[-1], a.shape[1:-1])
    out = np.empty(a.shape[:-1])
    for j in range(a.shape[0]):
        acc.push(a[j])
        out[j] = acc.log_first()
    return out


def log_delta_profile(env: EnvironmentWindow, base: int, j_hi: int) -> np.ndarray:
    """``log delta(j, base)`` for ``j = base - 1, ..., j_hi`` in one pass.

    The first entry is ``log delta(base - 1, base) = 0``.
    """
    if j_hi < base - 1:
        raise ValueError(f"j_hi={j_hi} < base - 1 = {base - 1}")
    out = np.empty(j_hi - base + 2)
    out[0] = 0.0
    if j_hi >= base:
        a = top_rows(env.probs_range(base, j_hi))
        out[1:] = prefix_log_deltas(a)
    return out


def _check_defined(values, k_desc):
    if np.any(np.isneginf(values)):
        raise UndefinedDelta(f"delta{k_desc} is exactly zero")


def log_delta(env: EnvironmentWindow, k: int, l: int) -> float:
    """log delta(k, l); zero for ``k = l - 1``."""
    if k < l - 1:
        raise ValueError(f"log_delta needs k >= l - 1, got k={k}, l={l}")
    if k == l - 1:
        return 0.0
    value = log_delta_profile(env, l, k)[-1]
    _check_defined(value, f"({k}, {l})")
    return float(value)


def log_delta_sum(env: EnvironmentWindow, j_range: tuple[int, int], base: int) -> float:
    """log of ``sum_{j=j_lo}^{j_hi} delta(j, base)``, linear cost in the window."""
    j_lo, j_hi = j_range
    if j_lo > j_hi:
        raise ValueError(f"empty range [{j_lo}, {j_hi}]")
    if base > j_lo + 1:
        raise ValueError(f"base={base} must be <= j_lo + 1 = {j_lo + 1}")
    prof = log_delta_profile(env, base, j_hi)
    terms = prof[j_lo - (base - 1):]
    _check_defined(terms, f"(j, {base}) for some j in [{j_lo}, {j_hi}]")
    return float(logsumexp(terms))


def dump_log_deltas(env: EnvironmentWindow, base: int, j_hi: int, path):
    """Debug table of ``(j, log delta(j, base))`` as CSV."""
    prof = log_delta_profile(env, base, j_hi)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "log_delta"])
        for j, v in zip(range(base - 1, j_hi + 1), prof):
            w.writerow([j, repr(float(v))])
