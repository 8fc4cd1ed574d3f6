"""Site laws, i.i.d. environment laws and realized environments.

A site law is a probability vector over the jump set {-L, ..., 0, 1}.  Arrays
of site laws are stored as rows with column ``z + L`` holding the probability
of jump ``z``.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import rng
from .errors import InvalidSpec

SUM_TOL = 1e-12


@dataclass(frozen=True)
class SiteLaw:
    """Jump distribution at one site; ``probs[i]`` is the probability of jump ``i - L``."""

    L: int
    probs: tuple[float, ...]

    def __post_init__(self):
        if int(self.L) < 1:
            raise InvalidSpec(f"L must be a positive integer, got {self.L}")
        probs = tuple(float(p) for p in self.probs)
        if len(probs) != self.L + 2:
            raise InvalidSpec(f"expected {self.L + 2} probabilities for L={self.L}, got {len(probs)}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_dict(cls, probs: Mapping, L: int | None = None) -> SiteLaw:
        """Build from ``{jump: probability}``; missing jumps get probability 0."""
        probs = {int(z): float(p) for z, p in probs.items()}
        if L is None:
            L = max(1, -min(probs))
        bad = [z for z in probs if not -L <= z <= 1]
        if bad:
            raise InvalidSpec(f"jumps {bad} outside {{-{L}, ..., 1}}")
        return cls(L, tuple(probs.get(z, 0.0) for z in range(-L, 2)))

    @classmethod
    def nearest_neighbor(cls, rho: float, stay: float = 0.0) -> SiteLaw:
        """L = 1 law with omega(-1)/omega(1) = rho and holding probability ``stay``."""
        right = (1.0 - stay) / (1.0 + rho)
        return cls(1, (rho * right, stay, right))

    def __getitem__(self, z: int) -> float:
        if not -self.L <= z <= 1:
            raise KeyError(z)
        return self.probs[z + self.L]

    def as_dict(self) -> dict[int, float]:
        return {z: self.probs[z + self.L] for z in range(-self.L, 2)}

    @property
    def jumps(self) -> range:
        return range(-self.L, 2)

    def row(self) -> np.ndarray:
        return np.array(self.probs)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class Verdict:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def __bool__(self):
        return self.ok


def validate_site_law(law: SiteLaw, kappa: float) -> Verdict:
    """Check normalization, a positive right jump and ellipticity at level ``kappa``.

    The ellipticity ratio is required for every jump except 0; for jump +1
    the ratio is identically 1, so the condition there only requires
    ``kappa < 1``.
    """
    out = []
    p = np.asarray(law.probs)
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        out.append(Violation("InvalidProbability", f"probabilities must lie in [0, 1]: {law.probs}"))
    total = float(p.sum())
    if abs(total - 1.0) > SUM_TOL:
        out.append(Violation("NotNormalized", f"probabilities sum to {total!r}"))
    if not kappa > 0:
        out.append(Violation("InvalidKappa", f"kappa must be positive, got {kappa}"))
    elif kappa >= 1:
        out.append(Violation("InvalidKappa", f"kappa={kappa} >= 1 makes the z=+1 ratio condition unsatisfiable"))
    right = law[1]
    if right <= 0:
        out.append(Violation("ZeroRightJump", "probability of jump +1 is zero"))
    else:
        for z in range(-law.L, 0):
            ratio = law[z] / right
            if not ratio > kappa:
                out.append(Violation(
                    "EllipticityViolated", f"omega({z})/omega(1) = {ratio:.6g} <= kappa = {kappa}"))
    return Verdict(tuple(out))


@dataclass(frozen=True)
class EnvironmentSpec:
    """Finite-support i.i.d. law of the site laws.

    Validated on construction; raises :class:`InvalidSpec` listing every
    violated invariant.
    """

    L: int
    kappa: float
    atoms: tuple[tuple[SiteLaw, float], ...]

    def __post_init__(self):
        atoms = tuple((law, float(w)) for law, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        problems = []
        if not atoms:
            problems.append(Violation("NoAtoms", "at least one atom is required"))
        for i, (law, w) in enumerate(atoms):
            if law.L != self.L:
                problems.append(Violation("WrongL", f"atom {i} has L={law.L}, spec has L={self.L}"))
                continue
            for v in validate_site_law(law, self.kappa).violations:
                problems.append(Violation(v.code, f"atom {i}: {v.message}"))
            if not w >= 0:
                problems.append(Violation("NegativeWeight", f"atom {i} has weight {w}"))
        total = sum(w for _, w in atoms)
        if atoms and abs(total - 1.0) > SUM_TOL:
            problems.append(Violation("WeightsNotNormalized", f"atom weights sum to {total!r}"))
        if problems:
            lines = "; ".join(f"{v.code}: {v.message}" for v in problems)
            raise InvalidSpec(f"invalid environment spec: {lines}", problems)
        object.__setattr__(self, "_table", np.array([law.probs for law, _ in atoms]))
        object.__setattr__(self, "_cum", np.cumsum([w for _, w in atoms]))

    @classmethod
    def point_mass(cls, law: SiteLaw, kappa: float = 1e-6) -> EnvironmentSpec:
        return cls(law.L, kappa, ((law, 1.0),))

    @classmethod
    def nearest_neighbor(cls, rhos: Sequence[float], weights: Sequence[float] | None = None,
                         kappa: float | None = None, stay: float = 0.0) -> EnvironmentSpec:
        """L = 1 spec from a list of ratios omega(-1)/omega(1)."""
        if weights is None:
            weights = [1.0 / len(rhos)] * len(rhos)
        if kappa is None:
            kappa = 0.5 * min(min(rhos), 1.0)
        return cls(1, kappa, tuple((SiteLaw.nearest_neighbor(r, stay), w) for r, w in zip(rhos, weights)))

    @property
    def laws(self) -> list[SiteLaw]:
        return [law for law, _ in self.atoms]

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    @property
    def table(self) -> np.ndarray:
        """(atoms, L + 2) array of jump probabilities."""
        return self._table

    def draw_atoms(self, seed, sites) -> np.ndarray:
        """Atom index of each site, a pure function of ``(seed, site)``."""
        u = rng.uniform(seed, rng.ENV, np.asarray(sites, dtype=np.int64))
        idx = np.searchsorted(self._cum, u, side="right")
        return np.minimum(idx, len(self.atoms) - 1)

    def mirrored(self) -> EnvironmentSpec:
        """L = 1 only: swap the left and right jump probabilities of every atom."""
        if self.L != 1:
            raise ValueError("mirroring is only exact for L = 1")
        atoms = tuple((SiteLaw(1, law.probs[::-1]), w) for law, w in self.atoms)
        ratios = [law[-1] / law[1] for law, _ in atoms]
        kappa = min(self.kappa, 0.5 * min(ratios))
        return EnvironmentSpec(1, kappa, atoms)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "kappa": self.kappa,
            "atoms": [
                {"weight": w, "probs": {str(z): p for z, p in law.as_dict().items()}}
                for law, w in self.atoms
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> EnvironmentSpec:
        try:
            L = int(data["L"])
            kappa = float(data["kappa"])
            atoms = tuple(
                (SiteLaw.from_dict({int(z): p for z, p in a["probs"].items()}, L=L), float(a["weight"]))
                for a in data["atoms"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed spec JSON: {exc}") from exc
        return cls(L, kappa, atoms)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> EnvironmentSpec:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"spec is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> EnvironmentSpec:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


class _IIDSource:
    """Site laws drawn from a spec; realized atoms are cached, append-only."""

    def __init__(self, spec: EnvironmentSpec, seed: int):
        self.spec = spec
        self.seed = int(seed) & rng.MASK64
        self.L = spec.L
        self._lock = threading.Lock()
        self._lo = 0
        self._atoms = np.empty(0, dtype=np.int64)

    def realize(self, lo: int, hi: int):
        with self._lock:
            cur_lo, cur = self._lo, self._atoms
            cur_hi = cur_lo + len(cur) - 1
            if len(cur) and lo >= cur_lo and hi <= cur_hi:
                return
            if not len(cur):
                new_lo, new_hi = lo, hi
            else:
                new_lo, new_hi = min(lo, cur_lo), max(hi, cur_hi)
            atoms = np.empty(new_hi - new_lo + 1, dtype=np.int64)
            if len(cur):
                atoms[cur_lo - new_lo: cur_lo - new_lo + len(cur)] = cur
                fresh = np.ones(len(atoms), dtype=bool)
                fresh[cur_lo - new_lo: cur_lo - new_lo + len(cur)] = False
            else:
                fresh = np.ones(len(atoms), dtype=bool)
            sites = np.arange(new_lo, new_hi + 1)[fresh]
            atoms[fresh] = self.spec.draw_atoms(self.seed, sites)
            # publish a new array; readers holding the old one stay consistent
            self._lo, self._atoms = new_lo, atoms

    def interval(self):
        if not len(self._atoms):
            return None
        return self._lo, self._lo + len(self._atoms) - 1

    def atoms(self, sites) -> np.ndarray:
        sites = np.asarray(sites, dtype=np.int64)
        lo, cached = self._lo, self._atoms
        if sites.size == 0:
            return np.empty(sites.shape, dtype=np.int64)
        idx = sites - lo
        inside = (idx >= 0) & (idx < len(cached))
        if inside.all():
            return cached[idx]
        out = self.spec.draw_atoms(self.seed, sites)
        return out

    def probs(self, sites) -> np.ndarray:
        return self.spec.table[self.atoms(sites)]


class _TableSource:
    """Explicit site laws on an interval; ``outside`` covers every other site."""

    def __init__(self, rows: np.ndarray, lo: int, outside: np.ndarray | None):
        self.rows = np.asarray(rows, dtype=np.float64)
        self.lo = int(lo)
        self.outside = None if outside is None else np.asarray(outside, dtype=np.float64)
        self.L = self.rows.shape[1] - 2

    def realize(self, lo, hi):
        if self.outside is None and (lo < self.lo or hi >= self.lo + len(self.rows)):
            raise IndexError(f"sites [{lo}, {hi}] outside the explicit environment")

    def interval(self):
        return self.lo, self.lo + len(self.rows) - 1

    def probs(self, sites) -> np.ndarray:
        sites = np.asarray(sites, dtype=np.int64)
        idx = sites - self.lo
        inside = (idx >= 0) & (idx < len(self.rows))
        if inside.all():
            return self.rows[idx]
        if self.outside is None:
            raise IndexError("site outside the explicit environment")
        out = np.broadcast_to(self.outside, sites.shape + self.outside.shape).copy()
        out[inside] = self.rows[idx[inside]]
        return out


@dataclass(frozen=True, eq=False)
class EnvironmentWindow:
    """A realized environment seen through a shift: site ``x`` resolves to
    the underlying site ``x + shift``.

    Site laws are a pure function of the master seed and the site index, so
    realization order and window extensions never change a realized site.
    """

    source: object
    shift: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def L(self) -> int:
        return self.source.L

    @property
    def spec(self) -> EnvironmentSpec | None:
        return getattr(self.source, "spec", None)

    @property
    def seed(self) -> int | None:
        return getattr(self.source, "seed", None)

    @property
    def interval(self):
        iv = self.source.interval()
        if iv is None:
            return None
        return iv[0] - self.shift, iv[1] - self.shift

    def extend(self, lo: int, hi: int) -> EnvironmentWindow:
        """Realize sites ``lo..hi`` (in this view's coordinates)."""
        self.source.realize(lo + self.shift, hi + self.shift)
        return self

    def probs(self, sites) -> np.ndarray:
        """Jump probability rows for an array of sites, shape ``sites.shape + (L + 2,)``."""
        return self.source.probs(np.asarray(sites, dtype=np.int64) + self.shift)

    def probs_range(self, lo: int, hi: int) -> np.ndarray:
        return self.probs(np.arange(lo, hi + 1))

    def atom(self, x: int) -> int:
        return int(self.source.atoms(np.array([x + self.shift]))[0])

    def atoms(self, sites) -> np.ndarray:
        return self.source.atoms(np.asarray(sites, dtype=np.int64) + self.shift)

    def law(self, x: int) -> SiteLaw:
        return SiteLaw(self.L, tuple(self.probs(np.array([x]))[0]))

    def __eq__(self, other):
        if not isinstance(other, EnvironmentWindow):
            return NotImplemented
        return self.source is other.source and self.shift == other.shift

    def __hash__(self):
        return hash((id(self.source), self.shift))


def sample_environment(spec: EnvironmentSpec, interval: tuple[int, int], seed: int) -> EnvironmentWindow:
    """Environment drawn from ``spec`` with sites ``interval`` realized up front."""
    if not isinstance(spec, EnvironmentSpec):
        raise InvalidSpec("sample_environment needs a validated EnvironmentSpec")
    lo, hi = interval
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    env = EnvironmentWindow(_IIDSource(spec, seed))
    return env.extend(lo, hi)


def shifted_view(env: EnvironmentWindow, k: int) -> EnvironmentWindow:
    """View whose site ``x`` is ``env``'s site ``x + k``; shares realized data."""
    return EnvironmentWindow(env.source, env.shift + int(k), env.meta)


def environment_from_laws(laws: Sequence[SiteLaw] | np.ndarray, lo: int = 0,
                          outside: SiteLaw | None = None) -> EnvironmentWindow:
    """Explicit (non-random) environment with ``laws[i]`` at site ``lo + i``.

    No ellipticity check is applied, so degenerate laws such as a
    deterministic right drift are allowed here.
    """
    if isinstance(laws, np.ndarray):
        rows = laws
    else:
        rows = np.array([law.probs for law in laws])
    out = None if outside is None else np.array(outside.probs)
    return EnvironmentWindow(_TableSource(rows, lo, out))


def constant_environment(law: SiteLaw) -> EnvironmentWindow:
    """Same site law everywhere."""
    row = np.array(law.probs)
    return EnvironmentWindow(_TableSource(row[None, :], 0, row))


def deterministic_right(L: int = 1) -> EnvironmentWindow:
    return constant_environment(SiteLaw.from_dict({1: 1.0}, L=L))
