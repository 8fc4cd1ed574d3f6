"""Quenched walks with stopping rules, and vectorized batches of walkers.

Step ``t`` of a walker with stream key ``k`` uses the uniform
``uniform(k, WALK, t)``; walker ``w`` of a batch seeded with ``seed`` has
walk key ``derive_seed(seed, WALK, w)`` and (annealed mode) environment seed
``derive_seed(seed, ENV, w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .env import EnvironmentSpec, EnvironmentWindow, sample_environment
from .parallel import map_chunks


@dataclass
class WalkStream:
    """Counter-based random stream: each draw is a pure function of (key, counter)."""

    key: int
    counter: int = 0

    def next_uniform(self) -> float:
        u = float(rng.uniform(self.key, rng.WALK, self.counter))
        self.counter += 1
        return u


def _jump_index(cum_rows, u):
    """Index of the first cumulative probability exceeding ``u`` (per row)."""
    idx = (np.asarray(u)[..., None] >= cum_rows).sum(axis=-1)
    return np.minimum(idx, cum_rows.shape[-1] - 1)


def step(env: EnvironmentWindow, x: int, stream: WalkStream) -> int:
    """One move from ``x`` with jump drawn from the site law at ``x``."""
    row = env.probs(np.array([x]))[0]
    z = int(_jump_index(np.cumsum(row), stream.next_uniform())) - env.L
    return x + z


@dataclass(frozen=True)
class StopSpec:
    """Stop when ``X <= left``, ``X >= right``, or ``X`` leaves ``interval``; at most ``cap`` steps."""

    cap: int
    left: int | None = None
    right: int | None = None
    interval: tuple[int, int] | None = None

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cap must be >= 1")
        if self.left is None and self.right is None and self.interval is None:
            raise ValueError("at least one stopping rule is required besides the cap")

    def reason(self, x):
        if self.interval is not None and not self.interval[0] <= x <= self.interval[1]:
            return "exit"
        if self.left is not None and x <= self.left:
            return "left"
        if self.right is not None and x >= self.right:
            return "right"
        return None


@dataclass
class Trajectory:
    start: int
    cap: int
    steps: int
    final: int
    stop_reason: str
    record_steps: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)

    @property
    def censored(self) -> bool:
        return self.stop_reason == "censored"

    def rows(self):
        for t, x in zip(self.record_steps, self.positions):
            yield {"step": int(t), "position": int(x)}


def run_until(env: EnvironmentWindow, x0: int, stop: StopSpec, seed: int, stride: int | None = None) -> Trajectory:
    """Walk from ``x0`` until a stopping rule fires or ``stop.cap`` steps are done.

    Positions are recorded every ``stride`` steps (default ``ceil(cap / 1024)``)
    plus the first and last positions.  With ``interval`` given, ``steps`` at
    an ``exit`` stop is the exit time.
    """
    if stride is None:
        stride = max(1, math.ceil(stop.cap / 1024))
    stream = WalkStream(rng.derive_seed(seed, rng.WALK, 0))
    rec_t, rec_x = [0], [x0]
    x = x0
    reason = "censored"
    t = 0
    # pull site laws in blocks to avoid per-step lookups
    block_lo, block = None, None
    L = env.L
    while t < stop.cap:
        if block_lo is None or not block_lo <= x < block_lo + len(block):
            block_lo = x - 256 * L
            block = np.cumsum(env.probs_range(block_lo, x + 256), axis=1)
        u = stream.next_uniform()
        x += int(_jump_index(block[x - block_lo], u)) - L
        t += 1
        if t % stride == 0:
            rec_t.append(t)
            rec_x.append(x)
        r = stop.reason(x)
        if r is not None:
            reason = r
            break
    if rec_t[-1] != t:
        rec_t.append(t)
        rec_x.append(x)
    return Trajectory(x0, stop.cap, t, x, reason, np.array(rec_t), np.array(rec_x))


def _walk_batch(lookup, walk_keys, x0, n, stop: StopSpec | None = None):
    """Advance a batch of walkers; frozen walkers stop moving once ``stop`` fires."""
    W = len(walk_keys)
    x = np.full(W, x0, dtype=np.int64)
    steps = np.zeros(W, dtype=np.int64)
    reason = np.zeros(W, dtype=np.int8)  # 0 running/censored, 1 left, 2 right, 3 exit
    alive = np.ones(W, dtype=bool)
    for t in range(n):
        idx = np.flatnonzero(alive) if stop is not None else slice(None)
        xs = x[idx]
        cum = lookup(xs, idx)
        u = rng.uniform(walk_keys[idx], rng.WALK, t)
        L = cum.shape[-1] - 2
        xs = xs + _jump_index(cum, u) - L
        x[idx] = xs
        if stop is None:
            continue
        steps[idx] += 1
        code = np.zeros(len(xs), dtype=np.int8)
        if stop.right is not None:
            code[xs >= stop.right] = 2
        if stop.left is not None:
            code[xs <= stop.left] = 1
        if stop.interval is not None:
            code[(xs < stop.interval[0]) | (xs > stop.interval[1])] = 3
        hit = code > 0
        if hit.any():
            where = idx[hit]
            reason[where] = code[hit]
            alive[where] = False
            if not alive.any():
                break
    if stop is None:
        steps[:] = n
    return x, steps, reason


REASONS = np.array(["censored", "left", "right", "exit"])


@dataclass
class BatchResult:
    final: np.ndarray
    steps: np.ndarray
    stop_reason: np.ndarray
    mode: str
    seed: int

    def rows(self):
        for w, (f, s, r) in enumerate(zip(self.final, self.steps, self.stop_reason)):
            yield {"walker": w, "final_position": int(f), "steps": int(s), "stop_reason": str(r)}


def _quenched_lookup(env):
    def lookup(xs, idx):
        return np.cumsum(env.probs(xs), axis=-1)
    return lookup


def _annealed_lookup(spec, env_keys):
    cum_table = np.cumsum(spec.table, axis=1)

    def lookup(xs, idx):
        return cum_table[spec.draw_atoms(env_keys[idx], xs)]
    return lookup


def _batch(spec_or_env, n, walkers, seed, mode, x0, stop, workers):
    def chunk(lo, hi):
        ids = np.arange(lo, hi, dtype=np.int64)
        walk_keys = rng.hash64(seed, rng.WALK, ids)
        if mode == "annealed":
            env_keys = rng.hash64(seed, rng.ENV, ids)
            lookup = _annealed_lookup(spec_or_env, env_keys)
        else:
            lookup = _quenched_lookup(spec_or_env)
        x, s, r = _walk_batch(lookup, walk_keys, x0, n, stop)
        return np.stack([x, s, r.astype(np.int64)], axis=1)

    out = map_chunks(chunk, walkers, workers, chunk_size=max(1, walkers // max(1, int(workers or 1))))
    return out[:, 0], out[:, 1], out[:, 2]


def batch_final_positions(spec: EnvironmentSpec | EnvironmentWindow, n: int, walkers: int, seed: int,
                          mode: str = "annealed", x0: int = 0, workers: int = 1) -> BatchResult:
    """Positions after ``n`` steps for ``walkers`` independent walkers from ``x0``.

    ``annealed``: each walker has its own environment drawn from ``spec``.
    ``quenched``: all walkers share the environment seeded by
    ``derive_seed(seed, ENV)``.  An already realized environment (for
    instance a non-elliptic one) is accepted in place of ``spec`` and
    implies quenched mode.
    """
    if walkers < 1:
        raise ValueError("need at least one walker")
    if mode not in ("annealed", "quenched"):
        raise ValueError(f"mode must be 'annealed' or 'quenched', got {mode!r}")
    if isinstance(spec, EnvironmentWindow):
        mode, target = "quenched", spec
    elif mode == "annealed":
        target = spec
    else:
        target = sample_environment(spec, (x0 - spec.L * n - 1, x0 + n + 1), rng.derive_seed(seed, rng.ENV))
    x, s, r = _batch(target, n, walkers, seed, mode, x0, None, workers)
    return BatchResult(x, s, REASONS[r], mode, seed)


def run_until_batch(env: EnvironmentWindow, x0: int, stop: StopSpec, walkers: int, seed: int,
                    workers: int = 1) -> BatchResult:
    """Many independent walkers in one fixed environment, each stopped by ``stop``."""
    x, s, r = _batch(env, stop.cap, walkers, seed, "quenched", x0, stop, workers)
    return BatchResult(x, s, REASONS[r], "quenched", seed)
