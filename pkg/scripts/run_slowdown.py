"""Slowdown trend of X_n / n^{s'} for a spec in a zero-speed regime.

    python scripts/run_slowdown.py --spec specs/golden.json --seed 12
"""

import argparse
import time
from dataclasses import asdict, dataclass, field

from rwre.env import EnvironmentSpec
from rwre.reports import write_report
from rwre.slowdown import DEFAULT_N_GRID, slowdown_curve


@dataclass
class SlowdownConfig:
    spec: str = "specs/golden.json"
    s_primes: list = field(default_factory=lambda: [0.5, 0.9, 1.0])
    n_grid: list = field(default_factory=lambda: list(DEFAULT_N_GRID))
    walkers: int = 2000
    seed: int = 12
    out: str = "results/slowdown"
    workers: int = 1


def main(cfg: SlowdownConfig):
    spec = EnvironmentSpec.load(cfg.spec)
    t0 = time.time()
    rep = slowdown_curve(spec, cfg.s_primes, cfg.n_grid, cfg.walkers, cfg.seed, workers=cfg.workers)
    config = {k: v for k, v in asdict(cfg).items() if k not in ("out", "workers")}
    write_report(cfg.out, "slowdown", config, rep.to_dict(), list(rep.rows()),
                 ["n", "s_prime", "statistic", "value", "std_err"],
                 timing={"wall_clock_seconds": time.time() - t0, "workers": cfg.workers})
    print(f"s = {rep.s:.6f}")
    print("n        " + "  ".join(f"s'={sp:<6g}" for sp in rep.s_prime_grid))
    for n in rep.n_grid:
        print(f"{n:<8d} " + "  ".join(f"{rep.median[(n, sp)]:<9.4f}" for sp in rep.s_prime_grid))


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--spec", default=SlowdownConfig.spec)
    p.add_argument("--seed", type=int, default=SlowdownConfig.seed)
    p.add_argument("--walkers", type=int, default=SlowdownConfig.walkers)
    p.add_argument("--out", default=SlowdownConfig.out)
    p.add_argument("--workers", type=int, default=1)
    a = p.parse_args()
    main(SlowdownConfig(spec=a.spec, seed=a.seed, walkers=a.walkers, out=a.out, workers=a.workers))
