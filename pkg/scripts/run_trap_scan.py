"""Trap frequencies q_n against n and their fitted log-log slope.

    python scripts/run_trap_scan.py --spec specs/golden.json --seed 11
"""

import argparse
import time
from dataclasses import asdict, dataclass, field

from rwre.env import EnvironmentSpec
from rwre.reports import write_report
from rwre.slowdown import DEFAULT_N_GRID, trap_frequency_scan


@dataclass
class TrapScanConfig:
    spec: str = "specs/golden.json"
    n_grid: list = field(default_factory=lambda: list(DEFAULT_N_GRID))
    K: object = "auto"
    env_samples: int = 2000
    seed: int = 11
    out: str = "results/trap_scan"
    workers: int = 1


def main(cfg: TrapScanConfig):
    spec = EnvironmentSpec.load(cfg.spec)
    t0 = time.time()
    rep = trap_frequency_scan(spec, cfg.n_grid, cfg.K, cfg.env_samples, cfg.seed, workers=cfg.workers)
    config = {k: v for k, v in asdict(cfg).items() if k not in ("out", "workers")}
    write_report(cfg.out, "trap_scan", config, rep.to_dict(), list(rep.rows()),
                 ["n", "s_prime", "statistic", "value", "std_err"],
                 timing={"wall_clock_seconds": time.time() - t0, "workers": cfg.workers})
    print(f"K = {rep.K:g}, s = {rep.s:.6f}")
    for n, m, q, se in zip(rep.n_grid, rep.half_widths, rep.q_hat, rep.std_err):
        print(f"n = {n:<6d} m = {m:<4d} q = {q:.4f} +- {se:.4f}")
    print(f"slope {rep.slope:.3f} +- {rep.slope_se:.3f}, target {rep.target_band}, flags {rep.flags}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--spec", default=TrapScanConfig.spec)
    p.add_argument("--seed", type=int, default=TrapScanConfig.seed)
    p.add_argument("--K", default="auto")
    p.add_argument("--env-samples", type=int, default=TrapScanConfig.env_samples)
    p.add_argument("--out", default=TrapScanConfig.out)
    p.add_argument("--workers", type=int, default=1)
    a = p.parse_args()
    K = a.K if a.K == "auto" else float(a.K)
    main(TrapScanConfig(spec=a.spec, seed=a.seed, K=K, env_samples=a.env_samples, out=a.out, workers=a.workers))
