"""Exact F(u), I(x) and the duality check inf I(eps)/eps = s for an L = 1 spec.

    python scripts/golden_rate_function.py --spec specs/golden.json
"""

import argparse
from dataclasses import dataclass

import numpy as np

from rwre.env import EnvironmentSpec
from rwre.lyapunov import exact_curve, exact_evaluator, find_root_s, legendre_rate


@dataclass
class RateConfig:
    spec: str = "specs/golden.json"
    u_step: float = 0.005
    u_max: float = 1.5


def main(cfg: RateConfig):
    spec = EnvironmentSpec.load(cfg.spec)
    k = int(round(cfg.u_max / cfg.u_step))
    curve = exact_curve(spec, np.round(np.arange(-k, k + 1) * cfg.u_step, 12))
    s = find_root_s(exact_evaluator(spec), "positive").s
    i = int(np.argmin(curve.values))
    print(f"s = {s:.7f}; min F = {curve.values[i]:.6f} at u = {curve.grid[i]:.3f}")
    eps = np.linspace(0.005, 0.6, 120)
    rate = legendre_rate(curve, np.concatenate([[0.0], eps]), on_boundary="drop")
    print(f"I(0) = {rate.I[0]:.6f}")
    ratio = rate.I[1:] / rate.x[1:]
    j = int(np.argmin(ratio))
    print(f"inf I(eps)/eps = {ratio[j]:.5f} at eps = {rate.x[1 + j]:.3f} (s = {s:.5f})")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--spec", default=RateConfig.spec)
    main(RateConfig(spec=p.parse_args().spec))
