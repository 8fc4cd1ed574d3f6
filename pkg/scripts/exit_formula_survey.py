"""Closed-form exit probabilities against first-step analysis for L = 1, 2, 3.

Draws random environments and windows and reports the largest absolute
discrepancy per L together with the smallest nonzero probabilities seen.

    python scripts/exit_formula_survey.py --instances 200
"""

import argparse
from dataclasses import dataclass

import numpy as np

from rwre.env import EnvironmentSpec, SiteLaw, sample_environment
from rwre.exit import exit_probs_closed, exit_probs_linear


@dataclass
class SurveyConfig:
    instances: int = 200
    max_sites: int = 200
    atoms: int = 3
    seed: int = 0


def random_spec(L, gen, atoms):
    laws = []
    for _ in range(atoms):
        w = gen.uniform(0.2, 1.0, L + 2)
        w[L] = gen.uniform(0.0, 1.0)  # holding probability
        laws.append((SiteLaw(L, tuple(w / w.sum())), 1 / atoms))
    return EnvironmentSpec(L, 0.01, tuple(laws))


def main(cfg: SurveyConfig):
    print("L  instances  max|closed-linear|  max rel (minus < 1e-3)")
    for L in (1, 2, 3):
        worst = worst_rel = 0.0
        for i in range(cfg.instances):
            gen = np.random.default_rng([cfg.seed, L, i])
            a = int(gen.integers(-100, 0))
            b = a + int(gen.integers(2, cfg.max_sites + 2))
            env = sample_environment(random_spec(L, gen, cfg.atoms), (a - L, b), i)
            closed = exit_probs_closed(env, a, b)
            linear, _ = exit_probs_linear(env, a, b)
            worst = max(worst, float(np.max(np.abs(closed - linear))))
            small = (linear > 0) & (linear < 1e-3)
            if small.any():
                worst_rel = max(worst_rel, float(np.max(np.abs(closed[small] / linear[small] - 1))))
        print(f"{L}  {cfg.instances:<9d}  {worst:<18.3e} {worst_rel:.3e}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--instances", type=int, default=SurveyConfig.instances)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    main(SurveyConfig(instances=a.instances, seed=a.seed))
