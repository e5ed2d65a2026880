"""NMAE as the loss probability grows, on the bundled smooth fixture.

``python3 demos/loss_sweep.py [trials]``; each point averages ``trials``
masks (default 2).  The same table comes out of ``tubal-traffic sweep``.
"""

import sys
from pathlib import Path

import numpy as np

from tubal_traffic import MaskSpec, SolverConfig, generate_mask, load_traffic_csv, nmae, run, shape_tensor

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "smooth_20x14x9_r2.csv"


def main(trials: int = 2):
    truth = shape_tensor(load_traffic_csv(FIXTURE, negative="allow"), 20)
    print("loss_p  nmae_mean  nmae_std")
    for p in (0.1, 0.3, 0.5, 0.7, 0.8, 0.9):
        scores = []
        for seed in range(trials):
            mask = generate_mask(truth.shape, MaskSpec(p, seed))
            res = run(truth, mask, SolverConfig(rank=2, seed=seed))
            scores.append(nmae(truth, res.W, mask))
        print(f"{p:6.2f}  {np.mean(scores):9.4f}  {np.std(scores):8.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2)
