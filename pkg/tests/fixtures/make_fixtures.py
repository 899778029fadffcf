"""Regenerate the committed inference fixtures.

    python3 tests/fixtures/make_fixtures.py

Weights come from a tiny seeded least-squares fit so the classifier has
non-trivial structure (no biases, so the file holds exactly two
tensors); inputs are a separate seeded draw.  The operand-pair file for
``simulate-macro`` mixes hand-picked edge cases with seeded pairs.
"""

import random
from pathlib import Path

import numpy as np

from pimsim.runtime import quantize, save_weights_csv

HERE = Path(__file__).parent
SEED = 20240601


def main():
    rng = np.random.default_rng(SEED)
    centers = rng.normal(size=(4, 16)) * 2.0
    labels = rng.integers(0, 4, size=256)
    x = centers[labels] + rng.normal(size=(256, 16))
    w1 = rng.normal(size=(8, 16)) / 4.0
    h = np.maximum(x @ w1.T, 0.0)
    y = np.eye(4)[labels] - 0.25
    w2 = np.linalg.lstsq(h, y, rcond=None)[0].T
    tensors = [quantize(w1, name="fc1"), quantize(w2, name="fc2")]
    save_weights_csv(HERE / "mlp_16_8_4.csv", tensors)
    xs = centers[rng.integers(0, 4, size=64)] + rng.normal(size=(64, 16))
    with open(HERE / "mlp_inputs.csv", "w", encoding="ascii", newline="\n") as fh:
        for row in xs:
            fh.write(",".join(f"{v:.6f}" for v in row) + "\n")
    write_pairs()


def write_pairs():
    r = random.Random(7)
    rows = ["a,b,mode", "255,255,approx", "255,255,accurate", "255,255,exact", "0,0,exact",
            "3,3,custom:1", "1,255,approx", "128,128,approx", "170,85,accurate"]
    for _ in range(24):
        mode = r.choice(["approx", "accurate", "exact", "custom:2"])
        rows.append(f"{r.randrange(256)},{r.randrange(256)},{mode}")
    (HERE / "pairs.csv").write_text("\n".join(rows) + "\n", encoding="ascii")


if __name__ == "__main__":
    main()
