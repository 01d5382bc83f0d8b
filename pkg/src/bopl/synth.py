"""Synthetic multilabel benchmark data for the end-to-end pipeline.

Generates a Scene-scale task: a few thousand examples, six classes, dense
features in [0, 1], roughly 1.07 labels per example.  Each class owns two
Gaussian clusters placed independently, so class regions are bimodal and
axis-aligned splits separate them better than a linear model can.
Cluster overlap is controlled by the noise scale, which keeps the
Bayes-optimal argmax reward well below 1.

Deterministic given the seed.  ``python -m bopl.synth --out data.csv``
writes the default dataset as a supervised CSV.
"""

from __future__ import annotations

import argparse

import numpy as np

from .dataset import SupervisedExample

NUM_CLASSES = 6
CLUSTERS_PER_CLASS = 2


def make_scene_like(
    seed: int,
    n: int = 2407,
    num_features: int = 60,
    noise: float = 0.35,
    informative: int = 24,
    second_label_prob: float = 0.074,
) -> list[SupervisedExample]:
    """Draw a multilabel dataset of n examples with NUM_CLASSES classes.

    Each cluster center is 0.5 everywhere except on its own random subset
    of `informative` coordinates, where it sits at 0.2 or 0.8.  Features
    are the center plus Gaussian noise, clipped to [0, 1].  A second label
    is added with probability second_label_prob by borrowing another
    class's cluster direction, which also blends the features toward it.
    """
    rng = np.random.default_rng(seed)
    k = NUM_CLASSES * CLUSTERS_PER_CLASS
    centers = np.full((k, num_features), 0.5)
    for j in range(k):
        dims = rng.choice(num_features, size=informative, replace=False)
        centers[j, dims] = rng.choice([0.2, 0.8], size=informative)

    examples: list[SupervisedExample] = []
    for _ in range(n):
        c = int(rng.integers(0, NUM_CLASSES))
        cluster = c * CLUSTERS_PER_CLASS + int(rng.integers(0, CLUSTERS_PER_CLASS))
        center = centers[cluster]
        labels = [c]
        if rng.random() < second_label_prob:
            c2 = int(rng.integers(0, NUM_CLASSES - 1))
            if c2 >= c:
                c2 += 1
            cluster2 = c2 * CLUSTERS_PER_CLASS + int(rng.integers(0, CLUSTERS_PER_CLASS))
            center = 0.6 * center + 0.4 * centers[cluster2]
            labels.append(c2)
        x = np.clip(center + rng.normal(0.0, noise, num_features), 0.0, 1.0)
        examples.append(SupervisedExample(features=x, labels=tuple(labels)))
    return examples


def main(argv=None) -> int:
    from .data_io import write_supervised_csv

    parser = argparse.ArgumentParser(
        description="write a synthetic Scene-scale multilabel CSV"
    )
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n", type=int, default=2407)
    parser.add_argument("--num-features", type=int, default=60)
    parser.add_argument("--noise", type=float, default=0.35)
    args = parser.parse_args(argv)
    examples = make_scene_like(
        seed=args.seed, n=args.n, num_features=args.num_features, noise=args.noise
    )
    write_supervised_csv(args.out, examples, "multilabel")
    print(f"wrote {len(examples)} examples to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
