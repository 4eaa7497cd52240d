"""Synthetic multi-view datasets: two interleaving moons and planted features.

Randomness comes from numpy's Philox generator (a 64-bit counter-based
PRNG).  One child stream is spawned per view from ``SeedSequence(seed)``,
so every view is a pure function of ``(seed, view index)`` no matter the
order in which views are generated.
"""

from dataclasses import dataclass

import numpy as np

from .data_io import MultiViewDataset


def view_streams(seed, count):
    """Independent per-view generators from a single integer seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(s)) for s in children]


@dataclass(frozen=True)
class TwoMoonSpec:
    n_per_cluster: int = 100
    variant: str = "pure"  # "pure": 2 views, "noisy": adds a noise view
    moon_noise_sd: float = 0.1
    noise_view_dim: int = 2
    noise_view_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_per_cluster < 2:
            raise ValueError("n_per_cluster must be >= 2")
        if self.variant not in ("pure", "noisy"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.moon_noise_sd < 0 or self.noise_view_sd < 0:
            raise ValueError("noise scales must be non-negative")
        if self.noise_view_dim < 1:
            raise ValueError("noise_view_dim must be >= 1")


def moon_points(n_per_cluster):
    """Noise-free moons, shape (2, 2n): unit half circles, the second
    flipped and shifted by (1, 0.5).  Labels are 0 then 1."""
    t = np.linspace(0.0, np.pi, n_per_cluster)
    upper = np.vstack([np.cos(t), np.sin(t)])
    lower = np.vstack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    return np.hstack([upper, lower])


def make_two_moon(spec=TwoMoonSpec()):
    n = spec.n_per_cluster
    base = moon_points(n)
    labels = np.repeat([0, 1], n)
    V = 2 if spec.variant == "pure" else 3
    rngs = view_streams(spec.seed, V)
    views = [base + spec.moon_noise_sd * rngs[v].standard_normal(base.shape) for v in range(2)]
    if spec.variant == "noisy":
        views.append(spec.noise_view_sd * rngs[2].standard_normal((spec.noise_view_dim, 2 * n)))
    return MultiViewDataset(views, labels, name=f"two-moon-{spec.variant}")


@dataclass(frozen=True)
class PlantedSpec:
    n: int = 300
    c: int = 3
    informative: tuple = (10, 10, 10)
    noise: tuple = (40, 40, 40)
    separation: float = 6.0
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if len(self.informative) != len(self.noise):
            raise ValueError("informative and noise need one entry per view")
        if self.c < 1 or self.n < self.c:
            raise ValueError("need 1 <= c <= n")
        if any(a < 0 for a in self.informative) or any(b < 0 for b in self.noise):
            raise ValueError("feature counts must be non-negative")
        if any(a + b < 1 for a, b in zip(self.informative, self.noise)):
            raise ValueError("every view needs at least one feature")


def make_planted(spec=PlantedSpec()):
    """Views whose first ``informative[v]`` rows carry the class signal.

    On every informative feature the class means are ``separation`` times a
    random permutation of ``0..c-1``, so neighbouring classes differ by
    ``separation``.  All features get ``N(0, noise_sd^2)`` noise; noise
    features carry nothing else.  Feature order within a view is shuffled,
    and the returned mask is a list of boolean arrays, one per view.
    """
    V = len(spec.informative)
    label_rng, *rngs = view_streams(spec.seed, V + 1)
    labels = np.arange(spec.n) % spec.c
    label_rng.shuffle(labels)
    views, mask = [], []
    for v in range(V):
        rng = rngs[v]
        a, b = spec.informative[v], spec.noise[v]
        means = np.stack([rng.permutation(spec.c) for _ in range(a)]) * spec.separation
        X = spec.noise_sd * rng.standard_normal((a + b, spec.n))
        X[:a] += means[:, labels] if a else 0.0
        order = rng.permutation(a + b)
        views.append(X[order])
        mask.append(order < a)
    return MultiViewDataset(views, labels, name="planted"), mask
