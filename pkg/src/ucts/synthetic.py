"""Benchmark data models with known conditional means."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, FeatureSchema, as_generator


class SyntheticModel:
    """Interface: feature sampler, conditional means ``mu`` and response sampler."""

    K: int
    schema: FeatureSchema
    name: str

    def sample_features(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mu(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_responses(self, X: np.ndarray, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def optimal_policy(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.mu(X), axis=1) + 1

    def sample(self, n_per_treatment: int, seed) -> Dataset:
        """Balanced randomized experiment with ``n_per_treatment`` rows per arm."""
        if n_per_treatment < 1:
            raise ValueError("n_per_treatment must be >= 1")
        rng = as_generator(seed)
        n = n_per_treatment * self.K
        X = self.sample_features(n, rng)
        t = np.repeat(np.arange(1, self.K + 1), n_per_treatment)
        rng.shuffle(t)
        y = self.sample_responses(X, t, rng)
        return Dataset(self.schema, X, t, y, np.full(self.K, 1.0 / self.K))

    def describe(self) -> str:
        return f"model={self.name}"


class TwoDModel(SyntheticModel):
    """``X1 ~ U[0, 100]``, ``X2`` uniform on {A, B, C}, two treatments.

    Treatment 1 responds ``U[0, X1]``; treatment 2 responds ``0.8 U[0, X1] + 5``
    when ``X2 = B`` and ``1.2 U[0, X1] - 5`` otherwise.
    """

    K = 2
    name = "2d"
    schema = FeatureSchema.from_pairs([("x1", "numeric"), ("x2", ["A", "B", "C"])])

    def sample_features(self, n, rng):
        return np.column_stack([rng.uniform(0.0, 100.0, n), rng.integers(0, 3, n).astype(np.float64)])

    def mu(self, X):
        X = np.asarray(X, dtype=np.float64)
        x1, is_b = X[:, 0], X[:, 1] == 1
        return np.column_stack([x1 / 2, np.where(is_b, 0.4 * x1 + 5, 0.6 * x1 - 5)])

    def sample_responses(self, X, t, rng):
        x1, is_b = X[:, 0], X[:, 1] == 1
        u = rng.uniform(0.0, 1.0, x1.shape[0]) * x1
        arm2 = np.where(is_b, 0.8 * u + 5, 1.2 * u - 5)
        return np.where(np.asarray(t) == 1, u, arm2)


def sample_2d(n_per_treatment: int, seed) -> Dataset:
    return TwoDModel().sample(n_per_treatment, seed)


def oracle_2d_values():
    """``(value of either fixed arm, value of the optimal rule)`` for the 2-D model.

    Each arm averages ``E[X1] / 2 = 25``. The optimal rule switches at
    ``X1 = 50`` for every level of ``X2``; on B the integral is
    ``(int_0^50 (0.4x + 5) dx + int_50^100 x/2 dx) / 100 = 26.25`` and on A, C
    ``(int_0^50 x/2 dx + int_50^100 (0.6x - 5) dx) / 100 = 26.25``.
    """
    return 25.0, 26.25


@dataclass
class HighDimModel(SyntheticModel):
    """``Y = f(X) + U[0, a X_t] + N(0, sigma^2)`` on ``[0, 10]^d`` with four treatments.

    ``f`` is a seeded mixture of exponential bumps
    ``sum_i w_i exp(-||x - c_i|| / l_i)`` with centres uniform in the cube,
    weights in [0.5, 1.5] and length scales in [8, 12]. ``sigma`` is twice the
    mean treatment effect, ``2 * a * 10 / 4``.
    """

    d: int = 50
    effect_scale: float = 1.0
    n_components: int = 50
    mixture_seed: int = 20170901
    K: int = 4
    name: str = "50d"
    centers: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    lengths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.d < self.K:
            raise ValueError(f"d must be >= {self.K}")
        if self.effect_scale < 0:
            raise ValueError("effect_scale must be >= 0")
        rng = np.random.default_rng(self.mixture_seed)
        self.centers = rng.uniform(0.0, 10.0, (self.n_components, self.d))
        self.weights = rng.uniform(0.5, 1.5, self.n_components)
        self.lengths = rng.uniform(8.0, 12.0, self.n_components)
        self.schema = FeatureSchema.from_pairs([(f"x{j + 1}", "numeric") for j in range(self.d)])

    @property
    def noise_sd(self) -> float:
        # mean of U[0, a X_t] with X_t ~ U[0, 10]
        return 2.0 * self.effect_scale * 10.0 / 4.0

    def f(self, X):
        X = np.asarray(X, dtype=np.float64)
        sq = (X * X).sum(axis=1)[:, None] + (self.centers ** 2).sum(axis=1)[None, :] - 2.0 * X @ self.centers.T
        dist = np.sqrt(np.maximum(sq, 0.0))
        return np.exp(-dist / self.lengths[None, :]) @ self.weights

    def sample_features(self, n, rng):
        return rng.uniform(0.0, 10.0, (n, self.d))

    def mu(self, X):
        X = np.asarray(X, dtype=np.float64)
        return self.f(X)[:, None] + self.effect_scale * X[:, : self.K] / 2

    def sample_responses(self, X, t, rng):
        t = np.asarray(t)
        x_t = X[np.arange(X.shape[0]), t - 1]
        effect = rng.uniform(0.0, 1.0, X.shape[0]) * self.effect_scale * x_t
        return self.f(X) + effect + rng.normal(0.0, self.noise_sd, X.shape[0])

    def optimal_policy(self, X):
        return np.argmax(np.asarray(X)[:, : self.K], axis=1) + 1

    def describe(self) -> str:
        return (f"model={self.name} d={self.d} effect_scale={self.effect_scale!r} "
                f"n_components={self.n_components} mixture_seed={self.mixture_seed} "
                f"noise_sd={self.noise_sd!r}")


def sample_50d(n_per_treatment: int, model: HighDimModel = None, seed=0) -> Dataset:
    return (model or HighDimModel()).sample(n_per_treatment, seed)


def oracle_policy_value(model: SyntheticModel, policy, mc_samples: int, seed, chunk: int = 100_000):
    """Monte Carlo ``E[mu(X, policy(X))]`` and its standard error.

    ``policy`` maps a feature matrix to 1-based treatment ids.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    rng = as_generator(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_samples:
        n = min(chunk, mc_samples - done)
        X = model.sample_features(n, rng)
        chosen = np.asarray(policy(X), dtype=np.int64)
        if chosen.shape != (n,) or chosen.min() < 1 or chosen.max() > model.K:
            raise ValueError(f"policy must return treatment ids in 1..{model.K}")
        v = model.mu(X)[np.arange(n), chosen - 1]
        total += float(v.sum())
        total_sq += float((v * v).sum())
        done += n
    mean = total / mc_samples
    if mc_samples < 2:
        return mean, 0.0
    var = max(total_sq - mc_samples * mean * mean, 0.0) / (mc_samples - 1)
    return mean, math.sqrt(var / mc_samples)


def constant_policy(t: int):
    def policy(X):
        return np.full(np.asarray(X).shape[0], t, dtype=np.int64)
    return policy


MODELS = {"2d": TwoDModel, "50d": HighDimModel}


def get_model(name: str, **kwargs) -> SyntheticModel:
    try:
        return MODELS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown synthetic model {name!r}; choose from {sorted(MODELS)}") from None
