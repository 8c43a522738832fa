"""t-SNE from scratch.

Gaussian conditional affinities with per-point bisection to the target
perplexity, symmetrized joint P, Student-t low-dimensional Q, and gradient
descent with momentum, per-dimension gains, and early exaggeration. The KL
trace is always reported against the un-exaggerated P.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

_EPS = 1e-12


@dataclass(frozen=True)
class TSNEConfig:
    perplexity: float = 30.0
    n_iter: int = 600
    learning_rate: float = 200.0
    momentum: float = 0.8
    initial_momentum: float = 0.5
    early_exaggeration: float = 12.0
    exaggeration_iter: int = 120
    rng_seed: int = 0

    def validate(self, n_points: int) -> None:
        if self.perplexity <= 1:
            raise ValueError("perplexity must be > 1")
        if n_points <= 3 * self.perplexity:
            raise ValueError(
                f"need n > 3*perplexity points, got n={n_points}, "
                f"perplexity={self.perplexity}"
            )
        if self.n_iter <= self.exaggeration_iter:
            raise ValueError("n_iter must exceed the exaggeration duration")


@dataclass
class TSNEResult:
    embedding: np.ndarray       # (n, 2)
    kl_trace: List[float]       # per-iteration KL against true P
    achieved_perplexity: np.ndarray  # per point

    @property
    def final_kl(self) -> float:
        return self.kl_trace[-1]


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = (x ** 2).sum(axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _row_entropy_and_p(d_row: np.ndarray, beta: float, i: int) -> Tuple[float, np.ndarray]:
    """Shannon entropy (nats) and conditional probabilities for one point."""
    p = np.exp(-d_row * beta)
    p[i] = 0.0
    total = p.sum()
    if total <= 0:
        return 0.0, p
    p /= total
    # H = sum(beta * d * p) + log(total) in nats
    nz = p > 0
    h = float(-(p[nz] * np.log(p[nz])).sum())
    return h, p


def conditional_probabilities(
    x: np.ndarray, perplexity: float, tol: float = 1e-6, max_iter: int = 64
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-point bisection on the Gaussian precision to hit the perplexity.

    Returns (P_conditional, achieved perplexities); rows of P sum to 1.
    """
    d = _squared_distances(np.asarray(x, dtype=np.float64))
    n = d.shape[0]
    target_h = float(np.log(perplexity))
    p_cond = np.zeros((n, n))
    achieved = np.zeros(n)
    for i in range(n):
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        h, p = _row_entropy_and_p(d[i], beta, i)
        for _ in range(max_iter):
            if abs(h - target_h) < tol:
                break
            if h > target_h:  # too spread out -> sharpen
                beta_lo = beta
                beta = beta * 2.0 if np.isinf(beta_hi) else (beta_lo + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else (beta_lo + beta_hi) / 2.0
            h, p = _row_entropy_and_p(d[i], beta, i)
        p_cond[i] = p
        achieved[i] = np.exp(h)
    return p_cond, achieved


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def tsne(features: np.ndarray, config: TSNEConfig = TSNEConfig()) -> TSNEResult:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n = x.shape[0]
    config.validate(n)
    if np.allclose(_squared_distances(x), 0.0):
        raise ValueError("degenerate input: all rows identical")

    p_cond, achieved = conditional_probabilities(x, config.perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    p = np.maximum(p, _EPS)

    rng = np.random.default_rng(config.rng_seed)
    y = 1e-4 * rng.standard_normal((n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    kl_trace: List[float] = []

    def q_of(pos: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        num = 1.0 / (1.0 + _squared_distances(pos))
        np.fill_diagonal(num, 0.0)
        return num, np.maximum(num / num.sum(), _EPS)

    for it in range(config.n_iter):
        exaggerating = it < config.exaggeration_iter
        p_eff = p * config.early_exaggeration if exaggerating else p

        num, q = q_of(y)
        kl_trace.append(_kl(p, q))  # KL at the pre-update position; [0] is the init

        pq = (p_eff - q) * num
        grad = 4.0 * ((pq.sum(axis=1)[:, None] * y) - pq @ y)

        momentum = config.initial_momentum if exaggerating else config.momentum
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - config.learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)

    _, q = q_of(y)
    kl_trace.append(_kl(p, q))
    return TSNEResult(embedding=y, kl_trace=kl_trace, achieved_perplexity=achieved)
