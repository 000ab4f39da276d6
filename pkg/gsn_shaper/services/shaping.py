"""
Collaborative shaping for gsn-shaper

The guide f_psi is trained by logistic regression to separate data
(positive class) from generated samples (negative class), so at its
optimum it equals log D(x)/G(x). The generator is trained on the
one-sided loss max(0, -f_psi(x)), which moves only over-dense generated
mass and leaves under-dense regions alone. Both objectives also come in
exact finite-space form for checking the joint-optimality result.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Optional, Sequence
import logging

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, softmax

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import Tape, Tensor
from gsn_shaper.core.nets import Bound, Mlp, ParamStore, resolve_params
from gsn_shaper.exceptions import ShapeError, SupportError
from gsn_shaper.services.exact import Dist, total_variation
from gsn_shaper.utils.rng import make_rng

logger = logging.getLogger(__name__)


class Guide:
    """Scalar network f_psi: X -> R."""

    def __init__(self, net: Mlp):
        if net.widths[-1] != 1:
            raise ShapeError("guide output", (net.widths[-1],), (1,))
        self.net = net

    @classmethod
    def create(cls, d_x: int, hidden: Sequence[int] = (32, 32), seed: int = 0) -> Guide:
        return cls(Mlp.init([d_x, *hidden, 1], seed, prefix="guide", stream=2))

    @classmethod
    def from_store(cls, store: ParamStore) -> Guide:
        return cls(Mlp.from_store(store, "guide"))

    @property
    def store(self) -> ParamStore:
        return self.net.store

    @property
    def d_x(self) -> int:
        return self.net.widths[0]

    def score(self, x: ad.ArrayLike, params: Optional[Bound] = None) -> Tensor:
        """f_psi(x) per row, shape (n,)."""
        return ad.sum(self.net.forward(x, params), axis=-1)

    def scores(self, x: np.ndarray) -> np.ndarray:
        """Plain forward values, no gradient bookkeeping."""
        return self.score(x, self.store.bind(Tape(), frozen=True)).numpy()


@dataclass
class GenDist:
    """Finite generator distribution G = softmax(logits)."""
    logits: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    def dist(self) -> Dist:
        return Dist(self.probs)


def binomial_deviance(f: ad.ArrayLike) -> Tensor:
    """b(f) = log(1 + exp(-f))."""
    return ad.softplus(ad.neg(f))


def _batch(name: str, batch: ad.ArrayLike) -> int:
    shape = batch.shape if isinstance(batch, Tensor) else np.shape(batch)
    if len(shape) != 2 or shape[0] == 0:
        raise ShapeError(f"{name} (non-empty n×d batch required)", tuple(shape))
    return shape[1]


def loss_f(guide: Guide, data_batch: ad.ArrayLike, gen_batch: ad.ArrayLike,
           params: Optional[Bound] = None) -> Tensor:
    """Logistic loss with equal class priors; generated samples are constants."""
    if _batch("loss_f data", data_batch) != _batch("loss_f generated", gen_batch):
        raise ShapeError("loss_f", np.shape(getattr(data_batch, "value", data_batch)),
                         np.shape(getattr(gen_batch, "value", gen_batch)))
    data, params = resolve_params(guide.store, data_batch, params)
    gen_value = gen_batch.value if isinstance(gen_batch, Tensor) else gen_batch
    gen = data.tape.constant(gen_value)
    on_data = ad.mean(binomial_deviance(guide.score(data, params)))
    on_gen = ad.mean(binomial_deviance(ad.neg(guide.score(gen, params))))
    return ad.add(on_data, on_gen)


def loss_g(guide: Guide, gen_batch: ad.ArrayLike) -> Tensor:
    """Mean of max(0, -f_psi(x)) over generated samples; guide parameters frozen."""
    _batch("loss_g", gen_batch)
    (gen,) = ad.lift(gen_batch)
    frozen = guide.store.bind(gen.tape, frozen=True)
    return ad.mean(ad.relu(ad.neg(guide.score(gen, frozen))))


def moment_match_loss(gen_batch: ad.ArrayLike, data_mean: np.ndarray, data_cov: np.ndarray) -> Tensor:
    """||mean(gen) - data_mean||^2 + ||cov(gen) - data_cov||_F^2 with the unbiased covariance."""
    (gen,) = ad.lift(gen_batch)
    n = gen.shape[0]
    if gen.ndim != 2 or n < 2:
        raise ShapeError("moment_match_loss (at least two rows required)", gen.shape)
    data_mean = np.asarray(data_mean, dtype=np.float64)
    data_cov = np.asarray(data_cov, dtype=np.float64)
    if data_mean.shape != (gen.shape[1],) or data_cov.shape != (gen.shape[1], gen.shape[1]):
        raise ShapeError("moment_match_loss", gen.shape, data_mean.shape, data_cov.shape)
    mu = ad.mean(gen, axis=0)
    centered = ad.add_rowvec(gen, ad.neg(mu))
    cov = ad.mul(ad.matmul(ad.transpose(centered), centered), 1.0 / (n - 1))
    return ad.add(ad.sum(ad.square(ad.sub(mu, data_mean))), ad.sum(ad.square(ad.sub(cov, data_cov))))


# =============================================================================
# Exact finite-space objectives
# =============================================================================

def _deviance(f: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, -f)


def optimal_guide_discrete(D: Dist, G: Dist) -> np.ndarray:
    """f*[x] = log D[x] / G[x] on the common support, 0 elsewhere."""
    if D.size != G.size:
        raise ShapeError("optimal_guide_discrete", (D.size,), (G.size,))
    d_on, g_on = D.probs > 0, G.probs > 0
    mismatch = np.flatnonzero(d_on != g_on)
    if mismatch.size:
        raise SupportError(f"D and G disagree on the support at state {mismatch[0]}", int(mismatch[0]))
    f = np.zeros(D.size)
    f[d_on] = np.log(D.probs[d_on]) - np.log(G.probs[d_on])
    return f


def loss_f_exact(f: np.ndarray, D: Dist, G: Dist) -> float:
    f = np.asarray(f, dtype=np.float64)
    if not f.shape == (D.size,) == (G.size,):
        raise ShapeError("loss_f_exact", f.shape, (D.size,), (G.size,))
    return float(np.sum(D.probs * _deviance(f)) + np.sum(G.probs * _deviance(-f)))


def loss_g_exact(f: np.ndarray, G: Dist) -> float:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (G.size,):
        raise ShapeError("loss_g_exact", f.shape, (G.size,))
    return float(np.sum(G.probs * np.maximum(-f, 0.0)))


def minimize_loss_f(D: Dist, G: Dist, f0: Optional[np.ndarray] = None) -> np.ndarray:
    """Numerically minimize the exact L_f over a free vector f (convex, separable)."""
    d, g = D.probs, G.probs

    def grad(f):
        return -d * expit(-f) + g * expit(f)

    def hess(f):
        return np.diag((d + g) * expit(f) * expit(-f))

    start = np.zeros(D.size) if f0 is None else np.asarray(f0, dtype=np.float64)
    result = minimize(lambda f: loss_f_exact(f, D, G), start, jac=grad, hess=hess,
                      method="Newton-CG", options={"xtol": 1e-14, "maxiter": 1000})
    return result.x


def generator_logit_gradient(logits: np.ndarray, f: np.ndarray) -> np.ndarray:
    """d loss_g_exact / d logits with f held fixed: G * (r - <G, r>), r = max(0, -f)."""
    G = softmax(logits)
    r = np.maximum(-np.asarray(f, dtype=np.float64), 0.0)
    return G * (r - np.dot(G, r))


@dataclass
class ShapingRun:
    """Monitored alternating optimization of the exact objectives."""
    tv: List[float] = field(default_factory=list)
    fixed_point_gradient: float = 0.0
    final: Optional[GenDist] = None

    @property
    def final_tv(self) -> float:
        return self.tv[-1]


def verify_theorem3(D: Dist, iterations: int, step: float, seed: int,
                    initial_logits: Optional[np.ndarray] = None) -> ShapingRun:
    """
    Alternate an exact guide fit f = log D/G with one gradient step of
    the exact L_g on the generator logits. Records TV(G, D) before every
    step and after the last one, and the gradient size at G = D, which
    is exactly zero.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if np.any(D.probs <= 0):
        raise SupportError("target distribution must have full support")

    run = ShapingRun()
    run.fixed_point_gradient = float(np.max(np.abs(
        generator_logit_gradient(np.log(D.probs), optimal_guide_discrete(D, D)))))

    logits = (make_rng(seed).standard_normal(D.size) if initial_logits is None
              else np.array(initial_logits, dtype=np.float64))
    for i in range(iterations):
        G = Dist.normalized(softmax(logits))
        run.tv.append(total_variation(G, D))
        f = optimal_guide_discrete(D, G)
        logits = logits - step * generator_logit_gradient(logits, f)
        if (i + 1) % 1000 == 0:
            logger.debug("theorem3 iteration %d: TV %.3e", i + 1, run.tv[-1])
    run.final = GenDist(logits)
    run.tv.append(total_variation(Dist.normalized(softmax(logits)), D))
    return run
