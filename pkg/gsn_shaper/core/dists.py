"""
Distributions for gsn-shaper

Diagonal Gaussians, factorized Bernoullis and the standard-normal prior,
with exact log-densities, the closed-form KL to the prior and
reparameterized sampling. Noise is always supplied by the caller.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import expit

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import Tensor
from gsn_shaper.exceptions import DomainError, ShapeError

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class DiagGaussian:
    """Per-row diagonal Gaussian; mean and logvar are n×k."""
    mean: Tensor
    logvar: Tensor

    def __post_init__(self):
        self.mean, self.logvar = ad.lift(self.mean, self.logvar)
        if self.mean.shape != self.logvar.shape:
            raise ShapeError("DiagGaussian", self.mean.shape, self.logvar.shape)

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]


@dataclass
class BernoulliVec:
    """Factorized Bernoulli with per-entry logits."""
    logits: Tensor

    def __post_init__(self):
        (self.logits,) = ad.lift(self.logits)

    @property
    def probs(self) -> np.ndarray:
        return expit(self.logits.value)

    @property
    def dim(self) -> int:
        return self.logits.shape[-1]


@dataclass(frozen=True)
class StdPrior:
    """Isotropic standard normal over k dimensions."""
    dim: int

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.dim))


ObsDist = Union[DiagGaussian, BernoulliVec]


def gauss_log_prob(x: ad.ArrayLike, d: DiagGaussian) -> Tensor:
    """Per-row log density."""
    x, mean, logvar = ad.lift(x, d.mean, d.logvar)
    if x.shape != mean.shape:
        raise ShapeError("gauss_log_prob", x.shape, mean.shape)
    sq = ad.mul(ad.square(ad.sub(x, mean)), ad.exp(ad.neg(logvar)))
    per_entry = ad.sub(ad.mul(ad.add(logvar, sq), -0.5), HALF_LOG_2PI)
    return ad.sum(per_entry, axis=-1)


def gauss_sample_reparam(d: DiagGaussian, noise: ad.ArrayLike) -> Tensor:
    """mean + exp(logvar / 2) * noise."""
    mean, logvar, noise = ad.lift(d.mean, d.logvar, noise)
    if noise.shape != mean.shape:
        raise ShapeError("gauss_sample_reparam", mean.shape, noise.shape)
    return ad.add(mean, ad.mul(ad.exp(ad.mul(logvar, 0.5)), noise))


def kl_gauss_to_std(d: DiagGaussian) -> Tensor:
    """Per-row KL(d || N(0, I))."""
    terms = ad.sub(ad.sub(ad.add(ad.square(d.mean), ad.exp(d.logvar)), 1.0), d.logvar)
    return ad.mul(ad.sum(terms, axis=-1), 0.5)


def bern_log_prob(x: ad.ArrayLike, d: BernoulliVec) -> Tensor:
    """Per-row log mass, as -(x softplus(-l) + (1 - x) softplus(l))."""
    x, logits = ad.lift(x, d.logits)
    if x.shape != logits.shape:
        raise ShapeError("bern_log_prob", x.shape, logits.shape)
    if not np.all((x.value == 0.0) | (x.value == 1.0)):
        raise DomainError("Bernoulli targets must be 0 or 1")
    on = ad.mul(x, ad.softplus(ad.neg(logits)))
    off = ad.mul(ad.sub(1.0, x), ad.softplus(logits))
    return ad.neg(ad.sum(ad.add(on, off), axis=-1))


def log_prob(x: ad.ArrayLike, d: ObsDist) -> Tensor:
    if isinstance(d, BernoulliVec):
        return bern_log_prob(x, d)
    return gauss_log_prob(x, d)
