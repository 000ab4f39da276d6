"""
Variational free energy for gsn-shaper

F(x; q, p, p_*) = -E_q[log p(x|z)] + KL(q(z|x) || p_*(z)) >= -log p(x; p_*)

Monte Carlo (reparameterized, differentiable) for the continuous models,
exact sums for finite tables, and the transcoder form in which q reads
an input y from another space while p reconstructs x.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import Tensor
from gsn_shaper.core.dists import DiagGaussian, ObsDist, StdPrior, gauss_sample_reparam, kl_gauss_to_std, log_prob
from gsn_shaper.core.nets import Bound, resolve_params
from gsn_shaper.exceptions import ShapeError, SupportError
from gsn_shaper.services.exact import CondTable, Dist
from gsn_shaper.services.sgsn import SimpleGsn, decode, encode
from gsn_shaper.utils.rng import SeedLike, as_rng

Scalar = Union[Tensor, float]
Encoder = Callable[[Tensor], DiagGaussian]
Decoder = Callable[[Tensor], ObsDist]


def _float(value: Scalar) -> float:
    return value.item() if isinstance(value, Tensor) else float(value)


@dataclass(frozen=True)
class VfeBreakdown:
    """Reconstruction and KL terms of the free energy; total = reconstruction + kl."""
    reconstruction: Scalar
    kl: Scalar
    total: Scalar

    def as_floats(self) -> Tuple[float, float, float]:
        return _float(self.reconstruction), _float(self.kl), _float(self.total)


def _latent_noise(noise: Union[np.ndarray, SeedLike], n_samples: int, n: int, k: int) -> np.ndarray:
    if isinstance(noise, np.ndarray):
        if noise.shape == (n, k) and n_samples == 1:
            noise = noise[None]
        if noise.shape != (n_samples, n, k):
            raise ShapeError("vfe noise", noise.shape, (n_samples, n, k))
        return noise
    return as_rng(noise).standard_normal((n_samples, n, k))


def vfe_transcode(x: ad.ArrayLike, y: ad.ArrayLike, encoder: Encoder, decoder: Decoder, prior: StdPrior,
                  n_samples: int = 1, noise: Union[np.ndarray, SeedLike] = 0) -> VfeBreakdown:
    """
    Free energy of x with the inference distribution conditioned on y.
    Terms are batch means; the reconstruction averages n_samples
    reparameterized draws.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    q = encoder(y)
    if q.dim != prior.dim:
        raise ShapeError("vfe_transcode prior", (q.dim,), (prior.dim,))
    x, _ = ad.lift(x, q.mean)
    if x.shape[0] != q.mean.shape[0]:
        raise ShapeError("vfe_transcode batch", x.shape, q.mean.shape)

    eps = _latent_noise(noise, n_samples, q.mean.shape[0], q.dim)
    recon_terms = []
    for s in range(n_samples):
        p = decoder(gauss_sample_reparam(q, eps[s]))
        recon_terms.append(ad.neg(ad.mean(log_prob(x, p))))
    reconstruction = recon_terms[0]
    for term in recon_terms[1:]:
        reconstruction = ad.add(reconstruction, term)
    reconstruction = ad.mul(reconstruction, 1.0 / n_samples)

    kl = ad.mean(kl_gauss_to_std(q))
    return VfeBreakdown(reconstruction, kl, ad.add(reconstruction, kl))


def vfe_mc(g: SimpleGsn, x: ad.ArrayLike, n_samples: int = 1, noise: Union[np.ndarray, SeedLike] = 0,
           params: Optional[Bound] = None) -> VfeBreakdown:
    """Auto-encoding free energy of a Simple GSN on a batch."""
    x, params = resolve_params(g.store, x, params)
    return vfe_transcode(
        x, x,
        lambda y: encode(g, y, params),
        lambda z: decode(g, z, params),
        g.prior, n_samples, noise,
    )


# =============================================================================
# Exact discrete free energy
# =============================================================================

def marginal_exact(P: CondTable, prior: Dist) -> Dist:
    """p(x; p_*) = sum_z P[x | z] prior[z]."""
    if P.shape[1] != prior.size:
        raise ShapeError("marginal_exact", P.shape, (prior.size,))
    return Dist(P.table @ prior.probs)


def derived_joint(P: CondTable, prior: Dist) -> np.ndarray:
    """p(x, z; p_*) = P[x | z] prior[z]."""
    if P.shape[1] != prior.size:
        raise ShapeError("derived_joint", P.shape, (prior.size,))
    return P.table * prior.probs[None, :]


def derived_posterior(x: int, P: CondTable, prior: Dist) -> np.ndarray:
    """p(z | x; p_*) = P[x | z] prior[z] / p(x; p_*)."""
    row = derived_joint(P, prior)[x]
    total = row.sum()
    if total <= 0.0:
        raise SupportError(f"observable state {x} has zero marginal probability", x)
    return row / total


def _check_discrete(x: int, Q: CondTable, P: CondTable, prior: Dist):
    if Q.shape != (P.shape[1], P.shape[0]) or prior.size != P.shape[1]:
        raise ShapeError("discrete free energy", Q.shape, P.shape, (prior.size,))
    if not 0 <= x < P.shape[0]:
        raise ShapeError(f"state index {x}", (P.shape[0],))


def _xlogy_ratio(q: np.ndarray, denom: np.ndarray, what: str) -> float:
    """sum_z q log(q / denom) with 0 log 0 := 0."""
    active = q > 0
    bad = np.flatnonzero(active & (denom <= 0))
    if bad.size:
        raise SupportError(f"q puts mass on latent state {bad[0]} where {what} is zero", int(bad[0]))
    return float(np.sum(q[active] * (np.log(q[active]) - np.log(denom[active]))))


def vfe_exact_discrete(x: int, Q: CondTable, P: CondTable, prior: Dist) -> VfeBreakdown:
    _check_discrete(x, Q, P, prior)
    q = Q.column(x)
    likelihood = P.table[x]
    active = q > 0
    bad = np.flatnonzero(active & (likelihood <= 0))
    if bad.size:
        raise SupportError(f"q puts mass on latent state {bad[0]} where p(x|z) is zero", int(bad[0]))
    reconstruction = float(-np.sum(q[active] * np.log(likelihood[active])))
    kl = _xlogy_ratio(q, prior.probs, "the prior")
    return VfeBreakdown(reconstruction, kl, reconstruction + kl)


def tightness_gap(x: int, Q: CondTable, P: CondTable, prior: Dist) -> float:
    """KL(q(z|x) || p(z|x; p_*)), the slack of the free-energy bound."""
    _check_discrete(x, Q, P, prior)
    return _xlogy_ratio(Q.column(x), derived_posterior(x, P, prior), "the derived posterior")
