"""
Simple GSN for gsn-shaper

The generative chain: the corruption q_phi(z|x) (encoder), the
reconstruction p_theta(x|z) (decoder) and the prior p_*(z). Provides the
transition operator, the walkback pair sampler and the chain unroller
used for backpropagation through time.

z_t depends on the past only through x_{t-1}; the encoder never sees
z_{t-1}.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import ndtr

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import Tape, Tensor
from gsn_shaper.core.dists import BernoulliVec, DiagGaussian, ObsDist, StdPrior, gauss_sample_reparam
from gsn_shaper.core.nets import Bound, Mlp, ParamStore, gaussian_head, resolve_params
from gsn_shaper.exceptions import ShapeError
from gsn_shaper.utils.rng import SeedLike, as_rng, split

DecoderFamily = Literal["gaussian", "bernoulli"]


class SimpleGsn:
    """Encoder, decoder and prior of a Simple GSN sharing one parameter store."""

    def __init__(self, encoder: Mlp, decoder: Mlp, family: DecoderFamily = "gaussian"):
        if encoder.store is not decoder.store:
            raise ValueError("encoder and decoder must share a parameter store")
        k_z = encoder.widths[-1] // 2
        if decoder.widths[0] != k_z:
            raise ShapeError("decoder input", (decoder.widths[0],), (k_z,))
        self.encoder = encoder
        self.decoder = decoder
        self.family = family
        self.d_x = encoder.widths[0]
        self.k_z = k_z
        self.prior = StdPrior(k_z)

    @classmethod
    def create(cls, d_x: int, k_z: int, hidden: Sequence[int] = (32, 32),
               family: DecoderFamily = "gaussian", seed: int = 0) -> SimpleGsn:
        store = ParamStore()
        out_x = 2 * d_x if family == "gaussian" else d_x
        encoder = Mlp.init([d_x, *hidden, 2 * k_z], seed, store=store, prefix="enc", stream=0)
        decoder = Mlp.init([k_z, *hidden, out_x], seed, store=store, prefix="dec", stream=1)
        return cls(encoder, decoder, family)

    @classmethod
    def from_store(cls, store: ParamStore, family: DecoderFamily = "gaussian") -> SimpleGsn:
        return cls(Mlp.from_store(store, "enc"), Mlp.from_store(store, "dec"), family)

    @property
    def store(self) -> ParamStore:
        return self.encoder.store

    def bind(self, tape: Tape, frozen: bool = False) -> Bound:
        return self.store.bind(tape, frozen=frozen)

    def encode(self, x: ad.ArrayLike, params: Optional[Bound] = None) -> DiagGaussian:
        return encode(self, x, params)

    def decode(self, z: ad.ArrayLike, params: Optional[Bound] = None) -> ObsDist:
        return decode(self, z, params)


@dataclass
class ChainNoise:
    """
    Standard-normal draws injected at each step of a chain. `extra` holds,
    per step, (n_samples - 1) further latent draws used only to average
    the reconstruction term of the free energy.
    """
    z: List[np.ndarray]
    x: List[np.ndarray]
    extra: List[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.z)

    @property
    def n_samples(self) -> int:
        return 1 + (self.extra[0].shape[0] if self.extra else 0)

    @classmethod
    def draw(cls, rng: np.random.Generator, steps: int, n: int, k_z: int, d_x: int,
             n_samples: int = 1) -> ChainNoise:
        z, x = [], []
        for _ in range(steps):
            z.append(rng.standard_normal((n, k_z)))
            x.append(rng.standard_normal((n, d_x)))
        # after the chain noise: the chain draws are the same for every n_samples
        extra = [rng.standard_normal((n_samples - 1, n, k_z)) for _ in range(steps)] if n_samples > 1 else []
        return cls(z, x, extra)

    @classmethod
    def zeros(cls, steps: int, n: int, k_z: int, d_x: int, n_samples: int = 1) -> ChainNoise:
        extra = [np.zeros((n_samples - 1, n, k_z)) for _ in range(steps)] if n_samples > 1 else []
        return cls([np.zeros((n, k_z)) for _ in range(steps)], [np.zeros((n, d_x)) for _ in range(steps)], extra)

    def suffix(self, t: int) -> ChainNoise:
        return ChainNoise(self.z[t:], self.x[t:], self.extra[t:])


class Transition(NamedTuple):
    x: Tensor
    z: Tensor
    encoding: DiagGaussian
    decoding: ObsDist


@dataclass
class Trajectory:
    """Unrolled chain x_0, z_1, x_1, ..., z_T, x_T with its tape."""
    states: List[Tensor]
    latents: List[Tensor]
    encodings: List[DiagGaussian]
    decodings: List[ObsDist]
    noise: ChainNoise
    tape: Tape

    @property
    def length(self) -> int:
        return len(self.latents)

    def state_values(self) -> np.ndarray:
        """Array of shape (T + 1, n, d_x)."""
        return np.stack([s.value for s in self.states])

    def emitted(self) -> Tensor:
        """x_1..x_T stacked row-wise, still on the tape."""
        return ad.concat_rows(self.states[1:])


@dataclass
class WalkbackPairs:
    """Training pairs (x, z_hat) collected by walkback."""
    pairs: List[Tuple[np.ndarray, np.ndarray]]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def latents(self) -> np.ndarray:
        return np.stack([z for _, z in self.pairs]) if self.pairs else np.empty((0,))


def encode(g: SimpleGsn, x: ad.ArrayLike, params: Optional[Bound] = None) -> DiagGaussian:
    """q_phi(z | x) for every row of x."""
    x, params = resolve_params(g.store, x, params)
    if x.ndim != 2 or x.shape[1] != g.d_x:
        raise ShapeError("encode", x.shape, (None, g.d_x))
    mean, logvar = gaussian_head(g.encoder, x, params)
    return DiagGaussian(mean, logvar)


def decode(g: SimpleGsn, z: ad.ArrayLike, params: Optional[Bound] = None) -> ObsDist:
    """p_theta(x | z) for every row of z."""
    z, params = resolve_params(g.store, z, params)
    if z.ndim != 2 or z.shape[1] != g.k_z:
        raise ShapeError("decode", z.shape, (None, g.k_z))
    if g.family == "bernoulli":
        return BernoulliVec(g.decoder.forward(z, params))
    mean, logvar = gaussian_head(g.decoder, z, params)
    return DiagGaussian(mean, logvar)


def sample_obs(d: ObsDist, noise: ad.ArrayLike) -> Tensor:
    """Draw x from a decoder output. Bernoulli draws threshold the normal CDF of the noise and carry no gradient."""
    if isinstance(d, BernoulliVec):
        noise = noise.value if isinstance(noise, Tensor) else np.asarray(noise, dtype=np.float64)
        if noise.shape != d.logits.shape:
            raise ShapeError("sample_obs", d.logits.shape, noise.shape)
        return d.logits.tape.constant((ndtr(noise) < d.probs).astype(np.float64))
    return gauss_sample_reparam(d, noise)


def transition_sample(g: SimpleGsn, x_t: ad.ArrayLike, noise_z: ad.ArrayLike, noise_x: ad.ArrayLike,
                      params: Optional[Bound] = None) -> Transition:
    """One step of T_theta: z ~ q_phi(z | x_t), then x_{t+1} ~ p_theta(x | z)."""
    x_t, params = resolve_params(g.store, x_t, params)
    q = encode(g, x_t, params)
    z = gauss_sample_reparam(q, noise_z)
    p = decode(g, z, params)
    return Transition(sample_obs(p, noise_x), z, q, p)


def walkback_pairs(g: SimpleGsn, x: np.ndarray, k_burn_in: int, k_roll_out: int, rng: SeedLike) -> WalkbackPairs:
    """
    Walkback for a general GSN, run on a Simple GSN.

    The burn-in loop is kept for fidelity: it resamples z_hat, but the
    Simple GSN encoder ignores z_hat, so it never changes the pairs. It
    draws from its own stream so roll-out draws do not depend on
    k_burn_in. z_hat starts at the zero vector.
    """
    if k_burn_in < 0 or k_roll_out < 0:
        raise ValueError("k_burn_in and k_roll_out must be non-negative")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    burn_rng, roll_rng = split(rng, 2)
    params = g.bind(Tape(), frozen=True)
    n = x.shape[0]

    z_hat = np.zeros((n, g.k_z))
    for _ in range(k_burn_in):
        q = encode(g, x, params)
        z_hat = gauss_sample_reparam(q, burn_rng.standard_normal((n, g.k_z))).numpy()

    pairs = []
    x_hat = x
    for _ in range(k_roll_out):
        q = encode(g, x_hat, params)
        z_hat = gauss_sample_reparam(q, roll_rng.standard_normal((n, g.k_z))).numpy()
        p = decode(g, z_hat, params)
        x_hat = sample_obs(p, roll_rng.standard_normal((n, g.d_x))).numpy()
        pairs.append((x.copy(), z_hat))
    return WalkbackPairs(pairs)


def unroll_chain(g: SimpleGsn, x0: ad.ArrayLike, steps: int,
                 noise: Union[ChainNoise, SeedLike], params: Optional[Bound] = None) -> Trajectory:
    """Apply transition_sample `steps` times, keeping the whole graph for BPTT."""
    if steps < 1:
        raise ValueError(f"unroll length must be at least 1, got {steps}")
    x, params = resolve_params(g.store, x0, params)
    n = x.shape[0]
    if not isinstance(noise, ChainNoise):
        noise = ChainNoise.draw(as_rng(noise), steps, n, g.k_z, g.d_x)
    if len(noise) < steps:
        raise ValueError(f"noise covers {len(noise)} steps, {steps} requested")

    states, latents, encodings, decodings = [x], [], [], []
    for t in range(steps):
        step = transition_sample(g, x, noise.z[t], noise.x[t], params)
        x = step.x
        states.append(step.x)
        latents.append(step.z)
        encodings.append(step.encoding)
        decodings.append(step.decoding)
    return Trajectory(states, latents, encodings, decodings, noise, x.tape)


def replay_suffix(g: SimpleGsn, trajectory: Trajectory, t: int) -> Trajectory:
    """Re-run a trajectory from x_t with its recorded noise."""
    return unroll_chain(g, trajectory.states[t].numpy(), trajectory.length - t, trajectory.noise.suffix(t))
