"""
Networks for gsn-shaper

Parameter containers and tanh multi-layer perceptrons used for the
encoder q_phi(z|x), the decoder p_theta(x|z) and the guide f_psi(x).
"""
from __future__ import annotations
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import Gradients, Tape, Tensor
from gsn_shaper.exceptions import ShapeError
from gsn_shaper.utils.rng import make_rng

LOGVAR_CLAMP = 8.0

Bound = Mapping[str, Tensor]


class ParamStore:
    """Named float64 parameters; iteration is ordered by name."""

    def __init__(self):
        self._params: Dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray):
        if name in self._params:
            raise ValueError(f"Parameter '{name}' already exists")
        self._params[name] = np.array(value, dtype=np.float64)

    def set(self, name: str, value: np.ndarray):
        """Replace a parameter's values; its shape is fixed at creation."""
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._params[name].shape:
            raise ShapeError(f"set {name}", self._params[name].shape, value.shape)
        self._params[name] = value.copy()

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return sorted(self._params)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, self._params[name]

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self._params.items()}

    def restore(self, snapshot: Mapping[str, np.ndarray]):
        for name, value in snapshot.items():
            self.set(name, value)

    def copy(self) -> ParamStore:
        """Independent copy, safe to share with evaluation threads."""
        clone = ParamStore()
        for name, value in self.items():
            clone.add(name, value)
        return clone

    def bind(self, tape: Tape, frozen: bool = False) -> Dict[str, Tensor]:
        """
        Place every parameter on the tape, once per tape. Frozen bindings
        are constants and receive no gradient.
        """
        key = id(self) * 2 + int(frozen)
        bound = tape.bindings.get(key)
        if bound is None:
            if frozen:
                bound = {name: tape.constant(value) for name, value in self.items()}
            else:
                bound = {name: tape.leaf(value, name=name) for name, value in self.items()}
            tape.bindings[key] = bound
        return bound

    def gradients(self, grads: Gradients, bound: Bound) -> Dict[str, np.ndarray]:
        """Per-name gradients for a binding produced by bind()."""
        return {name: grads[tensor] for name, tensor in bound.items()}


def resolve_params(store: ParamStore, anchor: ad.ArrayLike, params: Optional[Bound]) -> Tuple[Tensor, Bound]:
    """Lift `anchor` onto the tape of `params` (or its own tape) and bind the store there."""
    if params is not None:
        tape = next(iter(params.values())).tape
        x = anchor if isinstance(anchor, Tensor) else tape.constant(anchor)
        return x, params
    x = anchor if isinstance(anchor, Tensor) else Tape().constant(anchor)
    return x, store.bind(x.tape)


class Mlp:
    """Affine-tanh layers followed by a final affine layer."""

    def __init__(self, widths: Sequence[int], store: ParamStore, prefix: str = "mlp"):
        self.widths = list(widths)
        self.store = store
        self.prefix = prefix

    @classmethod
    def init(cls, widths: Sequence[int], seed: int, store: Optional[ParamStore] = None,
             prefix: str = "mlp", stream: int = 0) -> Mlp:
        """Uniform Glorot weights in [-s, s], s = sqrt(6 / (fan_in + fan_out)); zero biases."""
        widths = list(widths)
        if len(widths) < 2 or any(int(w) <= 0 for w in widths):
            raise ValueError(f"MLP needs at least two positive widths, got {widths}")
        store = store if store is not None else ParamStore()
        rng = make_rng(seed, stream)
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            s = np.sqrt(6.0 / (fan_in + fan_out))
            store.add(f"{prefix}.w{i}", rng.uniform(-s, s, size=(fan_in, fan_out)))
            store.add(f"{prefix}.b{i}", np.zeros(fan_out))
        return cls(widths, store, prefix)

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str) -> Mlp:
        """Recover the layer widths of an MLP already held by a store."""
        widths: List[int] = []
        i = 0
        while f"{prefix}.w{i}" in store:
            fan_in, fan_out = store[f"{prefix}.w{i}"].shape
            if widths and widths[-1] != fan_in:
                raise ShapeError(f"{prefix}.w{i}", (widths[-1],), (fan_in,))
            widths = widths or [fan_in]
            widths.append(fan_out)
            i += 1
        if len(widths) < 2:
            raise ValueError(f"No MLP with prefix '{prefix}' in store")
        return cls(widths, store, prefix)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def param_names(self) -> List[str]:
        names = []
        for i in range(self.depth):
            names += [f"{self.prefix}.w{i}", f"{self.prefix}.b{i}"]
        return names

    def forward(self, batch: ad.ArrayLike, params: Optional[Bound] = None) -> Tensor:
        h, params = resolve_params(self.store, batch, params)
        if h.ndim != 2 or h.shape[1] != self.widths[0]:
            raise ShapeError(f"{self.prefix} forward", h.shape, (None, self.widths[0]))
        for i in range(self.depth):
            h = ad.add_rowvec(ad.matmul(h, params[f"{self.prefix}.w{i}"]), params[f"{self.prefix}.b{i}"])
            if i < self.depth - 1:
                h = ad.tanh(h)
        return h


def mlp_init(widths: Sequence[int], seed: int, store: Optional[ParamStore] = None, prefix: str = "mlp") -> Mlp:
    return Mlp.init(widths, seed, store=store, prefix=prefix)


def mlp_forward(net: Mlp, batch: ad.ArrayLike, params: Optional[Bound] = None) -> Tensor:
    return net.forward(batch, params)


def clamp_logvar(raw: ad.ArrayLike) -> Tensor:
    """Soft clamp c * tanh(raw / c) into (-c, c)."""
    return ad.mul(ad.tanh(ad.mul(raw, 1.0 / LOGVAR_CLAMP)), LOGVAR_CLAMP)


def gaussian_head(net: Mlp, batch: ad.ArrayLike, params: Optional[Bound] = None) -> Tuple[Tensor, Tensor]:
    """Split a 2k-wide output into (mean, clamped log-variance)."""
    if net.widths[-1] % 2:
        raise ValueError(f"Gaussian head needs an even output width, got {net.widths[-1]}")
    out = net.forward(batch, params)
    k = net.widths[-1] // 2
    return ad.columns(out, 0, k), clamp_logvar(ad.columns(out, k, 2 * k))
