"""
Exact finite-space oracles for gsn-shaper

Probability tables, transition matrices built from a corruption table
Q (z given x) and a reconstruction table P (x given z), ergodicity
verdicts, stationary distributions and the Gibbs-chain construction
behind the convergence theorem for Simple GSNs. Everything is brute
force linear algebra on small tables.

Tables are column-stochastic: column j holds the distribution given
conditioning state j.
"""
from __future__ import annotations
from dataclasses import dataclass
from math import gcd
from pathlib import Path
from typing import Literal, Optional, Sequence, Tuple, Union
import logging

import networkx as nx
import numpy as np
import pandas as pd
from scipy.linalg import null_space

from gsn_shaper.exceptions import DataFormatError, ErgodicityError, NumericError, ShapeError, SupportError

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
STRUCTURAL_ZERO = 1e-300


@dataclass(frozen=True)
class Dist:
    """Probability vector over m states."""
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ShapeError("Dist", p.shape)
        if np.any(p < 0) or abs(p.sum() - 1.0) > STOCHASTIC_TOL:
            raise SupportError(f"not a distribution (sum {p.sum():.17g}, min {p.min():.3g})")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return self.probs.size

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > STRUCTURAL_ZERO)

    @classmethod
    def uniform(cls, m: int) -> Dist:
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def normalized(cls, weights: Sequence[float]) -> Dist:
        w = np.asarray(weights, dtype=np.float64)
        return cls(w / w.sum())


@dataclass(frozen=True)
class CondTable:
    """Conditional table; column j is a distribution given conditioning state j."""
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        if t.ndim != 2:
            raise ShapeError("CondTable", t.shape)
        if np.any(t < 0):
            raise SupportError("negative entry in conditional table")
        bad = np.flatnonzero(np.abs(t.sum(axis=0) - 1.0) > STOCHASTIC_TOL)
        if bad.size:
            raise SupportError(f"column {bad[0]} sums to {t[:, bad[0]].sum():.17g}", int(bad[0]))
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.table.shape

    def column(self, j: int) -> np.ndarray:
        return self.table[:, j]

    @classmethod
    def normalized(cls, weights: np.ndarray) -> CondTable:
        w = np.asarray(weights, dtype=np.float64)
        return cls(w / w.sum(axis=0, keepdims=True))


@dataclass(frozen=True)
class TransitionMatrix(CondTable):
    """Square column-stochastic matrix, T[x' | x]."""

    def __post_init__(self):
        super().__post_init__()
        if self.table.shape[0] != self.table.shape[1]:
            raise ShapeError("TransitionMatrix", self.table.shape)

    @property
    def size(self) -> int:
        return self.table.shape[0]


@dataclass(frozen=True)
class ErgodicityVerdict:
    """Outcome of is_ergodic with a human-readable witness."""
    kind: Literal["ergodic", "reducible", "periodic"]
    witness: str
    period: int = 1
    unreachable: Optional[Tuple[int, int]] = None

    @property
    def ergodic(self) -> bool:
        return self.kind == "ergodic"

    def __str__(self) -> str:
        return self.witness


def random_table(rows: int, cols: int, rng: np.random.Generator, concentration: float = 1.0) -> CondTable:
    """Full-support random conditional table with Dirichlet columns."""
    return CondTable.normalized(rng.dirichlet(np.full(rows, concentration), size=cols).T)


def total_variation(a: Union[Dist, np.ndarray], b: Union[Dist, np.ndarray]) -> float:
    a = a.probs if isinstance(a, Dist) else np.asarray(a)
    b = b.probs if isinstance(b, Dist) else np.asarray(b)
    return 0.5 * float(np.abs(a - b).sum())


def transition_matrix(P: CondTable, Q: CondTable) -> TransitionMatrix:
    """T[x' | x] = sum_z P[x' | z] Q[z | x]."""
    if P.shape[1] != Q.shape[0] or P.shape[0] != Q.shape[1]:
        raise ShapeError("transition_matrix", P.shape, Q.shape)
    T = P.table @ Q.table
    # renormalize away accumulated rounding so the column sums stay exact to 1e-12
    return TransitionMatrix(T / T.sum(axis=0, keepdims=True))


def support_digraph(T: TransitionMatrix) -> nx.DiGraph:
    """Edge x -> x' wherever T[x' | x] is not a structural zero."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(T.size))
    targets, sources = np.nonzero(T.table > STRUCTURAL_ZERO)
    graph.add_edges_from(zip(sources.tolist(), targets.tolist()))
    return graph


def _period(graph: nx.DiGraph) -> int:
    """gcd of cycle lengths of a strongly connected digraph via BFS levels."""
    root = next(iter(graph.nodes))
    level = nx.single_source_shortest_path_length(graph, root)
    period = 0
    for u, v in graph.edges:
        period = gcd(period, level[u] + 1 - level[v])
    return abs(period)


def is_ergodic(T: TransitionMatrix) -> ErgodicityVerdict:
    """
    Irreducible and aperiodic on the positive-support digraph. A finite
    irreducible chain is positive recurrent, so this decides ergodicity.
    """
    graph = support_digraph(T)
    for source in graph.nodes:
        reached = nx.descendants(graph, source) | {source}
        if len(reached) < T.size:
            target = min(set(graph.nodes) - reached)
            return ErgodicityVerdict(
                "reducible",
                f"reducible (state {source} cannot reach state {target})",
                unreachable=(source, target),
            )
    period = _period(graph)
    if period != 1:
        return ErgodicityVerdict("periodic", f"periodic, period {period}", period=period)
    return ErgodicityVerdict("ergodic", "ergodic")


def stationary_nullspace(T: TransitionMatrix) -> np.ndarray:
    """Direct solve of (T - I) pi = 0, normalized to sum 1."""
    basis = null_space(T.table - np.eye(T.size))
    if basis.shape[1] != 1:
        raise ErgodicityError(f"null space of T - I has dimension {basis.shape[1]}")
    pi = np.abs(basis[:, 0])
    return pi / pi.sum()


def _residual(T: TransitionMatrix, pi: np.ndarray) -> float:
    return float(np.max(np.abs(T.table @ pi - pi)))


def stationary(T: TransitionMatrix, tol: float = 1e-12, max_iter: int = 10_000) -> Dist:
    """
    Power iteration from the uniform vector, cross-checked against the
    null-space solve. Slowly mixing chains that do not settle within
    max_iter steps take the null-space solution when its residual is
    below tol.
    """
    verdict = is_ergodic(T)
    if not verdict.ergodic:
        raise ErgodicityError(verdict)

    direct = stationary_nullspace(T)
    pi = np.full(T.size, 1.0 / T.size)
    for _ in range(max_iter):
        nxt = T.table @ pi
        nxt /= nxt.sum()
        if _residual(T, nxt) < tol:
            pi = nxt
            break
        pi = nxt
    else:
        residual = _residual(T, direct)
        if residual >= tol:
            raise NumericError(f"no stationary solve reached residual {tol}: power iteration stopped "
                               f"after {max_iter} steps, null-space residual {residual:.3g}")
        logger.info("Power iteration did not settle in %d steps; using the null-space solution", max_iter)
        return Dist(direct)

    gap = float(np.max(np.abs(direct - pi)))
    if gap > 1e-8:
        logger.warning("Stationary cross-check disagrees by %.3g", gap)
    return Dist(pi / pi.sum())


def gibbs_joint(D: Dist, Q: CondTable) -> np.ndarray:
    """J[x, z] = D[x] Q[z | x]."""
    if Q.shape[1] != D.size:
        raise ShapeError("gibbs_joint", (D.size,), Q.shape)
    return Q.table.T * D.probs[:, None]


def exact_posterior(D: Dist, Q: CondTable) -> CondTable:
    """P*[x | z] = J[x, z] / sum_x J[x, z]."""
    J = gibbs_joint(D, Q)
    marginal = J.sum(axis=0)
    empty = np.flatnonzero(marginal <= 0.0)
    if empty.size:
        raise SupportError(f"latent state {empty[0]} has zero marginal probability", int(empty[0]))
    return CondTable(J / marginal)


def _restrict(D: Dist, T: TransitionMatrix) -> Tuple[np.ndarray, TransitionMatrix]:
    support = D.support()
    sub = T.table[np.ix_(support, support)]
    return support, TransitionMatrix(sub / sub.sum(axis=0, keepdims=True))


def verify_theorem1(D: Dist, Q: CondTable) -> float:
    """
    Build the exact posterior P*, the chain T = P* Q and its stationary
    distribution; return max |pi - D| over the support of D. States
    outside the support are transient and are dropped before solving.
    """
    P_star = exact_posterior(D, Q)
    T = transition_matrix(P_star, Q)
    support, T_support = _restrict(D, T)
    pi = stationary(T_support)
    return float(np.max(np.abs(pi.probs - D.probs[support])))


def walkback_corruption(P: CondTable, Q: CondTable, k_roll_out: int) -> CondTable:
    """
    Exact corruption W(z | x) realized by walkback: the law of z_hat at a
    uniformly chosen roll-out step, W = (1/k) sum_i Q (P Q)^(i-1).
    """
    if k_roll_out < 1:
        raise ValueError("walkback needs at least one roll-out step")
    T = transition_matrix(P, Q).table
    step = Q.table.copy()
    total = np.zeros_like(step)
    for _ in range(k_roll_out):
        total += step
        step = step @ T
    return CondTable.normalized(total)


def verify_walkback_theorem1(D: Dist, Q: CondTable, P: CondTable, k_roll_out: int) -> float:
    """Theorem-1 residual for the Simple GSN built around the walkback corruption."""
    return verify_theorem1(D, walkback_corruption(P, Q, k_roll_out))


def dispersion(table: CondTable) -> float:
    """Mean entropy (nats) of the columns."""
    t = table.table
    logs = np.log(np.where(t > 0, t, 1.0))
    return float(-(t * logs).sum(axis=0).mean())


# =============================================================================
# CSV I/O
# =============================================================================

def save_table(table: Union[CondTable, Dist], path: Path):
    """Header row = state labels; one column per conditioning index."""
    values = table.table if isinstance(table, CondTable) else table.probs[:, None]
    frame = pd.DataFrame(values, columns=[f"s{j}" for j in range(values.shape[1])])
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def load_table(path: Path) -> np.ndarray:
    try:
        frame = pd.read_csv(path, dtype=np.float64, float_precision="round_trip")
    except (ValueError, pd.errors.ParserError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    return frame.to_numpy()


def load_transition(path: Path) -> TransitionMatrix:
    return TransitionMatrix(load_table(path))
