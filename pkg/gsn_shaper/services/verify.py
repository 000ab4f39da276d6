"""
Verification suites for gsn-shaper

Each suite runs fixed desk-scale cases against the exact oracles and
returns one VerifyRow per check. A suite passes when every row does.
"""
from __future__ import annotations
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence
import logging

import numpy as np
import pandas as pd

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import grad_check
from gsn_shaper.core.nets import Mlp
from gsn_shaper.defaults import BUNDLED_MATRICES, LAZY_TWO_STATE, LAZY_TWO_STATE_STATIONARY
from gsn_shaper.models.config import TrainConfig
from gsn_shaper.models.report import VerifyRow
from gsn_shaper.services import exact, shaping, vfe
from gsn_shaper.services.data import random_discrete_target
from gsn_shaper.services.sgsn import ChainNoise, SimpleGsn, walkback_pairs
from gsn_shaper.services.train import generator_loss
from gsn_shaper.utils.rng import make_rng

logger = logging.getLogger(__name__)


class SuiteRecorder:
    """Collects rows for one suite; numeric tolerances are scaled uniformly."""

    def __init__(self, suite: str, tolerance_scale: float = 1.0):
        self.suite = suite
        self.scale = tolerance_scale
        self.rows: List[VerifyRow] = []

    def within(self, case: str, check: str, value: float, tolerance: float, detail: str = ""):
        tol = tolerance * self.scale
        self.rows.append(VerifyRow(suite=self.suite, case=case, check=check, value=float(value),
                                   tolerance=tol, detail=detail, passed=bool(abs(value) <= tol)))

    def verdict(self, case: str, check: str, actual: str, expected: str, value: float = 0.0):
        self.rows.append(VerifyRow(suite=self.suite, case=case, check=check, value=float(value),
                                   detail=f"{actual} (expected: {expected})", passed=actual == expected))

    def holds(self, case: str, check: str, condition: bool, value: float, detail: str = ""):
        self.rows.append(VerifyRow(suite=self.suite, case=case, check=check, value=float(value),
                                   detail=detail, passed=bool(condition)))


# =============================================================================
# Suites
# =============================================================================

def suite_theorem1(seed: int, rec: SuiteRecorder):
    uniform = exact.CondTable(np.full((2, 2), 0.5))
    rec.within("uniform", "residual", exact.verify_theorem1(exact.Dist.uniform(2), uniform), 0.0)

    for i in range(20):
        rng = make_rng(seed, 1, i)
        D = exact.Dist.normalized(rng.dirichlet(np.ones(5)))
        Q = exact.random_table(4, 5, rng)
        rec.within(f"random-{i}", "residual", exact.verify_theorem1(D, Q), 1e-10)
        T = exact.transition_matrix(exact.exact_posterior(D, Q), Q)
        diagonal = float(np.min(np.diag(T.table)))
        rec.holds(f"random-{i}", "self-transition positive", diagonal > 0, diagonal)

    rng = make_rng(seed, 1, 20)
    weights = rng.dirichlet(np.ones(5))
    weights[2] = 0.0
    D = exact.Dist.normalized(weights)
    rec.within("zero-state", "residual on support", exact.verify_theorem1(D, exact.random_table(4, 5, rng)), 1e-10)


def suite_corollary2(seed: int, rec: SuiteRecorder):
    for name, (matrix, _kind, witness) in BUNDLED_MATRICES.items():
        verdict = exact.is_ergodic(exact.TransitionMatrix(matrix))
        rec.verdict(name, "verdict", verdict.witness, witness, value=verdict.period)

    rng = make_rng(seed, 2)
    T = exact.TransitionMatrix.normalized(rng.dirichlet(np.ones(4), size=4).T)
    rec.verdict("random-full-support", "verdict", exact.is_ergodic(T).witness, "ergodic")

    pi = exact.stationary(exact.TransitionMatrix(LAZY_TWO_STATE))
    rec.within("lazy-two-state", "stationary error", float(np.max(np.abs(pi.probs - LAZY_TWO_STATE_STATIONARY))), 1e-10)

    T6 = exact.TransitionMatrix.normalized(rng.dirichlet(np.ones(6), size=6).T)
    gap = np.max(np.abs(exact.stationary(T6).probs - exact.stationary_nullspace(T6)))
    rec.within("random-6", "power vs null space", float(gap), 1e-10)


def suite_theorem3(seed: int, rec: SuiteRecorder):
    for i in range(5):
        rng = make_rng(seed, 3, i)
        D = exact.Dist.normalized(rng.dirichlet(np.ones(8)))
        G = exact.Dist.normalized(rng.dirichlet(np.ones(8)))
        f_star = shaping.optimal_guide_discrete(D, G)
        f_num = shaping.minimize_loss_f(D, G)
        rec.within(f"pair-{i}", "argmin L_f vs log D/G", float(np.max(np.abs(f_num - f_star))), 1e-6)
        lg = shaping.loss_g_exact(f_star, G)
        distinct = float(np.max(np.abs(G.probs - D.probs)))
        rec.holds(f"pair-{i}", "L_g > 0 at f* when G != D", (lg > 0) == (distinct >= 1e-12), lg)
        lg_equal = shaping.loss_g_exact(shaping.optimal_guide_discrete(D, D), D)
        rec.within(f"pair-{i}", "L_g at f* when G = D", lg_equal, 0.0)

    D = random_discrete_target(8, 1.0, seed)
    run = shaping.verify_theorem3(D, 5000, 0.05, seed)
    rec.within("m8-step0.05", "fixed-point gradient", run.fixed_point_gradient, 0.0)
    rec.within("m8-step0.05", "final TV", run.final_tv, 0.05)

    still = shaping.verify_theorem3(D, 100, 0.05, seed, initial_logits=np.log(D.probs))
    rec.within("start-at-target", "max TV", max(still.tv), 1e-12)


def suite_vfe_bound(seed: int, rec: SuiteRecorder):
    for i in range(50):
        rng = make_rng(seed, 4, i)
        Q = exact.random_table(3, 4, rng)
        P = exact.random_table(4, 3, rng)
        prior = exact.Dist.normalized(rng.dirichlet(np.ones(3)))
        log_marginal = np.log(vfe.marginal_exact(P, prior).probs)

        slack, identity = [], []
        for x in range(4):
            bound = vfe.vfe_exact_discrete(x, Q, P, prior).total + log_marginal[x]
            slack.append(-bound)
            identity.append(abs(vfe.tightness_gap(x, Q, P, prior) - bound))
        rec.within(f"triple-{i}", "bound violation", max(0.0, max(slack)), 1e-12)
        rec.within(f"triple-{i}", "gap identity", max(identity), 1e-12)

        Q_post = exact.CondTable(np.stack([vfe.derived_posterior(x, P, prior) for x in range(4)], axis=1))
        gaps = [vfe.tightness_gap(x, Q_post, P, prior) for x in range(4)]
        rec.within(f"triple-{i}", "gap at derived posterior", max(np.abs(gaps)), 1e-12)


def _param_check(store_names: Sequence[str], store, objective: Callable[[Dict[str, ad.Tensor]], ad.Tensor]) -> float:
    def f(*leaves):
        return objective(dict(zip(store_names, leaves)))
    return grad_check(f, [store[name] for name in store_names], step=1e-5)


def suite_gradcheck(seed: int, rec: SuiteRecorder):
    rng = make_rng(seed, 5)

    net = Mlp.init([3, 4, 2], seed)
    x = rng.standard_normal((5, 3))
    err = _param_check(net.store.names(), net.store, lambda p: ad.sum(ad.tanh(net.forward(x, p))))
    rec.within("mlp", "sum tanh(mlp(x))", err, 1e-4)

    g = SimpleGsn.create(2, 2, hidden=(3,), seed=seed)
    guide = shaping.Guide.create(2, hidden=(3,), seed=seed + 1)
    batch = rng.standard_normal((4, 2))
    eps = rng.standard_normal((1, 4, 2))
    err = _param_check(g.store.names(), g.store, lambda p: vfe.vfe_mc(g, batch, 1, eps, p).total)
    rec.within("vfe", "free energy, fixed noise", err, 1e-4)

    cfg = TrainConfig(unroll=2, batch_size=4, lambda_mm=0.5)
    noise = ChainNoise.draw(rng, 2, 4, g.k_z, g.d_x)
    stats = (batch.mean(axis=0), np.cov(batch, rowvar=False))
    err = _param_check(g.store.names(), g.store,
                       lambda p: generator_loss(g, guide, batch, cfg, noise, stats, p)[0])
    rec.within("bptt-T2", "generator objective", err, 1e-4)

    gen = rng.standard_normal((6, 2))
    err = _param_check(guide.store.names(), guide.store, lambda p: shaping.loss_f(guide, batch, gen, p))
    rec.within("guide", "L_f", err, 1e-4)

    scores = guide.scores(gen)
    away = gen[np.abs(scores) > 1e-3]
    err = grad_check(lambda leaf: shaping.loss_g(guide, leaf), [away], step=1e-5)
    rec.within("guide", "L_g w.r.t. samples", err, 1e-4)


def suite_deviance(seed: int, rec: SuiteRecorder):
    b0 = shaping.binomial_deviance(0.0).item()
    rec.within("b(0)", "error vs ln 2", abs(b0 - np.log(2.0)), 1e-15, detail=f"{b0:.7f}")
    f = np.linspace(-30.0, 30.0, 601)
    identity = shaping.binomial_deviance(-f).numpy() - shaping.binomial_deviance(f).numpy() - f
    rec.within("b(-f) - b(f) = f", "max error on [-30, 30]", float(np.max(np.abs(identity))), 1e-12)
    rec.within("b(50)", "saturation", shaping.binomial_deviance(50.0).item(), 1e-20)
    big = shaping.binomial_deviance(np.array([-1e6, 1e6])).numpy()
    rec.within("|f| = 1e6", "b(-1e6) - 1e6", abs(big[0] - 1e6), 0.0)
    rec.within("|f| = 1e6", "b(1e6)", big[1], 1e-20)


def suite_walkback(seed: int, rec: SuiteRecorder):
    g = SimpleGsn.create(2, 2, hidden=(8,), seed=seed)
    x = make_rng(seed, 6).standard_normal((1, 2))

    rec.holds("k_roll_out=0", "pair count", len(walkback_pairs(g, x, 2, 0, seed)) == 0, 0)

    pairs = walkback_pairs(g, x, 2, 3, seed)
    anchored = all(np.array_equal(px, x) for px, _ in pairs)
    rec.holds("k_roll_out=3", "3 pairs anchored to x", len(pairs) == 3 and anchored, len(pairs))

    a = walkback_pairs(g, x, 0, 3, seed).latents()
    b = walkback_pairs(g, x, 5, 3, seed).latents()
    rec.within("burn-in 0 vs 5", "max latent difference", float(np.max(np.abs(a - b))), 0.0)

    many = np.repeat(x, 100_000, axis=0)
    z = walkback_pairs(g, many, 0, 1, seed).latents()[0]
    q = g.encode(x)
    rec.within("k_roll_out=1", "mean vs q", float(np.max(np.abs(z.mean(axis=0) - q.mean.value[0]))), 0.02)
    rec.within("k_roll_out=1", "variance vs q",
               float(np.max(np.abs(z.var(axis=0, ddof=1) - np.exp(q.logvar.value[0])))), 0.02)

    rng = make_rng(seed, 7)
    D = exact.Dist.normalized(rng.dirichlet(np.ones(5)))
    Q = exact.random_table(4, 5, rng)
    P = exact.random_table(5, 4, rng)
    rec.within("exact k=1", "W vs Q", float(np.max(np.abs(exact.walkback_corruption(P, Q, 1).table - Q.table))), 1e-15)
    W = exact.walkback_corruption(P, Q, 3)
    rec.within("exact k=3", "Theorem 1 residual around W", exact.verify_walkback_theorem1(D, Q, P, 3), 1e-10,
               detail=f"dispersion Q {exact.dispersion(Q):.4f}, W {exact.dispersion(W):.4f}")


SUITES: Dict[str, Callable[[int, SuiteRecorder], None]] = {
    "theorem1": suite_theorem1,
    "corollary2": suite_corollary2,
    "theorem3": suite_theorem3,
    "vfe-bound": suite_vfe_bound,
    "gradcheck": suite_gradcheck,
    "deviance": suite_deviance,
    "walkback": suite_walkback,
}


def run_suite(name: str, seed: int = 0, tolerance_scale: float = 1.0) -> List[VerifyRow]:
    if name not in SUITES:
        raise KeyError(f"unknown suite '{name}'; choose from {', '.join(SUITES)}")
    rec = SuiteRecorder(name, tolerance_scale)
    SUITES[name](seed, rec)
    failed = sum(not r.passed for r in rec.rows)
    logger.info("Suite %s: %d checks, %d failed", name, len(rec.rows), failed)
    return rec.rows


def write_report(rows: Sequence[VerifyRow], path: Path, columns: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.model_dump() for r in rows], columns=columns or list(VerifyRow.model_fields))
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path
