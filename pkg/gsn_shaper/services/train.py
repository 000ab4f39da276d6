"""
Training for gsn-shaper

Each iteration trains the guide on data against chain states, then
unrolls the Simple GSN from the data batch and updates encoder and
decoder by backpropagation through the whole chain. The generator
objective combines the per-step free energy of the pairs (x_{t-1}, z_t),
the one-sided guide loss on the emitted states and optional moment
matching.

All randomness of iteration s comes from streams keyed on (seed, s), so
a run restarted from a checkpoint repeats the uninterrupted run exactly.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple
import logging

import numpy as np
import pandas as pd

from gsn_shaper.core import autodiff as ad
from gsn_shaper.core.autodiff import Tape, Tensor
from gsn_shaper.core.dists import gauss_sample_reparam, kl_gauss_to_std, log_prob
from gsn_shaper.core.nets import Bound, resolve_params
from gsn_shaper.exceptions import GsnError, NumericError
from gsn_shaper.models.config import TrainConfig
from gsn_shaper.models.report import EvalReport, StepRecord
from gsn_shaper.services.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from gsn_shaper.services.data import Dataset, check_decoder
from gsn_shaper.services.optimizer import Adam
from gsn_shaper.services.sgsn import ChainNoise, SimpleGsn, Trajectory, decode, unroll_chain
from gsn_shaper.services.shaping import Guide, loss_f, loss_g, moment_match_loss
from gsn_shaper.utils.rng import make_rng

logger = logging.getLogger(__name__)

HISTORY_FILE = "history.csv"
CHECKPOINT_DIR = "checkpoints"

# stream counters within one iteration
BATCH_STREAM = 0
GEN_STREAM = 1
GUIDE_STREAM = 2


@dataclass
class GeneratorLosses:
    total: float
    vfe: List[float]
    loss_g: float
    moment_match: float
    aborted: bool = False


@dataclass
class TrainState:
    """Models, optimizers and the index of the next iteration."""
    generator: SimpleGsn
    guide: Guide
    gen_opt: Adam
    guide_opt: Adam
    step: int = 0

    @classmethod
    def create(cls, cfg: TrainConfig, d_x: int) -> TrainState:
        generator = SimpleGsn.create(d_x, cfg.latent_dim, cfg.hidden, cfg.decoder, cfg.seed)
        guide = Guide.create(d_x, cfg.guide_hidden, cfg.seed)
        return cls(
            generator, guide,
            Adam(generator.store, cfg.lr_gen, cfg.beta1, cfg.beta2, cfg.eps),
            Adam(guide.store, cfg.lr_guide, cfg.beta1, cfg.beta2, cfg.eps),
        )

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint(self.step, self.generator.store.copy(), self.guide.store.copy(),
                          self.gen_opt.state.copy(), self.guide_opt.state.copy(), self.generator.family)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, cfg: TrainConfig) -> TrainState:
        generator = SimpleGsn.from_store(ckpt.generator, ckpt.family)
        guide = Guide.from_store(ckpt.guide)
        return cls(
            generator, guide,
            Adam(generator.store, cfg.lr_gen, cfg.beta1, cfg.beta2, cfg.eps, ckpt.gen_opt),
            Adam(guide.store, cfg.lr_guide, cfg.beta1, cfg.beta2, cfg.eps, ckpt.guide_opt),
            ckpt.step,
        )


@dataclass
class TrainHistory:
    """One StepRecord per completed iteration."""
    records: List[StepRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: StepRecord):
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.flat() for r in self.records])

    def save_csv(self, path: Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = self.to_frame()
        if frame.empty:
            frame = pd.DataFrame(columns=[c for c in StepRecord.model_fields if c != "vfe"])
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def load_csv(cls, path: Path, upto: Optional[int] = None) -> TrainHistory:
        frame = pd.read_csv(path, float_precision="round_trip")
        history = cls()
        vfe_cols = sorted((c for c in frame.columns if c.startswith("vfe_")), key=lambda c: int(c[4:]))
        for row in frame.to_dict(orient="records"):
            if upto is not None and row["step"] >= upto:
                break
            history.append(StepRecord(
                vfe=[row.pop(c) for c in vfe_cols],
                **{k: v for k, v in row.items() if not k.startswith("vfe_")},
            ))
        return history


# =============================================================================
# Objectives and single steps
# =============================================================================

def chain_vfe(trajectory: Trajectory, g: Optional[SimpleGsn] = None, params: Optional[Bound] = None,
              n_samples: int = 1) -> List[Tensor]:
    """
    Free energy of each pair (x_{t-1}, z_t): reconstruct x_{t-1} from z_t, plus KL of q(z|x_{t-1}).
    With n_samples > 1 the reconstruction also averages the extra latent
    draws recorded in the trajectory noise, decoded with `g`.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if n_samples > 1 and (g is None or trajectory.noise.n_samples < n_samples):
        raise ValueError(f"{n_samples} free-energy draws need the model and "
                         f"{n_samples - 1} extra latent draws per step")
    terms = []
    for t in range(trajectory.length):
        x_prev, q = trajectory.states[t], trajectory.encodings[t]
        recon = ad.neg(ad.mean(log_prob(x_prev, trajectory.decodings[t])))
        for s in range(n_samples - 1):
            p = decode(g, gauss_sample_reparam(q, trajectory.noise.extra[t][s]), params)
            recon = ad.add(recon, ad.neg(ad.mean(log_prob(x_prev, p))))
        if n_samples > 1:
            recon = ad.mul(recon, 1.0 / n_samples)
        terms.append(ad.add(recon, ad.mean(kl_gauss_to_std(q))))
    return terms


def generator_loss(g: SimpleGsn, guide: Guide, data_batch: np.ndarray, cfg: TrainConfig,
                   noise: ChainNoise, data_stats: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                   params: Optional[Bound] = None) -> Tuple[Tensor, GeneratorLosses]:
    """Weighted generator objective on one unrolled chain, guide frozen."""
    x0, params = resolve_params(g.store, data_batch, params)
    trajectory = unroll_chain(g, x0, cfg.unroll, noise, params)

    vfe_terms = chain_vfe(trajectory, g, params, cfg.n_samples)
    vfe_sum = vfe_terms[0]
    for term in vfe_terms[1:]:
        vfe_sum = ad.add(vfe_sum, term)
    total = ad.mul(vfe_sum, cfg.lambda_vfe / cfg.unroll)

    emitted = trajectory.emitted()
    shape_term = loss_g(guide, emitted)
    total = ad.add(total, ad.mul(shape_term, cfg.lambda_shape))

    mm_value = 0.0
    if cfg.lambda_mm > 0:
        if data_stats is None:
            raise ValueError("moment matching needs the data mean and covariance")
        mm_term = moment_match_loss(emitted, *data_stats)
        total = ad.add(total, ad.mul(mm_term, cfg.lambda_mm))
        mm_value = mm_term.item()

    return total, GeneratorLosses(total.item(), [v.item() for v in vfe_terms], shape_term.item(), mm_value)


def _rollback(what: str, exc: Exception, snapshot, state_copy, optimizer: Adam):
    optimizer.store.restore(snapshot)
    optimizer.state = state_copy
    logger.warning("Aborted %s step: %s; parameters rolled back", what, exc)


def generator_step(g: SimpleGsn, guide: Guide, data_batch: np.ndarray, cfg: TrainConfig,
                   noise: ChainNoise, optimizer: Adam,
                   data_stats: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> GeneratorLosses:
    """One BPTT update of encoder and decoder; the guide is untouched."""
    snapshot, state_copy = g.store.snapshot(), optimizer.state.copy()
    try:
        tape = Tape()
        params = g.bind(tape)
        total, losses = generator_loss(g, guide, data_batch, cfg, noise, data_stats, params)
        optimizer.update(g.store.gradients(tape.backward(total), params))
        for name, value in g.store.items():
            if not np.all(np.isfinite(value)):
                raise NumericError(f"parameter {name} became non-finite")
    except NumericError as exc:
        _rollback("generator", exc, snapshot, state_copy, optimizer)
        return GeneratorLosses(float("nan"), [float("nan")] * cfg.unroll, float("nan"), float("nan"), aborted=True)
    return losses


def chain_batch(g: SimpleGsn, data_batch: np.ndarray, cfg: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    """Chain states x_1..x_T from frozen parameters, uniformly subsampled to the data batch size."""
    frozen = g.bind(Tape(), frozen=True)
    n = data_batch.shape[0]
    noise = ChainNoise.draw(rng, cfg.unroll, n, g.k_z, g.d_x)
    states = unroll_chain(g, data_batch, cfg.unroll, noise, frozen).state_values()[1:]
    pool = states.reshape(-1, g.d_x)
    return pool[rng.choice(pool.shape[0], size=n, replace=False)]


def guide_step(guide: Guide, g: SimpleGsn, data_batch: np.ndarray, cfg: TrainConfig,
               noise: np.random.Generator, optimizer: Adam) -> float:
    """One logistic-regression update of the guide; the generator is untouched."""
    snapshot, state_copy = guide.store.snapshot(), optimizer.state.copy()
    try:
        gen_batch = chain_batch(g, data_batch, cfg, noise)
        tape = Tape()
        params = guide.store.bind(tape)
        loss = loss_f(guide, data_batch, gen_batch, params)
        optimizer.update(guide.store.gradients(tape.backward(loss), params))
        for name, value in guide.store.items():
            if not np.all(np.isfinite(value)):
                raise NumericError(f"parameter {name} became non-finite")
    except NumericError as exc:
        _rollback("guide", exc, snapshot, state_copy, optimizer)
        return float("nan")
    return loss.item()


def chain_score(guide: Guide, g: SimpleGsn, data_batch: np.ndarray, cfg: TrainConfig,
                rng: np.random.Generator) -> float:
    """Mean guide score on fresh chain states; NaN when the chain leaves the finite range."""
    try:
        return float(np.mean(guide.scores(chain_batch(g, data_batch, cfg, rng))))
    except NumericError as exc:
        logger.warning("Chain score skipped: %s", exc)
        return float("nan")


# =============================================================================
# Loop
# =============================================================================

def iteration(state: TrainState, dataset: Dataset, cfg: TrainConfig) -> StepRecord:
    """Guide step(s) then one generator step, all streams keyed on (seed, step)."""
    s = state.step
    data_batch = dataset.batch(make_rng(cfg.seed, s, BATCH_STREAM), cfg.batch_size)

    lf = float("nan")
    for k in range(cfg.guide_steps):
        lf = guide_step(state.guide, state.generator, data_batch, cfg,
                        make_rng(cfg.seed, s, GUIDE_STREAM, k), state.guide_opt)

    noise = ChainNoise.draw(make_rng(cfg.seed, s, GEN_STREAM), cfg.unroll, cfg.batch_size,
                            state.generator.k_z, state.generator.d_x, cfg.n_samples)
    losses = generator_step(state.generator, state.guide, data_batch, cfg, noise, state.gen_opt,
                            (dataset.mean, dataset.cov))

    guide_chain = chain_score(state.guide, state.generator, data_batch, cfg,
                              make_rng(cfg.seed, s, GUIDE_STREAM, cfg.guide_steps))
    state.step += 1
    return StepRecord(
        step=s, loss_f=lf, loss_g=losses.loss_g, vfe=losses.vfe, moment_match=losses.moment_match,
        total=losses.total, guide_data=float(np.mean(state.guide.scores(data_batch))),
        guide_chain=guide_chain, aborted=losses.aborted or not np.isfinite(lf),
    )


def checkpoint_path(out_dir: Path, step: int) -> Path:
    return Path(out_dir) / CHECKPOINT_DIR / f"step_{step:06d}.gsnc"


def _persist(state: TrainState, history: TrainHistory, out_dir: Optional[Path]) -> List[Path]:
    if out_dir is None:
        return []
    history.save_csv(Path(out_dir) / HISTORY_FILE)
    return [save_checkpoint(state.to_checkpoint(), checkpoint_path(out_dir, state.step))]


def run_loop(state: TrainState, dataset: Dataset, cfg: TrainConfig, history: TrainHistory,
             out_dir: Optional[Path] = None) -> TrainHistory:
    """Advance `state` to cfg.steps, checkpointing every checkpoint_interval iterations."""
    if dataset.dim != state.generator.d_x:
        raise ValueError(f"dataset has {dataset.dim} columns, model expects {state.generator.d_x}")
    check_decoder(state.generator.family, dataset)
    if state.step == 0:
        _persist(state, history, out_dir)

    last_saved = state.step
    while state.step < cfg.steps:
        record = iteration(state, dataset, cfg)
        history.append(record)
        if state.step % cfg.log_interval == 0:
            logger.info("step %d: L_f %.4f  L_g %.4f  VFE %.4f  f(data) %+.3f  f(chain) %+.3f",
                        state.step, record.loss_f, record.loss_g, float(np.mean(record.vfe)),
                        record.guide_data, record.guide_chain)
        if state.step % cfg.checkpoint_interval == 0:
            _persist(state, history, out_dir)
            last_saved = state.step

    if state.step != last_saved:
        _persist(state, history, out_dir)
    elif out_dir is not None:
        history.save_csv(Path(out_dir) / HISTORY_FILE)
    return history


def train_loop(cfg: TrainConfig, dataset: Dataset, out_dir: Optional[Path] = None) -> Tuple[TrainHistory, TrainState]:
    state = TrainState.create(cfg, dataset.dim)
    history = run_loop(state, dataset, cfg, TrainHistory(), out_dir)
    return history, state


def resume(checkpoint: Path, cfg: TrainConfig, dataset: Dataset,
           out_dir: Optional[Path] = None, history_csv: Optional[Path] = None) -> Tuple[TrainHistory, TrainState]:
    """Continue a run from a checkpoint; the history prefix is read from the run's CSV when given."""
    ckpt = load_checkpoint(checkpoint)
    state = TrainState.from_checkpoint(ckpt, cfg)
    history = TrainHistory()
    if history_csv is not None and Path(history_csv).exists():
        history = TrainHistory.load_csv(history_csv, upto=ckpt.step)
    logger.info("Resuming from step %d (%s)", ckpt.step, checkpoint)
    history = run_loop(state, dataset, cfg, history, out_dir)
    return history, state


# =============================================================================
# Evaluation
# =============================================================================

def evaluate(g: SimpleGsn, guide: Guide, dataset: Dataset, n_chains: int, steps: int, seed: int,
             holdout: Optional[Dataset] = None) -> EvalReport:
    """Statistics of chains started on data rows, against the data and the guide."""
    if n_chains < 1 or steps < 1:
        raise ValueError("n_chains and steps must be at least 1")
    rng = make_rng(seed, 0)
    starts = dataset.batch(rng, n_chains)
    frozen = g.bind(Tape(), frozen=True)
    states = unroll_chain(g, starts, steps, rng, frozen).state_values()

    samples = states[1:].reshape(-1, g.d_x)
    if samples.shape[0] < 2:
        raise GsnError("evaluation needs at least two chain samples")
    mean = samples.mean(axis=0)
    cov = np.cov(samples, rowvar=False, ddof=1).reshape(g.d_x, g.d_x)
    reference = holdout if holdout is not None else dataset
    on_data = guide.scores(reference.samples)
    moves = np.linalg.norm(np.diff(states, axis=0), axis=-1)

    return EvalReport(
        n_chains=n_chains, steps=steps,
        sample_mean=mean.tolist(), sample_cov=cov.tolist(),
        data_mean=dataset.mean.tolist(), data_cov=dataset.cov.tolist(),
        mean_error=float(np.linalg.norm(mean - dataset.mean)),
        cov_rel_error=float(np.linalg.norm(cov - dataset.cov) / np.linalg.norm(dataset.cov)),
        guide_on_samples=float(np.mean(guide.scores(samples))),
        guide_on_data=float(np.mean(on_data)),
        guide_abs_on_data=float(np.mean(np.abs(on_data))),
        displacement_median=float(np.median(moves)),
        displacement_mean=float(np.mean(moves)),
    )
