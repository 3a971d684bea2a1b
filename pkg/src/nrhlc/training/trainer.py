"""Mode dispatch, the optimisation step and checkpoint/resume."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..auditory.model import AuditoryModel, default_model
from ..autodiff import Tape, Tensor, backward, no_grad
from ..autodiff.checkpoint import ArchiveError, load_arrays, save_arrays
from ..objectives import (LossCurveWriter, UncertaintyParams, loss_controllable, loss_hlc, loss_joint,
                          loss_nr, sdr_loss)
from ..processor import Processor
from ..scenes import Scene, SceneStream, load_corpus
from .config import Mode, TrainConfig
from .optim import AdamState, adam_step, clip_gradients, global_norm, lr_at

CHECKPOINT_KIND = "nrhlc-train-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingDiverged(FloatingPointError):
    """A non-finite loss was produced; carries the step and the offending scenes."""

    def __init__(self, step: int, losses: dict, metadata: list):
        self.step, self.losses, self.metadata = step, losses, metadata
        ids = [(m.get("index"), m.get("speech", {}).get("id")) for m in metadata]
        super().__init__(f"non-finite loss at step {step}: {losses}; scenes (index, speech id): {ids}")


@dataclass
class Batch:
    x: np.ndarray            # (B, n) noisy input
    y: np.ndarray            # (B, n) clean target
    thresholds: np.ndarray   # (B, 10) dB HL
    metadata: list = field(default_factory=list)
    _targets: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=np.float64))
        self.thresholds = np.atleast_2d(np.asarray(self.thresholds, dtype=np.float64))
        if self.x.shape != self.y.shape or self.x.shape[0] == 0:
            raise ValueError(f"batch x and y must share a nonempty (B, n) shape: {self.x.shape} vs {self.y.shape}")
        if self.thresholds.shape != (self.x.shape[0], 10):
            raise ValueError(f"thresholds must be ({self.x.shape[0]}, 10), got {self.thresholds.shape}")

    @property
    def size(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_scenes(cls, scenes: list[Scene]) -> "Batch":
        return cls(np.stack([s.x for s in scenes]), np.stack([s.y for s in scenes]),
                   np.stack([s.audiogram.thresholds for s in scenes]), [s.metadata for s in scenes])

    def target(self, which: str, model: AuditoryModel) -> np.ndarray:
        """A_NH of the clean ('y') or noisy ('x') signal; cached since it never changes."""
        if which not in self._targets:
            with no_grad():
                self._targets[which] = model.run(getattr(self, which)).value
        return self._targets[which]


BatchSource = Callable[[int, int], Batch]   # (step, scenes_seen) -> Batch


def stream_source(stream: SceneStream, batch_size: int) -> BatchSource:
    """Consecutive scene indices; scene k of the run is always stream[k]."""
    def source(step: int, scenes_seen: int) -> Batch:
        del step
        return Batch.from_scenes([stream[i] for i in range(scenes_seen, scenes_seen + batch_size)])
    return source


def fixed_source(batch: Batch) -> BatchSource:
    return lambda step, scenes_seen: batch


def compute_losses(mode: Mode, outputs: dict, batch: Batch, kind, model: AuditoryModel,
                   u: UncertaintyParams | None = None) -> dict[str, Tensor]:
    """Loss terms for one batch; 'total' is what gets differentiated."""
    mode = Mode(mode)
    if mode is Mode.SDR:
        total = sdr_loss(outputs["NR"], batch.y)
        return {"total": total}
    if mode is Mode.NR:
        l_nr = loss_nr(outputs["NR"], batch.y, kind, model, target=batch.target("y", model))
        return {"l_nr": l_nr, "total": l_nr}
    if mode is Mode.HLC:
        l_hlc = loss_hlc(outputs["HLC"], batch.x, batch.thresholds, kind, model, target=batch.target("x", model))
        return {"l_hlc": l_hlc, "total": l_hlc}
    if mode is Mode.NR_HLC:
        total = loss_joint(outputs["HLC"], batch.x, batch.y, batch.thresholds, kind, model,
                           target=batch.target("y", model))
        return {"total": total}
    l_nr = loss_nr(outputs["NR"], batch.y, kind, model, target=batch.target("y", model))
    l_hlc = loss_hlc(outputs["HLC"], batch.x, batch.thresholds, kind, model, target=batch.target("x", model))
    if u is None:
        raise ValueError("c-nr-hlc needs uncertainty parameters")
    return {"l_nr": l_nr, "l_hlc": l_hlc, "total": loss_controllable(l_nr, l_hlc, u)}


@dataclass
class StepReport:
    step: int
    scenes_seen: int
    lr: float
    grad_norm: float
    losses: dict

    def as_row(self) -> dict:
        return {"step": self.step, **self.losses}


class Trainer:
    """Owns parameters, optimizer state and the scene counter for one run."""

    def __init__(self, cfg: TrainConfig, batch_source: BatchSource | None = None,
                 model: AuditoryModel | None = None, processor: Processor | None = None):
        self.cfg = cfg
        self.processor = processor or Processor(cfg.processor, seed=cfg.seed)
        self.u = UncertaintyParams.zeros() if cfg.mode is Mode.C_NR_HLC else None
        self.model = model or (default_model() if cfg.mode.uses_auditory_model else None)
        self.adam = AdamState()
        self.step = 0
        self.scenes_seen = 0
        if batch_source is None:
            batch_source = stream_source(SceneStream(cfg.scene, load_corpus(cfg.corpus)), cfg.batch_size)
        self.batch_source = batch_source

    # -- parameters ------------------------------------------------------------
    def trainable(self, theta: bool = True, u: bool = True) -> dict[str, Tensor]:
        out = dict(self.processor.params) if theta else {}
        if u and self.u is not None:
            out.update({f"u.{k}": t for k, t in self.u.tensors().items()})
        return out

    def uncertainty(self) -> dict[str, float]:
        if self.u is None:
            return {}
        return {"u_nr": self.u.u_nr.item(), "u_hlc": self.u.u_hlc.item()}

    # -- forward ------------------------------------------------------------------
    def losses(self, batch: Batch) -> dict[str, float]:
        """Loss terms without updating anything."""
        with no_grad():
            out = self.processor(batch.x, batch.thresholds if self.cfg.mode.conditioned else None)
            terms = compute_losses(self.cfg.mode, out, batch, self.cfg.loss_kind, self.model, self.u)
        return {k: v.item() for k, v in terms.items()}

    def train_step(self, batch: Batch | None = None, update_theta: bool = True,
                   update_u: bool = True) -> StepReport:
        cfg = self.cfg
        if batch is None:
            batch = self.batch_source(self.step, self.scenes_seen)
        params = self.trainable(update_theta, update_u)
        if not params:
            raise ValueError("nothing to train")
        if update_theta:
            with Tape():
                out = self.processor(batch.x, batch.thresholds if cfg.mode.conditioned else None)
                terms = compute_losses(cfg.mode, out, batch, cfg.loss_kind, self.model, self.u)
                values = {k: v.item() for k, v in terms.items()}
                if not all(np.isfinite(v) for v in values.values()):
                    raise TrainingDiverged(self.step + 1, values, batch.metadata)
                grads = backward(terms["total"])
        else:
            # processor frozen: task losses are constants, only the weighting is on the tape
            values = self.losses(batch)
            if not all(np.isfinite(v) for v in values.values()):
                raise TrainingDiverged(self.step + 1, values, batch.metadata)
            with Tape():
                grads = backward(loss_controllable(Tensor(values["l_nr"]), Tensor(values["l_hlc"]), self.u))
        named = {name: grads.get(t) for name, t in params.items()}
        named = {k: g for k, g in named.items() if g is not None}
        norm = global_norm(named)
        named = clip_gradients(named, cfg.clip_norm)
        lr = lr_at(self.scenes_seen, cfg.lr0, cfg.lr_decay, cfg.decay_every)
        scale = {k: cfg.u_lr_scale for k in params if k.startswith("u.")}
        adam_step(params, named, self.adam, lr, scale)
        self.step += 1
        self.scenes_seen += batch.size
        values.update(self.uncertainty())
        return StepReport(self.step, self.scenes_seen, lr, norm, values)

    def run(self, n_steps: int | None = None, log: LossCurveWriter | None = None,
            checkpoint_dir=None, manifest: dict | None = None,
            on_step: Callable[[StepReport], None] | None = None) -> list[StepReport]:
        """Train until `n_steps` more steps are done (default: to cfg.total_scenes)."""
        stop = self.cfg.total_steps if n_steps is None else self.step + n_steps
        reports = []
        while self.step < stop:
            rep = self.train_step()
            reports.append(rep)
            if log is not None:
                log.append(**rep.as_row())
            if on_step is not None:
                on_step(rep)
            if checkpoint_dir is not None and (self.step % self.cfg.checkpoint_every == 0 or self.step == stop):
                self.save(Path(checkpoint_dir) / f"step_{self.step:07d}.ckpt", manifest)
        return reports

    # -- checkpoints -----------------------------------------------------------
    def save(self, path, manifest: dict | None = None) -> Path:
        arrays = {f"param/{k}": v for k, v in self.processor.state_dict().items()}
        if self.u is not None:
            arrays.update({f"u/{k}": t.value for k, t in self.u.tensors().items()})
        arrays.update({f"adam/{k}": a for k, a in self.adam.arrays().items()})
        meta = {"kind": CHECKPOINT_KIND, "version": CHECKPOINT_VERSION, "train_config": self.cfg.to_dict(),
                "step": self.step, "scenes_seen": self.scenes_seen, "adam": self.adam.meta(),
                "manifest": manifest or {}}
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_arrays(path, arrays, meta)
        return path

    @classmethod
    def resume(cls, path, batch_source: BatchSource | None = None,
               model: AuditoryModel | None = None) -> "Trainer":
        cfg, arrays, meta = read_checkpoint(path)
        proc = Processor.from_state(cfg.processor, _strip(arrays, "param/"))
        tr = cls(cfg, batch_source, model, proc)
        if tr.u is not None:
            u = _strip(arrays, "u/")
            tr.u.u_nr.value, tr.u.u_hlc.value = np.array(u["u_nr"]), np.array(u["u_hlc"])
        tr.adam = AdamState.restore(meta["adam"], _strip(arrays, "adam/"))
        tr.step, tr.scenes_seen = int(meta["step"]), int(meta["scenes_seen"])
        return tr


def _strip(arrays: dict, prefix: str) -> dict:
    return {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}


def read_checkpoint(path) -> tuple[TrainConfig, dict, dict]:
    """(config, arrays, meta) from a training checkpoint."""
    arrays, meta = load_arrays(path)
    if meta.get("kind") != CHECKPOINT_KIND:
        raise ArchiveError(f"{path}: not a training checkpoint")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ArchiveError(f"{path}: checkpoint version {meta.get('version')}, expected {CHECKPOINT_VERSION}")
    return TrainConfig.from_dict(meta["train_config"]), arrays, meta


def load_processor(path) -> tuple[Processor, TrainConfig, dict]:
    cfg, arrays, meta = read_checkpoint(path)
    return Processor.from_state(cfg.processor, _strip(arrays, "param/")), cfg, meta


def fit_uncertainty(l_nr: float, l_hlc: float, u: UncertaintyParams | None = None, steps: int = 3000,
                    lr: float = 1e-2, state: AdamState | None = None) -> UncertaintyParams:
    """Optimise u alone for fixed task losses (processor frozen) with Adam."""
    u = u or UncertaintyParams.zeros()
    state = state or AdamState()
    params = {f"u.{k}": t for k, t in u.tensors().items()}
    for _ in range(steps):
        with Tape():
            total = loss_controllable(Tensor(l_nr), Tensor(l_hlc), u)
            g = backward(total)
        adam_step(params, {k: g[t] for k, t in params.items()}, state, lr)
    return u
