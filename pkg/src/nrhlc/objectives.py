"""Training objectives, SDR and output mixing."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .auditory.model import AuditoryModel, default_model
from .autodiff import Tensor, as_tensor, no_grad, ops

SDR_CAP_DB = 60.0


class LossKind(str, enum.Enum):
    MSE = "mse"
    MAE = "mae"


def ell(p, q, kind: LossKind | str = LossKind.MSE) -> Tensor:
    """Mean squared or absolute difference over all elements."""
    p, q = as_tensor(p), as_tensor(q)
    if p.shape != q.shape:
        raise ValueError(f"loss inputs differ in shape: {p.shape} vs {q.shape}")
    d = ops.sub(p, q)
    return ops.mean(ops.square(d) if LossKind(kind) is LossKind.MSE else ops.abs(d))


def _target(model: AuditoryModel, signal, audiograms=None) -> np.ndarray:
    with no_grad():
        return model.run(np.asarray(getattr(signal, "value", signal)), audiograms).value


def loss_nr(y_hat, y, kind=LossKind.MSE, model: AuditoryModel | None = None, target=None) -> Tensor:
    """l(A_NH(y_hat), A_NH(y)); pass `target` to reuse a precomputed A_NH(y)."""
    model = model or default_model()
    target = _target(model, y) if target is None else target
    return ell(model.run(y_hat), target, kind)


def loss_hlc(y_hat, x, audiograms, kind=LossKind.MSE, model: AuditoryModel | None = None,
             target=None) -> Tensor:
    """l(A_HI(y_hat, a), A_NH(x)): the impaired model on the output should match
    the normal model on the unprocessed noisy input."""
    model = model or default_model()
    target = _target(model, x) if target is None else target
    return ell(model.run(y_hat, audiograms), target, kind)


def loss_joint(y_hat, x, y, audiograms, kind=LossKind.MSE, model: AuditoryModel | None = None,
               target=None) -> Tensor:
    """l(A_HI(y_hat, a), A_NH(y)): one output serving both tasks, clean target."""
    del x  # the joint objective only sees the clean reference
    model = model or default_model()
    target = _target(model, y) if target is None else target
    return ell(model.run(y_hat, audiograms), target, kind)


@dataclass
class UncertaintyParams:
    """Per-task log-variances u = log sigma^2, initialised to 0."""

    u_nr: Tensor
    u_hlc: Tensor

    @classmethod
    def zeros(cls) -> "UncertaintyParams":
        return cls(Tensor(0.0, requires_grad=True, name="u_nr"), Tensor(0.0, requires_grad=True, name="u_hlc"))

    def tensors(self) -> dict:
        return {"u_nr": self.u_nr, "u_hlc": self.u_hlc}


def loss_controllable(l_nr, l_hlc, u: UncertaintyParams) -> Tensor:
    """L_NR e^-u_NR + u_NR + L_HLC e^-u_HLC + u_HLC."""
    a = ops.add(ops.mul(l_nr, ops.exp(ops.neg(u.u_nr))), u.u_nr)
    b = ops.add(ops.mul(l_hlc, ops.exp(ops.neg(u.u_hlc))), u.u_hlc)
    return ops.add(a, b)


def sdr(reference, estimate, cap: float = SDR_CAP_DB) -> float:
    """10 log10(|y|^2 / |y - y_hat|^2) in dB, clamped to [-cap, cap]."""
    y = np.asarray(getattr(reference, "samples", reference), dtype=np.float64)
    y_hat = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    ref = np.sum(y ** 2)
    if ref == 0:
        raise ValueError("SDR is undefined for an all-zero reference")
    err = np.sum((y - y_hat) ** 2)
    if err == 0:
        return cap
    return float(np.clip(10 * np.log10(ref / err), -cap, cap))


def sdr_loss(estimate, reference, eps: float = 1e-12) -> Tensor:
    """Negative SDR in dB averaged over a (B, n) batch; differentiable in `estimate`."""
    est = as_tensor(estimate)
    y = np.asarray(getattr(reference, "value", reference), dtype=np.float64)
    if est.shape != y.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {y.shape}")
    ref = np.sum(y ** 2, axis=-1)
    if np.any(ref == 0):
        raise ValueError("SDR is undefined for an all-zero reference")
    err = ops.sum(ops.square(ops.sub(est, y)), axis=-1)
    db = ops.mul(ops.sub(ops.log(ops.add(err, eps)), np.log(ref)), 10.0 / np.log(10.0))
    return ops.mean(db)


def mix_outputs(y_nr, y_hlc, alpha: float):
    """alpha * y_NR + (1 - alpha) * y_HLC; the endpoints return the inputs unchanged."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    a, b = np.asarray(y_nr, dtype=np.float64), np.asarray(y_hlc, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if alpha == 1.0:
        return a.copy()
    if alpha == 0.0:
        return b.copy()
    return alpha * a + (1.0 - alpha) * b


class LossCurveWriter:
    """Append-only CSV of per-step loss terms."""

    FIELDS = ("step", "l_nr", "l_hlc", "u_nr", "u_hlc", "total")

    def __init__(self, path, header_comment: str | None = None):
        self.path = Path(path)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, "w", newline="") as fh:
                if header_comment:
                    for line in header_comment.splitlines():
                        fh.write(f"# {line}\n")
                csv.writer(fh).writerow(self.FIELDS)

    def append(self, step: int, l_nr=None, l_hlc=None, u_nr=None, u_hlc=None, total=None) -> None:
        def fmt(v):
            return "" if v is None else repr(float(v))
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow([step] + [fmt(v) for v in (l_nr, l_hlc, u_nr, u_hlc, total)])

    def truncate_after(self, step: int) -> None:
        """Drop rows beyond `step` (used when resuming from an older checkpoint)."""
        lines = self.path.read_text().splitlines(keepends=True)
        keep = [ln for ln in lines if ln.startswith("#") or ln.startswith("step")
                or int(ln.split(",", 1)[0]) <= step]
        self.path.write_text("".join(keep))


def read_loss_curve(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = []
    for r in csv.DictReader(lines):
        rows.append({k: (int(v) if k == "step" else (float(v) if v else None)) for k, v in r.items()})
    return rows
