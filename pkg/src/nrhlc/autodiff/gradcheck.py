"""Finite-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tape, Tensor, backward


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    n_excluded: int
    worst: list = field(default_factory=list)  # (index, analytic, numeric, rel_error)

    def passed(self, tol: float) -> bool:
        return self.n_checked > 0 and self.max_rel_error < tol


def _analytic(f, x: np.ndarray) -> np.ndarray:
    t = Tensor(x.copy(), requires_grad=True)
    with Tape():
        loss = f(t)
        grads = backward(loss)
    return grads.get(t, np.zeros_like(x))


def _eval(f, x: np.ndarray) -> float:
    return float(f(Tensor(x)).value)


def gradient_check(f, x, eps: float = 1e-5, n_probes: int | None = None,
                   rng: np.random.Generator | None = None, kink_tol: float = 1e-2,
                   n_worst: int = 5) -> GradCheckReport:
    """Compare backward() against central differences of a scalar f(Tensor).

    With ``n_probes`` set, checks directional derivatives along random unit
    directions instead of every coordinate.  A point is excluded as
    nondifferentiable when the one-sided differences disagree by more than
    ``kink_tol`` relative to their size.  Relative error is
    |a - n| / max(|a|, |n|, floor) with floor = 1e-6 * largest numeric
    derivative, so analytically-zero coordinates don't blow up the ratio.
    """
    x = np.array(x, dtype=np.float64)
    step = eps * max(1.0, float(np.max(np.abs(x)))) if x.size else eps
    grad = _analytic(f, x)
    f0 = _eval(f, x)

    if n_probes is None:
        dirs = [(idx, None) for idx in np.ndindex(x.shape)]
    else:
        rng = rng or np.random.default_rng(0)
        dirs = []
        for k in range(n_probes):
            v = rng.standard_normal(x.shape)
            dirs.append((k, v / np.linalg.norm(v)))

    rows = []
    excluded = 0
    for key, v in dirs:
        if v is None:
            e = np.zeros_like(x)
            e[key] = step
            analytic = grad[key]
        else:
            e = step * v
            analytic = float(np.sum(grad * v))
        fp, fm = _eval(f, x + e), _eval(f, x - e)
        d_plus, d_minus = (fp - f0) / step, (f0 - fm) / step
        if abs(d_plus - d_minus) > kink_tol * max(abs(d_plus) + abs(d_minus), 1e-12):
            excluded += 1
            continue
        rows.append((key, float(analytic), (fp - fm) / (2 * step)))

    if not rows:
        return GradCheckReport(np.inf, 0, excluded)
    numeric_scale = max(abs(r[2]) for r in rows)
    floor = max(1e-6 * numeric_scale, 1e-14)
    scored = [(k, a, n, abs(a - n) / max(abs(a), abs(n), floor)) for k, a, n in rows]
    scored.sort(key=lambda r: -r[3])
    return GradCheckReport(scored[0][3], len(scored), excluded, scored[:n_worst])
