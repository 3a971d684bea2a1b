"""Gradient-check suites at four scopes: primitive, auditory, processor, end2end."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import GradCheckReport, Tensor, gradient_check, no_grad, ops
from .autodiff.catalog import PRIMITIVES

SCOPES = ("primitive", "auditory", "processor", "end2end")
TOLERANCES = {"primitive": 1e-4, "auditory": 1e-3, "processor": 1e-4, "end2end": 1e-3}
END2END_SECONDS = 0.2


@dataclass
class SuiteResult:
    name: str
    report: GradCheckReport
    tol: float

    @property
    def passed(self) -> bool:
        return self.report.passed(self.tol)


def _randomized(params: dict, seed: int, scale: float = 0.3) -> dict:
    rng = np.random.default_rng(seed)
    return {k: Tensor(scale * rng.standard_normal(t.shape), requires_grad=True, name=k) for k, t in params.items()}


def _flat(params: dict) -> tuple[np.ndarray, list]:
    layout, chunks = [], []
    for k in sorted(params):
        layout.append((k, params[k].shape))
        chunks.append(params[k].value.ravel())
    return np.concatenate(chunks), layout


def _unflatten(v: Tensor, layout) -> dict:
    out, pos = {}, 0
    for k, shape in layout:
        n = int(np.prod(shape, dtype=np.int64))
        out[k] = ops.reshape(v[pos:pos + n], shape)
        pos += n
    return out


def primitive_suite(n_seeds: int = 3) -> list[SuiteResult]:
    """Every catalogued primitive at several random inputs; reports the worst seed."""
    results = []
    for name in sorted(PRIMITIVES):
        make, f, n_probes = PRIMITIVES[name]
        reps = []
        for seed in range(n_seeds):
            rng = np.random.default_rng(seed)
            reps.append(gradient_check(f, make(rng), n_probes=n_probes, rng=rng))
        worst = max(reps, key=lambda r: r.max_rel_error)
        merged = GradCheckReport(worst.max_rel_error, sum(r.n_checked for r in reps),
                                 sum(r.n_excluded for r in reps), worst.worst)
        results.append(SuiteResult(name, merged, TOLERANCES["primitive"]))
    return results


def auditory_suite(seed: int = 0) -> list[SuiteResult]:
    from .auditory import Audiogram, default_model
    model = default_model()
    rng = np.random.default_rng(seed)
    x, y = 0.05 * rng.standard_normal(3200), 0.05 * rng.standard_normal(3200)
    out = []
    for label, a in (("normal", None), ("flat40", Audiogram.flat(40)), ("sloping", np.linspace(10, 80, 10))):
        with no_grad():
            ref = model.run(y).value
        rep = gradient_check(lambda v: ops.mean(ops.abs(model.run(v, a) - ref)), x, eps=1e-6, n_probes=6, rng=rng)
        out.append(SuiteResult(f"auditory[{label}]", rep, TOLERANCES["auditory"]))
    return out


def processor_suite(seed: int = 0) -> list[SuiteResult]:
    from .processor import ProcessorConfig, forward, init_params
    cfg = ProcessorConfig.tiny(("NR", "HLC"))
    rng = np.random.default_rng(seed)
    p = _randomized(init_params(cfg, rng), seed + 1)
    x, a = rng.standard_normal(1200), np.linspace(0, 90, 10)

    def wrt_input(v):
        out = forward(p, cfg, v, a)
        return ops.mean(ops.square(out["NR"])) + ops.mean(ops.square(out["HLC"]))

    vec, layout = _flat(p)

    def wrt_params(v):
        out = forward(_unflatten(v, layout), cfg, x, a)
        return ops.mean(ops.square(out["NR"])) + ops.mean(ops.square(out["HLC"]))
    return [SuiteResult("processor[input]", gradient_check(wrt_input, x, n_probes=6, rng=rng), TOLERANCES["processor"]),
            SuiteResult("processor[params]", gradient_check(wrt_params, vec, n_probes=6, rng=rng),
                        TOLERANCES["processor"])]


def end2end_suite(seed: int = 0) -> list[SuiteResult]:
    """Tiny processor (K=3, N=4, L=1) into the auditory model with an MAE loss, 0.2 s of input."""
    from .auditory import default_model
    from .objectives import LossKind, loss_hlc, loss_nr
    from .processor import ProcessorConfig, forward, init_params
    from .dsp import SAMPLE_RATE
    model = default_model()
    cfg = ProcessorConfig.tiny(("NR", "HLC"))
    rng = np.random.default_rng(seed)
    p = _randomized(init_params(cfg, rng), seed + 1, scale=0.2)
    n = int(END2END_SECONDS * SAMPLE_RATE)
    y = 0.05 * rng.standard_normal(n)
    x = y + 0.02 * rng.standard_normal(n)
    a = np.linspace(10, 70, 10)
    with no_grad():
        t_nr, t_hlc = model.run(y).value, model.run(x).value
    vec, layout = _flat(p)

    def loss(v):
        out = forward(_unflatten(v, layout), cfg, x, a)
        return ops.add(loss_nr(out["NR"], y, LossKind.MAE, model, target=t_nr),
                       loss_hlc(out["HLC"], x, a, LossKind.MAE, model, target=t_hlc))
    rep = gradient_check(loss, vec, eps=1e-6, n_probes=6, rng=rng)
    return [SuiteResult("end2end[params]", rep, TOLERANCES["end2end"])]


def run_scope(scope: str, seed: int = 0) -> list[SuiteResult]:
    if scope == "primitive":
        return primitive_suite()
    if scope == "auditory":
        return auditory_suite(seed)
    if scope == "processor":
        return processor_suite(seed)
    if scope == "end2end":
        return end2end_suite(seed)
    raise ValueError(f"scope must be one of {SCOPES}, got {scope!r}")


def format_results(results: list[SuiteResult]) -> str:
    lines = [f"{'check':<24} {'max rel err':>12} {'tol':>8} {'checked':>8} {'excluded':>9}  status"]
    for r in results:
        rep = r.report
        lines.append(f"{r.name:<24} {rep.max_rel_error:>12.3e} {r.tol:>8.0e} {rep.n_checked:>8d} "
                     f"{rep.n_excluded:>9d}  {'ok' if r.passed else 'FAIL'}")
        if not r.passed:
            for idx, a, num, err in rep.worst:
                lines.append(f"    worst {idx}: analytic {a:.6e} numeric {num:.6e} rel {err:.2e}")
    return "\n".join(lines)
