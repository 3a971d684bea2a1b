"""Evaluation on frozen test sets: per-profile, per-alpha SDR tables and WAV exports."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import no_grad
from ..objectives import mix_outputs, sdr
from ..processor import Processor
from ..scenes import Scene, standard_audiograms
from ..wavio import write_wav

DEFAULT_ALPHAS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class Condition:
    scene: int
    profile: str
    alpha: float | None
    sdr_db: float


def _alphas(processor: Processor, alphas):
    if set(processor.cfg.heads) == {"NR", "HLC"}:
        return [float(a) for a in (DEFAULT_ALPHAS if alphas is None else alphas)]
    if alphas is not None:
        raise ValueError("alpha mixing needs a dual-head (NR + HLC) processor")
    return [None]


def process(processor: Processor, x: np.ndarray, thresholds=None) -> dict[str, np.ndarray]:
    """Head outputs for one or more signals, without recording a tape."""
    with no_grad():
        out = processor(x, thresholds if processor.cfg.audiogram_conditioning else None)
    return {k: v.value for k, v in out.items()}


def output_for(heads: dict, alpha: float | None) -> np.ndarray:
    if alpha is None:
        (only,) = heads.values()
        return only
    return mix_outputs(heads["NR"], heads["HLC"], alpha)


def evaluate(scenes: list[Scene], processor: Processor, alphas=None, profiles: dict | None = None,
             export_dir=None, manifest: dict | None = None) -> list[Condition]:
    """SDR against the clean target for every scene x profile x alpha.

    Each scene is processed once per audiogram profile (11 standard profiles by
    default). Unconditioned processors ignore the audiogram, so they run once
    per scene. With `export_dir`, processed/reference WAV pairs and a scoring
    manifest are written for external perceptual metrics.
    """
    alpha_list = _alphas(processor, alphas)
    profiles = profiles or standard_audiograms()
    export = Path(export_dir) if export_dir is not None else None
    rows, score_rows = [], []
    if export is not None:
        export.mkdir(parents=True, exist_ok=True)
    for i, scene in enumerate(scenes):
        shared = None
        if export is not None:
            ref = export / f"scene_{i:05d}_reference.wav"
            write_wav(ref, scene.y, manifest)
        for name, audiogram in profiles.items():
            if processor.cfg.audiogram_conditioning or shared is None:
                heads = process(processor, scene.x, audiogram.thresholds)
                shared = heads
            heads = shared
            for alpha in alpha_list:
                y_hat = output_for(heads, alpha)
                rows.append(Condition(i, name, alpha, sdr(scene.y, y_hat)))
                if export is not None:
                    tag = "" if alpha is None else f"_a{alpha:.2f}"
                    out = export / f"scene_{i:05d}_{name}{tag}.wav"
                    write_wav(out, y_hat, manifest)
                    score_rows.append({"processed": out.name, "reference": ref.name, "scene": i,
                                       "profile": name, "alpha": "" if alpha is None else alpha,
                                       "thresholds_db_hl": " ".join(f"{t:g}" for t in audiogram.thresholds)})
    if export is not None:
        with open(export / "scoring_manifest.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(score_rows[0]) if score_rows else ["processed"])
            w.writeheader()
            w.writerows(score_rows)
    return rows


def summarize(rows: list[Condition], profiles=None) -> list[dict]:
    """One row per alpha: mean SDR over NH scenes, over HI scenes, and per profile."""
    names = list(profiles or dict.fromkeys(r.profile for r in rows))
    out = []
    for alpha in dict.fromkeys(r.alpha for r in rows):
        sel = [r for r in rows if r.alpha == alpha]
        row = {"alpha": "" if alpha is None else alpha}
        nh = [r.sdr_db for r in sel if r.profile == "NH"]
        hi = [r.sdr_db for r in sel if r.profile != "NH"]
        row["sdr_nh"] = float(np.mean(nh)) if nh else float("nan")
        row["sdr_hi"] = float(np.mean(hi)) if hi else float("nan")
        for name in names:
            vals = [r.sdr_db for r in sel if r.profile == name]
            row[f"sdr_{name}"] = float(np.mean(vals)) if vals else float("nan")
        out.append(row)
    return out


def write_table(path, table: list[dict], manifest: dict | None = None) -> None:
    """Comma-separated table; the manifest goes in '#' comment lines at the top."""
    with open(path, "w", newline="") as fh:
        if manifest is not None:
            fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
        w = csv.DictWriter(fh, fieldnames=list(table[0]))
        w.writeheader()
        for row in table:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})


def read_table(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
