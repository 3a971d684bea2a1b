"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid input
(bad config, audiogram, WAV or checkpoint).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .auditory.audiogram import (AUDIOGRAM_FREQS, Audiogram, AudiogramError, interpolate_audiogram,
                                  load_audiogram, save_audiogram)
from .autodiff.checkpoint import ArchiveError
from .objectives import LossCurveWriter, mix_outputs
from .runinfo import RunManifest, corpus_hash
from .scenes import SceneConfig, SceneStream, freeze_test_set, load_corpus, load_frozen_scenes, standard_audiograms
from .training import (DEFAULT_ALPHAS, ConfigError, Mode, TrainConfig, Trainer, evaluate, load_processor,
                       load_train_config, process, summarize, write_table)
from .training.trainer import TrainingDiverged
from .wavio import WavFormatError, read_wav, write_wav

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 3
OUTPUT_ENV = "NRHLC_OUTPUT_DIR"


class UsageError(Exception):
    """Flags that are individually valid but make no sense together."""


# ----------------------------------------------------------------------------
# helpers

def _out_dir(args, command: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(OUTPUT_ENV, "nrhlc_out")) / command


def parse_audiogram(spec: str) -> Audiogram:
    """Inline 'a,b,...' (10 values at the standard frequencies), a standard profile name, or a JSON file."""
    if spec in standard_audiograms():
        return standard_audiograms()[spec]
    if "," in spec:
        try:
            values = [float(v) for v in spec.split(",")]
        except ValueError:
            raise AudiogramError(f"inline audiogram must be {AUDIOGRAM_FREQS.size} numbers, got {spec!r}") from None
        return Audiogram(np.array(values))
    path = Path(spec)
    if not path.exists():
        raise AudiogramError(f"{spec}: no such audiogram file (or inline list / profile name)")
    return load_audiogram(path)


def _read_config(path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return d


def corpus_spec(arg: str | None) -> dict:
    """'synthetic' (default), a manifest CSV, or a directory holding manifest.csv."""
    if arg is None or arg == "synthetic":
        return {"kind": "synthetic"}
    p = Path(arg)
    if p.is_dir():
        p = p / "manifest.csv"
    if not p.exists():
        raise FileNotFoundError(f"corpus not found: {arg} (expected a manifest CSV or a directory with manifest.csv)")
    return {"kind": "manifest", "path": str(p.resolve())}


def _alphas(text: str | None):
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--alphas must be comma-separated numbers, got {text!r}") from None
    if not vals or any(not 0 <= a <= 1 for a in vals):
        raise UsageError("alphas must lie in [0, 1]")
    return vals


def _dual(processor) -> bool:
    return set(processor.cfg.heads) == {"NR", "HLC"}


# ----------------------------------------------------------------------------
# commands

def cmd_train(args) -> int:
    overrides = {"mode": args.mode, "loss_kind": args.loss, "seed": args.seed, "batch_size": args.batch_size,
                 "total_scenes": args.total_scenes, "checkpoint_every": args.checkpoint_every}
    if args.mode == "sdr" and args.loss is not None:
        raise UsageError("--loss does not apply to mode sdr (it trains on SDR directly)")
    base = _read_config(args.config) if args.config else {}
    if "loss" in base:
        base["loss_kind"] = base.pop("loss")
    base.update({k: v for k, v in overrides.items() if v is not None})
    if base.get("mode") == "sdr" and args.loss is None:
        base.pop("loss_kind", None)
    if args.corpus is not None or "corpus" not in base:
        base["corpus"] = corpus_spec(args.corpus)
    if args.scene_len is not None:
        base["scene"] = {**base.get("scene", {}), "scene_len": args.scene_len}
    out = _out_dir(args, "train")
    out.mkdir(parents=True, exist_ok=True)

    if args.resume:
        trainer = Trainer.resume(args.resume)
        cfg = trainer.cfg
    else:
        cfg = TrainConfig.from_dict(base)
        if cfg.corpus.get("kind") == "manifest" and not Path(cfg.corpus["path"]).exists():
            raise FileNotFoundError(f"corpus manifest {cfg.corpus['path']} does not exist")
        trainer = Trainer(cfg)
    manifest = RunManifest("train", cfg.to_dict(), cfg.seed, corpus_hash(cfg.corpus),
                           outputs=["run_manifest.json", "loss_curve.csv", "checkpoints/", "final.ckpt"])
    manifest.write(out / "run_manifest.json")
    log = LossCurveWriter(out / "loss_curve.csv", "manifest: " + json.dumps(manifest.to_dict(), sort_keys=True))
    if args.resume:
        log.truncate_after(trainer.step)

    def report(rep):
        if args.log_every and rep.step % args.log_every == 0:
            terms = " ".join(f"{k}={v:.5g}" for k, v in rep.losses.items())
            print(f"step {rep.step} scenes {rep.scenes_seen} lr {rep.lr:.3g} |g| {rep.grad_norm:.3g} {terms}",
                  flush=True)

    trainer.run(args.steps, log, out / "checkpoints", manifest.to_dict(), report)
    trainer.save(out / "final.ckpt", manifest.to_dict())
    print(f"trained {trainer.step} steps ({trainer.scenes_seen} scenes); checkpoint {out / 'final.ckpt'}")
    return EXIT_OK


def process_file(checkpoint, input_wav, audiogram: Audiogram | None = None, alpha: float | None = None,
                 head: str | None = None) -> np.ndarray:
    """Processed signal for one file; shared by `process` and tests."""
    processor, _, _ = load_processor(checkpoint)
    x = read_wav(input_wav)
    if processor.cfg.audiogram_conditioning and audiogram is None:
        raise UsageError("this checkpoint is audiogram-conditioned; pass --audiogram")
    if alpha is not None and head is not None:
        raise UsageError("give either --alpha or --head, not both")
    if alpha is not None:
        if not _dual(processor):
            raise UsageError(f"--alpha needs a dual-head checkpoint; this one has heads {list(processor.cfg.heads)}")
        if not 0 <= alpha <= 1:
            raise UsageError("--alpha must lie in [0, 1]")
    if head is not None and head not in processor.cfg.heads:
        raise UsageError(f"head {head} not in checkpoint heads {list(processor.cfg.heads)}")
    if alpha is None and head is None:
        if _dual(processor):
            raise UsageError("dual-head checkpoint: pass --alpha (mixing) or --head NR|HLC")
        (head,) = processor.cfg.heads
    heads = process(processor, x, None if audiogram is None else audiogram.thresholds)
    if head is not None:
        return heads[head]
    return mix_outputs(heads["NR"], heads["HLC"], alpha)


def cmd_process(args) -> int:
    audiogram = parse_audiogram(args.audiogram) if args.audiogram else None
    y = process_file(args.checkpoint, args.input, audiogram, args.alpha, args.head)
    manifest = RunManifest("process", {"checkpoint": str(args.checkpoint), "input": str(args.input),
                                       "alpha": args.alpha, "head": args.head,
                                       "audiogram_db_hl": None if audiogram is None else audiogram.thresholds.tolist()},
                           outputs=[Path(args.output).name])
    write_wav(args.output, y, manifest.to_dict(), sample_format=args.sample_format)
    print(f"wrote {args.output}")
    return EXIT_OK


def _evaluate(args, command: str, alphas) -> int:
    processor, cfg, _ = load_processor(args.checkpoint)
    scenes = load_frozen_scenes(args.testset)
    if args.limit:
        scenes = scenes[:args.limit]
    out = _out_dir(args, command)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command, {"checkpoint": str(args.checkpoint), "testset": str(args.testset),
                                     "alphas": alphas, "train_config": cfg.to_dict()}, cfg.seed,
                           outputs=["table.csv", "conditions.csv"] + (["exports/"] if args.export else []))
    rows = evaluate(scenes, processor, alphas, export_dir=out / "exports" if args.export else None,
                    manifest=manifest.to_dict())
    table = summarize(rows, standard_audiograms())
    write_table(out / "table.csv", table, manifest.to_dict())
    write_table(out / "conditions.csv", [{"scene": r.scene, "profile": r.profile,
                                          "alpha": "" if r.alpha is None else r.alpha, "sdr_db": r.sdr_db}
                                         for r in rows], manifest.to_dict())
    manifest.write(out / "run_manifest.json")
    for row in table:
        print(f"alpha {row['alpha'] if row['alpha'] != '' else '-':>4}  SDR NH {row['sdr_nh']:7.2f} dB  "
              f"HI {row['sdr_hi']:7.2f} dB")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    alphas = _alphas(args.alphas)
    return _evaluate(args, "evaluate", alphas)


def cmd_alpha_sweep(args) -> int:
    processor, _, _ = load_processor(args.checkpoint)
    if not _dual(processor):
        raise UsageError("alpha-sweep needs a dual-head (c-nr-hlc) checkpoint")
    alphas = _alphas(args.alphas) or list(DEFAULT_ALPHAS)
    args.export = not args.no_export
    return _evaluate(args, "alpha-sweep", alphas)


def cmd_freeze_testset(args) -> int:
    if args.config:
        cfg = load_train_config(args.config)
        scene, corpus = cfg.scene.to_dict(), cfg.corpus
    else:
        scene, corpus = {}, None
    if args.corpus is not None or corpus is None:
        corpus = corpus_spec(args.corpus)
    scene["split"] = args.split
    for key, val in (("seed", args.seed), ("scene_len", args.scene_len)):
        if val is not None:
            scene[key] = val
    scfg = SceneConfig.from_dict(scene)
    out = _out_dir(args, "testset")
    names = [f"scene_{i:05d}/" for i in range(args.n)]
    manifest = RunManifest("freeze-testset", {"scene": scfg.to_dict(), "corpus": corpus, "n": args.n},
                           scfg.seed, corpus_hash(corpus), outputs=["index.json"] + names)
    freeze_test_set(out, SceneStream(scfg, load_corpus(corpus)), args.n, manifest.to_dict())
    print(f"froze {args.n} scenes under {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .diagnostics import SCOPES, format_results, run_scope
    scopes = SCOPES if args.scope == "all" else (args.scope,)
    ok = True
    for scope in scopes:
        results = run_scope(scope, args.seed)
        print(f"[{scope}]")
        print(format_results(results))
        ok &= all(r.passed for r in results)
    print("gradcheck passed" if ok else "gradcheck FAILED")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_audiogram(args) -> int:
    if args.action == "standard":
        profiles = standard_audiograms()
        if args.name is None:
            for name, a in profiles.items():
                print(f"{name:>3}  " + " ".join(f"{t:5.1f}" for t in a.thresholds))
            return EXIT_OK
        if args.name not in profiles:
            raise UsageError(f"unknown profile {args.name}; choose from {list(profiles)}")
        if args.out:
            save_audiogram(args.out, profiles[args.name])
        else:
            print(json.dumps(profiles[args.name].to_dict(), indent=2))
        return EXIT_OK
    if args.spec is None:
        raise UsageError(f"audiogram {args.action} needs an audiogram (file, inline list or profile name)")
    a = parse_audiogram(args.spec)
    if args.action == "validate":
        print(f"valid audiogram, thresholds {a.thresholds.tolist()} dB HL")
        return EXIT_OK
    from .auditory import default_model
    model = default_model()
    prof = model.hearing_loss(a)
    print(f"{'freq Hz':>8} {'HL':>6}")
    for f, t in zip(AUDIOGRAM_FREQS, a.thresholds):
        print(f"{f:8.0f} {t:6.1f}")
    print(f"\n{'channel':>7} {'cf Hz':>8} {'HL':>6} {'OHC':>6} {'IHC':>6} {'OHCmax':>7}")
    hl = interpolate_audiogram(a, model.center_freqs)
    for k, cf in enumerate(model.center_freqs):
        print(f"{k:7d} {cf:8.1f} {hl[k]:6.1f} {prof.hl_ohc[k]:6.1f} {prof.hl_ihc[k]:6.1f} {prof.hl_ohc_max[k]:7.1f}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nrhlc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a processor")
    t.add_argument("--config", help="JSON training config; flags override its values")
    t.add_argument("--mode", choices=[m.value for m in Mode])
    t.add_argument("--loss", choices=["mse", "mae"])
    t.add_argument("--corpus", help="'synthetic', a manifest CSV or a directory with manifest.csv")
    t.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV}/train)")
    t.add_argument("--steps", type=int, help="stop after this many steps (default: total_scenes / batch)")
    t.add_argument("--seed", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--total-scenes", type=int)
    t.add_argument("--scene-len", type=float)
    t.add_argument("--checkpoint-every", type=int)
    t.add_argument("--resume", help="continue from a training checkpoint")
    t.add_argument("--log-every", type=int, default=10)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("process", help="process one WAV file")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--output", required=True)
    pr.add_argument("--audiogram", help="JSON file, 10 comma-separated dB HL values, or a profile name")
    pr.add_argument("--alpha", type=float, help="NR/HLC mixing weight (dual-head checkpoints)")
    pr.add_argument("--head", choices=["NR", "HLC"], help="write one head's output directly")
    pr.add_argument("--sample-format", choices=["float32", "float64"], default="float32")
    pr.set_defaults(func=cmd_process)

    for name, func, helptext in (("evaluate", cmd_evaluate, "SDR table on a frozen test set"),
                                 ("alpha-sweep", cmd_alpha_sweep, "per-alpha table and WAV exports")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--checkpoint", required=True)
        e.add_argument("--testset", required=True)
        e.add_argument("--out")
        e.add_argument("--alphas", help="comma-separated alphas (dual-head only)")
        e.add_argument("--limit", type=int, help="use only the first N scenes")
        if name == "evaluate":
            e.add_argument("--export", action="store_true", help="write processed/reference WAV pairs")
        else:
            e.add_argument("--no-export", action="store_true")
        e.set_defaults(func=func)

    f = sub.add_parser("freeze-testset", help="render scenes to disk")
    f.add_argument("--config", help="training config whose scene and corpus sections are used")
    f.add_argument("--corpus")
    f.add_argument("--n", type=int, default=50)
    f.add_argument("--out")
    f.add_argument("--seed", type=int)
    f.add_argument("--scene-len", type=float)
    f.add_argument("--split", choices=["train", "test"], default="test")
    f.set_defaults(func=cmd_freeze_testset)

    g = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    g.add_argument("--scope", choices=["primitive", "auditory", "processor", "end2end", "all"], default="all")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gradcheck)

    a = sub.add_parser("audiogram", help="inspect, validate or export audiograms")
    a.add_argument("action", choices=["show", "validate", "standard"])
    a.add_argument("spec", nargs="?", help="audiogram file, inline list or profile name")
    a.add_argument("--name", help="standard profile to export")
    a.add_argument("--out")
    a.set_defaults(func=cmd_audiogram)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as e:
        print(f"nrhlc {args.command}: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, AudiogramError, WavFormatError, ArchiveError, FileNotFoundError) as e:
        print(f"nrhlc {args.command}: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except TrainingDiverged as e:
        print(f"nrhlc {args.command}: training diverged: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001 - last-resort reporting for the CLI
        print(f"nrhlc {args.command}: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
