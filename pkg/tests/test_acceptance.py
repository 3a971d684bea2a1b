"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with `pytest tests/test_acceptance.py -v -s`.
"""
import json
import time

import numpy as np
import pytest

from nrhlc.auditory import Audiogram, default_model, split_hearing_loss
from nrhlc.cli import main
from nrhlc.diagnostics import end2end_suite, primitive_suite
from nrhlc.dsp import StftConfig, erb_space, istft_array, stft_array
from nrhlc.objectives import sdr
from nrhlc.processor import BandSplitSpec, ProcessorConfig, count_params, init_params
from nrhlc.scenes import (AudiogramSampler, SceneConfig, SceneStream, anechoic_rir, early_target, generate_scene,
                          measure_t60, reverberate, sample_audiogram, snr_db, synthetic_corpus, synthetic_rir)
from nrhlc.training import Batch, TrainConfig, Trainer, fixed_source, load_processor, process
from nrhlc.wavio import read_wav

RNG = np.random.default_rng
TINY = ProcessorConfig.tiny().to_dict()


def test_criterion_01_nh_equivalence(criterion):
    t0 = time.time()
    model = default_model()
    rng = RNG(100)
    x = rng.standard_normal((20, 16000)) * 10 ** rng.uniform(-3, -0.5, (20, 1))
    nh = model.run(x).value
    hi = model.run(x, np.zeros((20, 10))).value
    identical = np.array_equal(nh, hi)
    dt = time.time() - t0
    ok = criterion(1, identical and dt < 60,
                   f"A_HI(x, 0 dB HL) == A_NH(x) bit-exact on 20 x 1 s: {identical}; {dt:.1f} s (< 60 s)")
    assert ok


def test_criterion_02_gradient_integrity(criterion):
    t0 = time.time()
    prim = primitive_suite(n_seeds=10)
    e2e = end2end_suite()
    worst_p = max(prim, key=lambda r: r.report.max_rel_error)
    dt = time.time() - t0
    ok = (all(r.passed for r in prim) and all(r.passed for r in e2e) and all(r.report.n_checked > 0 for r in prim)
          and dt < 600)
    criterion(2, ok, f"{len(prim)} primitives worst {worst_p.name} {worst_p.report.max_rel_error:.1e} (< 1e-4); "
                     f"end-to-end tiny processor + MAE auditory loss {e2e[0].report.max_rel_error:.1e} (< 1e-3); "
                     f"{dt:.0f} s")
    assert ok


def test_criterion_03_stft_reconstruction(criterion):
    t0 = time.time()
    cfg = StftConfig()
    rng = RNG(300)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2000, 40000))
        x = rng.standard_normal(n)
        y = istft_array(stft_array(x, cfg), n, cfg)
        interior = slice(cfg.frame_len, n - cfg.frame_len)
        worst = max(worst, float(np.sqrt(np.mean((x[interior] - y[interior]) ** 2))))
    dt = time.time() - t0
    ok = criterion(3, worst < 1e-6 and dt < 60,
                   f"512/256 Hann STFT round trip, worst interior RMS error {worst:.1e} over 100 signals (< 1e-6)")
    assert ok


def test_criterion_04_structural_constants(criterion):
    bands = BandSplitSpec.default()
    widths = bands.widths
    partition = bands.n_bands == 27 and int(widths.sum()) == 257 and np.all(widths > 0)
    fc = default_model().center_freqs
    erb_ok = fc.size == 31 and abs(fc[0] - 80) <= 0.01 and abs(fc[-1] - 7643) <= 0.01
    erb_ok &= np.allclose(fc, erb_space(80, 7643, 31))
    counts = {h: count_params(init_params(ProcessorConfig.full_scale(heads), RNG(0)))
              for h, heads in (("single", ("NR",)), ("dual", ("NR", "HLC")))}
    size_ok = all(3.7e6 <= c <= 5.2e6 for c in counts.values())
    ok = criterion(4, partition and erb_ok and size_ok,
                   f"K={bands.n_bands} bands over {int(widths.sum())} bins; {fc.size} ERB channels "
                   f"{fc[0]:.3f}..{fc[-1]:.3f} Hz; full-scale params {counts['single']:,} / {counts['dual']:,}")
    assert ok


def test_criterion_05_hearing_loss_split(criterion):
    rng = RNG(500)
    tot, mx = rng.uniform(0, 105, 1000), rng.uniform(0, 60, 1000)
    prof = split_hearing_loss(tot, mx)
    err = 0.0
    for i in range(1000):
        ohc = min(2.0 / 3.0 * float(tot[i]), float(mx[i]))
        err = max(err, abs(prof.hl_ohc[i] - ohc), abs(prof.hl_ihc[i] - (float(tot[i]) - ohc)))
    sampler = AudiogramSampler()
    draws = np.array([sample_audiogram(sampler, rng).thresholds for _ in range(10000)])
    in_range = draws.min() >= 0 and draws.max() <= 105
    ok = criterion(5, err <= 1e-12 and in_range,
                   f"OHC/IHC split max deviation {err:.1e} over 1000 pairs (<= 1e-12); 10000 sampled audiograms "
                   f"in [{draws.min():.1f}, {draws.max():.1f}] dB HL")
    assert ok


def test_criterion_06_uncertainty_dynamics(criterion):
    corpus = synthetic_corpus(seed=0, n_speech=4, n_noise=4, duration=1.0)
    stream = SceneStream(SceneConfig(scene_len=0.25, seed=5), corpus)
    batch = Batch.from_scenes([stream[i] for i in range(4)])
    cfg = TrainConfig.from_dict({"mode": "c-nr-hlc", "loss": "mae", "batch_size": 4, "u_lr_scale": 50.0,
                                 "processor": TINY})
    tr = Trainer(cfg, fixed_source(batch))
    theta = {k: t.value.copy() for k, t in tr.processor.params.items()}
    first = tr.train_step(update_theta=False).losses
    at_zero = abs(first["total"] - (first["l_nr"] + first["l_hlc"]))
    for _ in range(299):
        tr.train_step(update_theta=False)
    frozen = all(np.array_equal(v, tr.processor.params[k].value) for k, v in theta.items())
    d_nr = abs(tr.u.u_nr.item() - np.log(first["l_nr"]))
    d_hlc = abs(tr.u.u_hlc.item() - np.log(first["l_hlc"]))
    ok = criterion(6, frozen and d_nr < 1e-2 and d_hlc < 1e-2 and at_zero <= 1e-12,
                   f"u-only Adam (300 steps): |u_NR - ln L_NR| = {d_nr:.1e}, |u_HLC - ln L_HLC| = {d_hlc:.1e} "
                   f"(< 1e-2); total at u=0 minus (L_NR + L_HLC) = {at_zero:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_07_desk_learning(criterion):
    t0 = time.time()
    corpus = synthetic_corpus(seed=0, n_speech=8, n_noise=5, duration=2.0)
    stream = SceneStream(SceneConfig(scene_len=0.5, seed=0), corpus)
    batch = Batch.from_scenes([stream[i] for i in range(8)])
    desk = ProcessorConfig(n_channels=16, n_layers=2).to_dict()

    cfg = TrainConfig.from_dict({"mode": "c-nr-hlc", "loss": "mse", "batch_size": 8, "processor": desk})
    tr = Trainer(cfg, fixed_source(batch))
    start = tr.train_step().losses["total"]
    tr.run(199)
    end = tr.losses(batch)["total"]
    drop = 1 - end / start

    cfg = TrainConfig.from_dict({"mode": "nr", "loss": "mse", "batch_size": 8, "processor": desk})
    tr = Trainer(cfg, fixed_source(batch))
    tr.run(500)
    y_hat = process(tr.processor, batch.x)["NR"]
    noisy = np.mean([sdr(batch.y[i], batch.x[i]) for i in range(8)])
    gain = np.mean([sdr(batch.y[i], y_hat[i]) for i in range(8)]) - noisy
    dt = time.time() - t0
    ok = criterion(7, drop >= 0.5 and gain >= 3.0 and dt < 1800,
                   f"C-NR-HLC objective {start:.1f} -> {end:.1f} after 200 steps ({100 * drop:.1f}% drop, >= 50%); "
                   f"NR-mode SDR +{gain:.2f} dB over noisy after 500 steps (>= 3 dB); {dt / 60:.1f} min")
    assert ok


def test_criterion_08_alpha_mixing(criterion, tmp_path):
    cfg = {"mode": "c-nr-hlc", "loss": "mae", "batch_size": 2, "processor": TINY, "scene": {"scene_len": 0.25},
           "corpus": {"kind": "synthetic", "seed": 1, "n_speech": 2, "n_noise": 2, "duration": 0.5,
                      "n_test_speech": 1, "n_test_noise": 1}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "cfg.json"), "--steps", "3", "--out", str(tmp_path / "run"),
                 "--log-every", "0"]) == 0
    assert main(["freeze-testset", "--config", str(tmp_path / "cfg.json"), "--n", "1",
                 "--out", str(tmp_path / "ts")]) == 0
    ckpt, wav = tmp_path / "run" / "final.ckpt", tmp_path / "ts" / "scene_00000" / "x.wav"
    audiogram = "20,25,30,40,50,55,60,65,70,70"

    def run(alpha):
        out = tmp_path / f"a{alpha}.wav"
        assert main(["process", "--checkpoint", str(ckpt), "--input", str(wav), "--audiogram", audiogram,
                     "--alpha", str(alpha), "--output", str(out), "--sample-format", "float64"]) == 0
        return read_wav(out)
    processor, _, _ = load_processor(ckpt)
    heads = process(processor, read_wav(wav), np.array([float(v) for v in audiogram.split(",")]))
    a1, a0, mid = run(1.0), run(0.0), run(0.6)
    same1 = a1.tobytes() == heads["NR"].tobytes()
    same0 = a0.tobytes() == heads["HLC"].tobytes()
    mix_err = float(np.max(np.abs(mid - (0.6 * heads["NR"] + 0.4 * heads["HLC"]))))
    distinct = not np.array_equal(heads["NR"], heads["HLC"])
    ok = criterion(8, same1 and same0 and mix_err <= 1e-12 and distinct,
                   f"process alpha=1 byte-identical to NR head: {same1}; alpha=0 to HLC head: {same0}; "
                   f"alpha=0.6 max deviation from convex mix {mix_err:.1e} (<= 1e-12)")
    assert ok


def test_criterion_09_reproducibility(criterion, tmp_path):
    def cfg():
        return TrainConfig.from_dict({
            "mode": "c-nr-hlc", "loss": "mae", "batch_size": 2, "processor": TINY, "seed": 9,
            "scene": {"scene_len": 0.2, "seed": 9},
            "corpus": {"kind": "synthetic", "seed": 9, "n_speech": 4, "n_noise": 3, "duration": 0.6}})
    trace_a = [r.losses for r in Trainer(cfg()).run(100)]
    trace_b = [r.losses for r in Trainer(cfg()).run(100)]
    part = Trainer(cfg())
    head = [r.losses for r in part.run(50)]
    part.save(tmp_path / "mid.ckpt")
    tail = [r.losses for r in Trainer.resume(tmp_path / "mid.ckpt").run(50)]
    same_runs = trace_a == trace_b
    same_resume = head + tail == trace_a

    files_equal = True
    for d in ("f1", "f2"):
        assert main(["freeze-testset", "--n", "3", "--scene-len", "0.3", "--seed", "4", "--out",
                     str(tmp_path / d)]) == 0
    for p in sorted((tmp_path / "f1").rglob("*")):
        if p.is_file():
            files_equal &= p.read_bytes() == (tmp_path / "f2" / p.relative_to(tmp_path / "f1")).read_bytes()
    ok = criterion(9, same_runs and same_resume and files_equal,
                   f"100-step traces identical: {same_runs}; save at 50 + resume matches: {same_resume}; "
                   f"frozen test sets byte-identical: {files_equal}")
    assert ok


def test_criterion_10_scene_statistics(criterion):
    corpus = synthetic_corpus(seed=0, n_speech=4, n_noise=5, duration=1.0)
    cfg = SceneConfig(scene_len=0.5, seed=10)
    snr_err = 0.0
    for i in range(20):
        s = generate_scene(cfg, corpus, i, rir_provider=anechoic_rir, keep_components=True)
        for noise, meta in zip(s.components["noises"], s.metadata["noises"]):
            snr_err = max(snr_err, abs(snr_db(s.components["reverberant_speech"], noise) - meta["snr_db"]))
    t60_err = 0.0
    for t60 in (0.1, 0.25, 0.4, 0.55, 0.7):
        for seed in range(5):
            t60_err = max(t60_err, abs(measure_t60(synthetic_rir(t60, seed)) / t60 - 1))
    s = RNG(10).standard_normal(4000)
    rir = np.zeros(1200)
    rir[0], rir[400], rir[960] = 1.0, 0.5, 0.8       # direct, 25 ms, 60 ms
    y = early_target(s, rir)
    trunc_ok = (np.allclose(y, s + 0.5 * np.r_[np.zeros(400), s[:-400]], atol=1e-10)
                and np.allclose(reverberate(s, rir) - y, 0.8 * np.r_[np.zeros(960), s[:-960]], atol=1e-10))
    ok = criterion(10, snr_err <= 1e-6 and t60_err <= 0.10 and trunc_ok,
                   f"mixture SNR max error {snr_err:.1e} dB (<= 1e-6); T60 max relative error "
                   f"{100 * t60_err:.1f}% (<= 10%); 50 ms truncation of constructed RIR: {trunc_ok}")
    assert ok
