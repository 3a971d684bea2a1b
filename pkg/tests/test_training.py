import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrhlc.autodiff import Tensor
from nrhlc.objectives import UncertaintyParams, sdr
from nrhlc.processor import ProcessorConfig
from nrhlc.auditory import Audiogram
from nrhlc.scenes import SceneConfig, SceneStream, synthetic_corpus
from nrhlc.training import (AdamState, Batch, ConfigError, Mode, TrainConfig, Trainer, TrainingDiverged,
                            adam_step, clip_gradients, evaluate, fit_uncertainty, fixed_source, global_norm,
                            lr_at, summarize)

RNG = np.random.default_rng
TINY = ProcessorConfig.tiny().to_dict()


@pytest.fixture(scope="module")
def corpus():
    return synthetic_corpus(seed=3, n_speech=3, n_noise=3, duration=0.6, n_test_speech=2, n_test_noise=2)


@pytest.fixture(scope="module")
def batch(corpus):
    stream = SceneStream(SceneConfig(scene_len=0.2, seed=1), corpus)
    return Batch.from_scenes([stream[i] for i in range(2)])


def tiny_cfg(mode="c-nr-hlc", **kw):
    d = {"mode": mode, "loss": None if mode == "sdr" else "mse", "batch_size": 2, "processor": TINY,
         "scene": {"scene_len": 0.2, "seed": 1}, "corpus": {"kind": "synthetic", "seed": 3, "n_speech": 3,
                                                             "n_noise": 3, "duration": 0.6}}
    d.update(kw)
    return TrainConfig.from_dict(d)


# ---------------------------------------------------------------------------
# optimiser pieces

def test_clip_examples():
    g = {"a": np.array([2.0, 0.0])}
    assert clip_gradients(g)["a"] is g["a"]
    big = {"a": np.array([6.0, 0.0]), "b": np.array([[8.0]])}
    out = clip_gradients(big)
    assert global_norm(out) == pytest.approx(5.0, abs=1e-9)
    np.testing.assert_array_equal(out["a"], [3.0, 0.0])
    z = {"a": np.zeros(3)}
    np.testing.assert_array_equal(clip_gradients(z)["a"], 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_clipped_norm_bounded(vals):
    out = clip_gradients({"a": np.array(vals)})
    assert global_norm(out) <= 5 + 1e-9


def test_lr_schedule():
    assert lr_at(0) == 1e-3
    assert lr_at(9999) == 1e-3
    assert lr_at(10_000) == pytest.approx(9.9e-4, rel=1e-12)
    assert lr_at(2_000_000) == pytest.approx(1.3397967e-4, rel=1e-6)
    with pytest.raises(ValueError):
        lr_at(-1)


def test_adam_zero_gradient_and_first_step():
    p = {"w": Tensor(np.array([1.0, -2.0]))}
    st_ = AdamState()
    adam_step(p, {"w": np.zeros(2)}, st_, 1e-3)
    np.testing.assert_array_equal(p["w"].value, [1.0, -2.0])
    assert st_.step == 1
    q = {"s": Tensor(0.0)}
    adam_step(q, {"s": np.array(1.0)}, AdamState(), 1e-3)
    assert q["s"].item() == pytest.approx(-1e-3, rel=1e-7)


def test_adam_matches_textbook_and_converges():
    p = {"t": Tensor(np.array([1.0, -2.0, 0.5]))}
    st_ = AdamState()
    th, m, v = p["t"].value.copy(), np.zeros(3), np.zeros(3)
    for t in range(1, 501):
        adam_step(p, {"t": p["t"].value.copy()}, st_, 0.1)
        m = 0.9 * m + 0.1 * th
        v = 0.999 * v + 0.001 * th * th
        th = th - 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p["t"].value, th, rtol=1e-9, atol=1e-15)
    assert np.linalg.norm(p["t"].value) < 1e-3


def test_adam_state_round_trip():
    p = {"w": Tensor(RNG(0).standard_normal(3))}
    st_ = AdamState()
    adam_step(p, {"w": np.ones(3)}, st_, 1e-2)
    back = AdamState.restore(st_.meta(), st_.arrays())
    assert back.step == 1
    np.testing.assert_array_equal(back.m["w"], st_.m["w"])


# ---------------------------------------------------------------------------
# configuration

def test_mode_heads_and_conditioning():
    assert Mode.C_NR_HLC.heads == ("NR", "HLC")
    assert not Mode.SDR.conditioned and not Mode.SDR.uses_auditory_model
    cfg = tiny_cfg("hlc")
    assert cfg.processor.heads == ("HLC",) and cfg.processor.audiogram_conditioning


def test_config_validation():
    with pytest.raises(ConfigError, match="no loss"):
        TrainConfig.from_dict({"mode": "sdr", "loss": "mse"})
    with pytest.raises(ConfigError, match="unknown"):
        TrainConfig.from_dict({"mode": "nr", "learning_rate": 1})
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"mode": "nr-only"})
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"mode": "nr", "loss": "huber"})
    assert TrainConfig.from_dict({"mode": "sdr"}).loss_kind is None
    cfg = tiny_cfg()
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


# ---------------------------------------------------------------------------
# training steps

def test_controllable_total_at_zero_u(batch):
    tr = Trainer(tiny_cfg(), fixed_source(batch))
    rep = tr.train_step()
    assert rep.losses["total"] == pytest.approx(rep.losses["l_nr"] + rep.losses["l_hlc"], abs=1e-12)
    assert rep.losses["u_nr"] != 0  # u received an update


@pytest.mark.parametrize("mode", ["sdr", "nr", "hlc", "nr-hlc", "c-nr-hlc"])
def test_each_mode_runs(batch, mode):
    tr = Trainer(tiny_cfg(mode), fixed_source(batch))
    before = {k: t.value.copy() for k, t in tr.processor.params.items()}
    rep = tr.train_step()
    assert np.isfinite(rep.losses["total"])
    assert any(not np.array_equal(before[k], t.value) for k, t in tr.processor.params.items())
    assert (tr.model is None) == (mode == "sdr")


def test_hlc_nh_batch_loss_decreases(batch):
    nh = Batch(batch.x, batch.y, np.zeros((2, 10)))
    tr = Trainer(tiny_cfg("hlc", lr0=3e-3), fixed_source(nh))
    first = tr.losses(nh)["total"]
    tr.run(50)
    assert tr.losses(nh)["total"] < first


def test_fixed_seed_traces_identical():
    a = [r.losses for r in Trainer(tiny_cfg()).run(3)]
    b = [r.losses for r in Trainer(tiny_cfg()).run(3)]
    assert a == b


def test_resume_is_bit_identical(tmp_path):
    ref = Trainer(tiny_cfg())
    full = ref.run(4)
    tr = Trainer(tiny_cfg())
    tr.run(2)
    tr.save(tmp_path / "c.ckpt")
    resumed = Trainer.resume(tmp_path / "c.ckpt")
    assert resumed.step == 2 and resumed.scenes_seen == 4
    tail = resumed.run(2)
    assert [r.losses for r in full[2:]] == [r.losses for r in tail]
    for k, t in ref.processor.params.items():
        assert np.array_equal(t.value, resumed.processor.params[k].value), k


def test_nan_loss_aborts_with_metadata(batch):
    bad = Batch(np.full_like(batch.x, np.nan), batch.y, batch.thresholds, [{"index": 7}, {"index": 8}])
    tr = Trainer(tiny_cfg("sdr"), fixed_source(bad))
    with pytest.raises(TrainingDiverged, match="step 1") as e:
        tr.train_step()
    assert e.value.metadata[0]["index"] == 7


def test_fit_uncertainty_closed_form():
    u = fit_uncertainty(np.e, 0.3, steps=3000, lr=1e-2)
    assert u.u_nr.item() == pytest.approx(1.0, abs=1e-2)
    assert u.u_hlc.item() == pytest.approx(np.log(0.3), abs=1e-2)
    assert isinstance(u, UncertaintyParams)


# ---------------------------------------------------------------------------
# evaluation

def test_evaluate_protocol(tmp_path, batch, corpus):
    stream = SceneStream(SceneConfig(scene_len=0.2, seed=4, split="test"), corpus)
    scenes = [stream[0], stream[1]]
    tr = Trainer(tiny_cfg(), fixed_source(batch))
    rows = evaluate(scenes, tr.processor, [0.0, 0.5, 1.0], export_dir=tmp_path / "ex")
    assert len(rows) == 2 * 11 * 3
    table = summarize(rows)
    assert [r["alpha"] for r in table] == [0.0, 0.5, 1.0]
    assert {"sdr_nh", "sdr_hi", "sdr_S3"} <= set(table[0])
    # alpha 1 is the NR head alone
    from nrhlc.training import process
    nr = process(tr.processor, scenes[0].x, Audiogram.normal().thresholds)["NR"]
    r = [c for c in rows if c.scene == 0 and c.profile == "NH" and c.alpha == 1.0][0]
    assert r.sdr_db == sdr(scenes[0].y, nr)
    files = list((tmp_path / "ex").glob("*.wav"))
    assert len(files) == 2 * 11 * 3 + 2
    assert len((tmp_path / "ex" / "scoring_manifest.csv").read_text().splitlines()) == 1 + 66


def test_evaluate_single_head_rejects_alpha(corpus):
    tr = Trainer(tiny_cfg("nr"))
    stream = SceneStream(SceneConfig(scene_len=0.2, split="test"), corpus)
    with pytest.raises(ValueError, match="dual-head"):
        evaluate([stream[0]], tr.processor, [0.5])
    rows = evaluate([stream[0]], tr.processor)
    assert len(rows) == 11 and len({r.sdr_db for r in rows}) == 1


def test_sdr_floor():
    y = RNG(0).standard_normal(100)
    assert sdr(y, y + 1e6 * RNG(1).standard_normal(100)) == -60.0
    assert sdr(y, np.zeros(100)) == pytest.approx(0.0, abs=1e-12)
