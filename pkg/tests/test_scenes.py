import json

import numpy as np
import pytest
from scipy import stats

from nrhlc.auditory import Audiogram
from nrhlc.scenes import (AudiogramSampler, SceneConfig, SceneStream, anechoic_rir, early_target,
                          freeze_test_set, generate_scene, load_frozen_scenes, manifest_corpus,
                          measure_t60, mix_at_snr, reverberate, sample_audiogram, snr_db,
                          standard_audiograms, synthetic_corpus, synthetic_rir)
from nrhlc.scenes.corpus import NOISE_KINDS, synthetic_noise
from nrhlc.wavio import write_wav

RNG = np.random.default_rng
SHORT = SceneConfig(scene_len=0.5)


@pytest.fixture(scope="module")
def corpus():
    return synthetic_corpus(seed=1, n_speech=4, n_noise=5, duration=1.0, n_test_speech=2, n_test_noise=2)


# ---------------------------------------------------------------------------
# audiograms

def test_standard_profiles():
    prof = standard_audiograms()
    assert len(prof) == 11
    assert prof["NH"].is_normal()
    assert set(prof) == {"NH", "N1", "N2", "N3", "N4", "N5", "N6", "N7", "S1", "S2", "S3"}
    # N profiles get monotonically worse
    means = [prof[f"N{i}"].thresholds.mean() for i in range(1, 8)]
    assert means == sorted(means)


def test_sampler_clipping_and_determinism():
    sampler = AudiogramSampler()
    rng = RNG(0)
    draws = np.array([sample_audiogram(sampler, rng).thresholds for _ in range(10000)])
    assert draws.min() >= 0 and draws.max() <= 105
    assert np.array_equal(sample_audiogram(sampler, RNG(5)).thresholds, sample_audiogram(sampler, RNG(5)).thresholds)


def test_nh_with_negative_jitter_clips_to_zero():
    class AllLow:
        def integers(self, n):
            return 0

        def uniform(self, lo, hi, size):
            return np.full(size, lo)
    _, a = AudiogramSampler().sample(AllLow())
    assert a.is_normal()


def test_profile_choice_is_uniform():
    sampler = AudiogramSampler()
    rng = RNG(1)
    names = [sampler.sample(rng)[0] for _ in range(11000)]
    counts = [names.count(n) for n in sampler.names]
    assert stats.chisquare(counts).pvalue > 1e-3


# ---------------------------------------------------------------------------
# acoustics

def test_mix_at_snr():
    rng = RNG(2)
    s, n = rng.standard_normal(1000), rng.standard_normal(1000)
    assert np.sum(mix_at_snr(s, n, 0.0) ** 2) == pytest.approx(np.sum(s ** 2), rel=1e-9)
    assert np.sum(mix_at_snr(s, n, 20.0) ** 2) == pytest.approx(np.sum(s ** 2) / 100, rel=1e-9)
    e1 = np.sum(mix_at_snr(s, n, 5.0) ** 2)
    assert np.sum(mix_at_snr(2 * s, n, 5.0) ** 2) == pytest.approx(4 * e1, rel=1e-12)
    with pytest.raises(ValueError):
        mix_at_snr(np.zeros(5), n[:5], 0.0)


@pytest.mark.parametrize("t60", [0.1, 0.3, 0.7])
def test_synthetic_rir_decay(t60):
    for seed in range(3):
        h = synthetic_rir(t60, seed)
        assert h[0] == 1.0
        assert measure_t60(h) == pytest.approx(t60, rel=0.10)
    assert not np.array_equal(synthetic_rir(t60, 0), synthetic_rir(t60, 1))


def test_synthetic_rir_range():
    with pytest.raises(ValueError):
        synthetic_rir(0.01, 0)
    with pytest.raises(ValueError):
        synthetic_rir(2.0, 0)


def test_early_target_anechoic_and_short_rir():
    s = RNG(3).standard_normal(800)
    rir = np.zeros(10)
    rir[4] = 1.0
    np.testing.assert_allclose(early_target(s, rir), np.r_[np.zeros(4), s[:-4]], atol=1e-12)
    short = RNG(4).standard_normal(300) * 0.1
    short[0] = 1.0
    np.testing.assert_allclose(early_target(s, short), reverberate(s, short), atol=1e-12)


def test_early_target_drops_late_tap():
    s = RNG(5).standard_normal(4000)
    rir = np.zeros(1200)
    rir[0], rir[400], rir[960] = 1.0, 0.5, 0.8  # 25 ms and 60 ms
    x = reverberate(s, rir)
    y = early_target(s, rir)
    expect_y = s + 0.5 * np.r_[np.zeros(400), s[:-400]]
    np.testing.assert_allclose(y, expect_y, atol=1e-10)
    np.testing.assert_allclose(x - y, 0.8 * np.r_[np.zeros(960), s[:-960]], atol=1e-10)


# ---------------------------------------------------------------------------
# corpora

def test_synthetic_sources():
    rng = RNG(6)
    for kind in NOISE_KINDS:
        x = synthetic_noise(rng, 0.5, kind)
        assert x.shape == (8000,) and np.isfinite(x).all() and np.std(x) > 0
    with pytest.raises(ValueError):
        synthetic_noise(rng, 0.5, "pop")


def test_synthetic_corpus_is_deterministic(corpus):
    a = corpus.select("speech", "train")[0].load()
    b = synthetic_corpus(seed=1, n_speech=4, n_noise=5, duration=1.0).select("speech", "train")[0].load()
    np.testing.assert_array_equal(a, b)
    assert len(corpus.select("noise", "test")) == 2


def test_manifest_corpus(tmp_path):
    for name in ("s.wav", "n.wav"):
        write_wav(tmp_path / name, RNG(7).uniform(-0.5, 0.5, 4000))
    (tmp_path / "m.csv").write_text("path,role,split\ns.wav,speech,train\nn.wav,noise,train\n")
    c = manifest_corpus(tmp_path / "m.csv")
    assert len(c.select("speech", "train")) == 1
    scene = generate_scene(SceneConfig(scene_len=0.2), c, 0)
    assert scene.x.shape == (3200,)
    (tmp_path / "bad.csv").write_text("path,role,split\ns.wav,voice,train\n")
    with pytest.raises(ValueError):
        manifest_corpus(tmp_path / "bad.csv")


# ---------------------------------------------------------------------------
# scenes

def test_scene_basic_properties(corpus):
    s = generate_scene(SHORT, corpus, 0)
    assert s.x.shape == s.y.shape == (SHORT.n_samples,)
    assert np.max(np.abs(s.x)) == pytest.approx(0.5)
    assert -10 <= min(n["snr_db"] for n in s.metadata["noises"])
    assert 0.1 <= s.metadata["t60_s"] <= 0.7
    assert 1 <= len(s.metadata["noises"]) <= 3


def test_scene_replay_is_bit_identical(corpus):
    a, b = generate_scene(SHORT, corpus, 7), generate_scene(SHORT, corpus, 7)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert a.metadata == b.metadata
    c = generate_scene(SHORT, corpus, 8)
    assert not np.array_equal(a.x, c.x)


def test_measured_snr_matches_metadata(corpus):
    for i in range(5):
        s = generate_scene(SHORT, corpus, i, rir_provider=anechoic_rir, keep_components=True)
        speech = s.components["reverberant_speech"]
        for noise, meta in zip(s.components["noises"], s.metadata["noises"]):
            assert abs(snr_db(speech, noise) - meta["snr_db"]) < 1e-6
        np.testing.assert_allclose(s.x - np.sum(s.components["noises"], axis=0), speech, atol=1e-15)
        np.testing.assert_allclose(s.y, speech, atol=1e-15)  # anechoic target equals the dry speech


def test_noise_count_is_uniform():
    from nrhlc.scenes.generator import scene_rng
    counts = np.zeros(3)
    for i in range(10000):
        rng = scene_rng(0, i)
        rng.integers(4)          # speech item
        rng.integers(1000)       # segment start
        counts[int(rng.integers(1, 4)) - 1] += 1
    assert stats.chisquare(counts).pvalue > 1e-3


def test_noise_count_distribution_in_scenes(corpus):
    cfg = SceneConfig(scene_len=0.05, t60_range=(0.1, 0.1))
    n = [len(generate_scene(cfg, corpus, i, rir_provider=anechoic_rir).metadata["noises"]) for i in range(600)]
    assert stats.chisquare(np.bincount(n)[1:]).pvalue > 1e-3


def test_empty_split_errors(corpus):
    from nrhlc.scenes import Corpus
    with pytest.raises(ValueError, match="no speech"):
        generate_scene(SHORT, Corpus([], {}), 0)


def test_silent_source_retry_cap(tmp_path):
    write_wav(tmp_path / "s.wav", np.zeros(4000))
    write_wav(tmp_path / "n.wav", RNG(8).uniform(-0.5, 0.5, 4000))
    (tmp_path / "m.csv").write_text("path,role,split\ns.wav,speech,train\nn.wav,noise,train\n")
    with pytest.raises(RuntimeError, match="non-silent"):
        generate_scene(SceneConfig(scene_len=0.1), manifest_corpus(tmp_path / "m.csv"), 0)


def test_freeze_round_trip(tmp_path, corpus):
    stream = SceneStream(SceneConfig(scene_len=0.25, split="test"), corpus)
    freeze_test_set(tmp_path / "a", stream, 3, {"tool": "test"})
    freeze_test_set(tmp_path / "b", stream, 3, {"tool": "test"})
    for name in ("x.wav", "y.wav", "audiogram.json", "meta.json"):
        for i in range(3):
            pa = tmp_path / "a" / f"scene_{i:05d}" / name
            assert pa.read_bytes() == (tmp_path / "b" / f"scene_{i:05d}" / name).read_bytes()
    scenes = load_frozen_scenes(tmp_path / "a")
    assert len(scenes) == 3
    np.testing.assert_allclose(scenes[0].x, stream[0].x, atol=1e-7)
    assert isinstance(scenes[0].audiogram, Audiogram)
    assert json.loads((tmp_path / "a" / "index.json").read_text())["manifest"] == {"tool": "test"}


def test_scene_config_validation():
    with pytest.raises(ValueError):
        SceneConfig(scene_len=0)
    with pytest.raises(ValueError, match="unknown"):
        SceneConfig.from_dict({"snr": 3})
    assert SceneConfig.from_dict(SHORT.to_dict()) == SHORT
