"""Scene simulation: corpora, rooms, mixing and audiogram sampling."""
from .acoustics import (anechoic_rir, early_target, measure_t60, mix_at_snr, reverberate, snr_db,
                        synthetic_rir, truncate_rir)
from .audiograms import AudiogramSampler, sample_audiogram, standard_audiograms
from .corpus import Corpus, CorpusItem, load_corpus, manifest_corpus, synthetic_corpus
from .generator import (Scene, SceneConfig, SceneStream, freeze_test_set, generate_scene,
                        load_frozen_scenes, scene_rng)

__all__ = [
    "AudiogramSampler", "Corpus", "CorpusItem", "Scene", "SceneConfig", "SceneStream", "anechoic_rir",
    "early_target", "freeze_test_set", "generate_scene", "load_corpus", "load_frozen_scenes",
    "manifest_corpus", "measure_t60", "mix_at_snr", "reverberate", "sample_audiogram", "scene_rng",
    "snr_db", "standard_audiograms", "synthetic_corpus", "synthetic_rir", "truncate_rir",
]
