"""Differentiable auditory periphery model for normal and impaired hearing."""
from .audiogram import (AUDIOGRAM_FREQS, Audiogram, AudiogramError, HearingLossProfile,
                        interpolate_audiogram, load_audiogram, save_audiogram, split_hearing_loss)
from .drnl import (N_CHANNELS, DrnlKernels, DrnlParams, compute_ohc_max, design_kernels, drnl,
                   load_drnl_params, ohc_gain, path_responses, tone_level_to_amplitude)
from .model import AuditoryModel, default_model, run_model
from .periphery import (LogCompression, default_log_compression, ihc_transduction, log_compression,
                        middle_ear, middle_ear_taps)

__all__ = [
    "AUDIOGRAM_FREQS", "Audiogram", "AudiogramError", "AuditoryModel", "DrnlKernels", "DrnlParams",
    "HearingLossProfile", "LogCompression", "N_CHANNELS", "compute_ohc_max", "default_log_compression",
    "default_model", "design_kernels", "drnl", "ihc_transduction", "interpolate_audiogram",
    "load_audiogram", "load_drnl_params", "log_compression", "middle_ear", "middle_ear_taps",
    "ohc_gain", "path_responses", "run_model", "save_audiogram", "split_hearing_loss",
    "tone_level_to_amplitude",
]
