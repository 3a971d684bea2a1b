"""Band-split recurrent speech processor with NR and HLC heads."""
from .bands import BandSplitSpec, default_band_edges
from .network import (HEADS, Processor, ProcessorConfig, apply_mask, audiogram_embed, band_split,
                      count_params, dual_path_layer, expected_param_count, film, forward, init_params,
                      mask_estimate)

__all__ = [
    "BandSplitSpec", "HEADS", "Processor", "ProcessorConfig", "apply_mask", "audiogram_embed",
    "band_split", "count_params", "default_band_edges", "dual_path_layer", "expected_param_count",
    "film", "forward", "init_params", "mask_estimate",
]
