from .crops import (
    COVERAGE_HI,
    COVERAGE_LO,
    MAX_ATTEMPTS,
    NoValidWindowError,
    ShadowSample,
    coverage,
    crop_pair,
    has_valid_windows,
    make_sample,
    window_fractions,
)
from .io import ImageLoadError, load_image, load_mask, quantize, save_image, to_uint8
from .manifest import DatasetManifest, ManifestEntry, ManifestError, read_manifest, write_manifest
from .proxies import ShadowGenerator, darkening_factors, luminance, penumbra_ramp, pseudo_infrared, pseudo_shadow
from .synth import render_sample, synth_dataset
