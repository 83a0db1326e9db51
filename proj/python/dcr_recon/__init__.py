"""Python bindings of the data-consistent CT reconstruction core.

Images are float32 arrays shaped (nz, ny, nx) in 1/mm; sinograms are shaped
(views, rows, cols) with an optional uint8 mask (0 unmeasured, 1 measured,
2 extrapolated).
"""

from ._dcr import (
    DcrError,
    ImageGrid,
    ScanGeometry,
    add_poisson_noise,
    backproject,
    fbp,
    forward_project,
    hu_to_mu,
    load_volume,
    mu_to_hu,
    phantom,
    reconstruct_dcr,
    resolve_config,
    restrict,
    rmse_hu,
    run_pipeline,
    save_volume,
    soft_threshold,
    ssim,
    validate_config,
    wce_extrapolate,
)

__all__ = [
    "DcrError",
    "ImageGrid",
    "ScanGeometry",
    "add_poisson_noise",
    "backproject",
    "fbp",
    "forward_project",
    "hu_to_mu",
    "load_volume",
    "mu_to_hu",
    "phantom",
    "reconstruct_dcr",
    "resolve_config",
    "restrict",
    "rmse_hu",
    "run_pipeline",
    "save_volume",
    "soft_threshold",
    "ssim",
    "validate_config",
    "wce_extrapolate",
]
