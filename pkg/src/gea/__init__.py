"""Global energy anchoring analysis for low-light image enhancement.

Least-squares affine photometric anchoring, residual energy decomposition,
Haar-domain luminance tools, ECC pair registration and reference metrics.
"""

__version__ = "0.1.0"

from .anchoring import (AnchorMatrix, Family, MatrixDiagnostics, apply_anchor, diagnostics,
                        fit_anchor, fit_residual, ideal_gea, matrix_loss)
from .energy import (Channel, EnergyReport, ResidualHistogram, decompose_energy,
                     luminance_error_ratio, residual_histogram)
from .errors import (DegenerateFitError, DegenerateInputError, EmptyRegionError, GEAError,
                     InvalidInputError)
from .imgcore import (YuvImage, clamp01, laplacian, rgb_to_yuv, to_grayscale, yuv_to_rgb)
from .io import load_image, save_image
from .metrics import PairScore, l_color, l_rec, pair_score, psnr, ssim
from .registration import (Crop, EccResult, GeoWarp, MotionModel, ecc_register, ecc_value,
                           register_pair, shared_valid_crop, warp_image)
from .wavelet import (WaveletBands, clu_apply, dwt_haar, hf_freq_loss, idwt_haar,
                      lum_preservation_loss)

__all__ = [
    "AnchorMatrix", "Family", "MatrixDiagnostics", "apply_anchor", "diagnostics", "fit_anchor",
    "fit_residual", "ideal_gea", "matrix_loss",
    "Channel", "EnergyReport", "ResidualHistogram", "decompose_energy", "luminance_error_ratio",
    "residual_histogram",
    "DegenerateFitError", "DegenerateInputError", "EmptyRegionError", "GEAError",
    "InvalidInputError",
    "YuvImage", "clamp01", "laplacian", "rgb_to_yuv", "to_grayscale", "yuv_to_rgb",
    "load_image", "save_image",
    "PairScore", "l_color", "l_rec", "pair_score", "psnr", "ssim",
    "Crop", "EccResult", "GeoWarp", "MotionModel", "ecc_register", "ecc_value", "register_pair",
    "shared_valid_crop", "warp_image",
    "WaveletBands", "clu_apply", "dwt_haar", "hf_freq_loss", "idwt_haar",
    "lum_preservation_loss",
]
