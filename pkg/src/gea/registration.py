"""ECC registration of image pairs and the shared valid-region crop.

Registration maximizes the zero-mean normalized cross-correlation (ZNCC)
between the reference and the warped input with forward-additive
Gauss-Newton steps (Evangelidis & Psarakis, 2008).  Because both images are
zero-meaned and normalized, the objective ignores affine intensity changes,
which matters for low-light/normal-light pairs.

A :class:`GeoWarp` ``p`` maps input pixel coordinates ``(x, y) = (col, row)``
to reference coordinates.  Internally the iteration works with the inverse
map (reference -> input), which is what resampling needs.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, EmptyRegionError, InvalidInputError
from .imgcore import as_image, as_plane, check_same_shape, to_grayscale

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 4
DEFAULT_MAX_ITERS = 200
DEFAULT_EPS = 1e-6
DEFAULT_SIGMA = 1.0
PYRAMID_MIN_SIDE = 512
PYRAMID_LEVELS = 3

_BOUNDS_TOL = 1e-9


class MotionModel(str, enum.Enum):
    TRANSLATION = "translation"
    EUCLIDEAN = "euclidean"
    AFFINE = "affine"

    @classmethod
    def parse(cls, name) -> "MotionModel":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise InvalidInputError(f"unknown motion model {name!r}") from None


@dataclass(frozen=True)
class GeoWarp:
    p: np.ndarray
    model: MotionModel = MotionModel.AFFINE

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64).reshape(2, 3)
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("warp entries must be finite")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "model", MotionModel.parse(self.model))

    @classmethod
    def identity(cls, model=MotionModel.AFFINE) -> "GeoWarp":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), model)

    @classmethod
    def translation(cls, tx: float, ty: float) -> "GeoWarp":
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]), MotionModel.TRANSLATION)

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.p[:, :2]))

    def is_invertible(self) -> bool:
        det = self.determinant
        return math.isfinite(det) and abs(det) > 1e-12

    def inverse_matrix(self) -> np.ndarray:
        """2 x 3 matrix of the inverse map (reference -> input)."""
        if not self.is_invertible():
            raise InvalidInputError("warp has a singular linear part")
        return _invert(self.p)

    def to_dict(self) -> dict:
        return {"model": self.model.value, "p": [float(x) for x in self.p.ravel()]}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoWarp":
        try:
            return cls(np.array(d["p"], dtype=float).reshape(2, 3), d["model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed warp object: {exc}") from None


@dataclass(frozen=True)
class EccResult:
    warp: GeoWarp
    final_ecc: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "warp": self.warp.to_dict(),
            "final_ecc": self.final_ecc,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class Crop:
    row0: int
    col0: int
    rows: int
    cols: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.row0, self.col0, self.rows, self.cols)

    def apply(self, img: np.ndarray) -> np.ndarray:
        return img[self.row0:self.row0 + self.rows, self.col0:self.col0 + self.cols]

    def to_dict(self) -> dict:
        return {"row0": self.row0, "col0": self.col0, "rows": self.rows, "cols": self.cols}


def _invert(m: np.ndarray) -> np.ndarray:
    lin = np.linalg.inv(m[:, :2])
    return np.hstack([lin, -(lin @ m[:, 2])[:, None]])


def _bilinear(planes: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Sample ``planes`` (H x W or H x W x C) at float coordinates.

    Returns ``(values, valid)``; ``valid`` is True where all four taps lie
    inside the image.  Invalid samples are 0.
    """
    h, w = planes.shape[:2]
    valid = ((xs >= -_BOUNDS_TOL) & (xs <= w - 1 + _BOUNDS_TOL)
             & (ys >= -_BOUNDS_TOL) & (ys <= h - 1 + _BOUNDS_TOL))
    xc = np.clip(xs, 0.0, w - 1)
    yc = np.clip(ys, 0.0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    if planes.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = planes[y0, x0] * (1.0 - fx) + planes[y0, x1] * fx
    bot = planes[y1, x0] * (1.0 - fx) + planes[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    vmask = valid[..., None] if planes.ndim == 3 else valid
    return np.where(vmask, out, 0.0), valid


def warp_image(img, w: GeoWarp, out_size: tuple[int, int] | None = None):
    """Resample ``img`` into the reference frame of ``w``.

    Each output pixel takes the bilinear value at the inverse-warped location.
    Returns ``(warped, mask)`` where ``mask`` is 1.0 where all four source taps
    are in bounds and 0.0 (with a zero output pixel) elsewhere.
    """
    img = as_image(img)
    inv = w.inverse_matrix()
    oh, ow = out_size if out_size is not None else img.shape[:2]
    ys, xs = np.mgrid[0:oh, 0:ow].astype(np.float64)
    if w.p[0, 0] == 1 and w.p[1, 1] == 1 and w.p[0, 1] == 0 and w.p[1, 0] == 0:
        # pure translation: avoid rounding in the inverse
        sx = xs - w.p[0, 2]
        sy = ys - w.p[1, 2]
    else:
        sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
        sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]
    out, valid = _bilinear(img, sx, sy)
    return out, valid.astype(np.float64)


def _zncc(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0 or np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateInputError("zero-variance image: ZNCC is undefined")
    a = a - a.mean()
    b = b - b.mean()
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("zero-variance image: ZNCC is undefined")
    return float(np.dot(a, b) / (na * nb))


def ecc_value(img, reference, warp: GeoWarp | None = None) -> float:
    """ZNCC between ``reference`` and ``img`` warped into its frame, over the valid mask."""
    src = to_grayscale(img)
    ref = to_grayscale(reference)
    if warp is None:
        check_same_shape(src, ref, names=("img", "reference"))
        return _zncc(src.ravel(), ref.ravel())
    warped, mask = warp_image(src, warp, ref.shape)
    m = mask > 0
    if not np.any(m):
        raise DegenerateInputError("warp leaves no overlap with the reference")
    return _zncc(warped[m], ref[m])


# --- iteration ---------------------------------------------------------------

def _n_params(model: MotionModel) -> int:
    return {MotionModel.TRANSLATION: 2, MotionModel.EUCLIDEAN: 3, MotionModel.AFFINE: 6}[model]


def _params_to_matrix(params: np.ndarray, model: MotionModel) -> np.ndarray:
    if model is MotionModel.TRANSLATION:
        return np.array([[1.0, 0.0, params[0]], [0.0, 1.0, params[1]]])
    if model is MotionModel.EUCLIDEAN:
        c, s = math.cos(params[0]), math.sin(params[0])
        return np.array([[c, -s, params[1]], [s, c, params[2]]])
    return params.reshape(2, 3).copy()


def _matrix_to_params(m: np.ndarray, model: MotionModel) -> np.ndarray:
    if model is MotionModel.TRANSLATION:
        return np.array([m[0, 2], m[1, 2]])
    if model is MotionModel.EUCLIDEAN:
        return np.array([math.atan2(m[1, 0], m[0, 0]), m[0, 2], m[1, 2]])
    return m.ravel().copy()


def _scale_params(params: np.ndarray, model: MotionModel, factor: float) -> np.ndarray:
    out = params.copy()
    if model is MotionModel.TRANSLATION:
        out *= factor
    elif model is MotionModel.EUCLIDEAN:
        out[1:] *= factor
    else:
        out[[2, 5]] *= factor
    return out


def _jacobian(model, params, gx, gy, x, y) -> np.ndarray:
    if model is MotionModel.TRANSLATION:
        return np.stack([gx, gy], axis=1)
    if model is MotionModel.EUCLIDEAN:
        c, s = math.cos(params[0]), math.sin(params[0])
        dtheta = gx * (-s * x - c * y) + gy * (c * x - s * y)
        return np.stack([dtheta, gx, gy], axis=1)
    return np.stack([gx * x, gx * y, gx, gy * x, gy * y, gy], axis=1)


class _Level:
    """Smoothed images and gradients for one pyramid level."""

    def __init__(self, src: np.ndarray, ref: np.ndarray, sigma: float):
        if sigma > 0:
            src = ndimage.gaussian_filter(src, sigma, mode="nearest")
            ref = ndimage.gaussian_filter(ref, sigma, mode="nearest")
        gy, gx = np.gradient(src)
        self.stack = np.stack([src, gx, gy], axis=-1)
        self.ref = ref
        ys, xs = np.mgrid[0:ref.shape[0], 0:ref.shape[1]].astype(np.float64)
        self.xs = xs.ravel()
        self.ys = ys.ravel()
        self.ref_flat = ref.ravel()

    def sample(self, q: np.ndarray):
        sx = q[0, 0] * self.xs + q[0, 1] * self.ys + q[0, 2]
        sy = q[1, 0] * self.xs + q[1, 1] * self.ys + q[1, 2]
        vals, valid = _bilinear(self.stack, sx, sy)
        return vals, valid

    def ecc(self, q: np.ndarray) -> float:
        vals, valid = self.sample(q)
        if np.count_nonzero(valid) < 2:
            return -math.inf
        try:
            return _zncc(vals[valid, 0], self.ref_flat[valid])
        except DegenerateInputError:
            return -math.inf


def _lambda(t, i, jt, ji, hinv_jt, hinv_ji) -> float:
    """Scale of the template term in the ECC update."""
    ti = float(np.dot(t, i))
    i_pg_i = float(np.dot(ji, hinv_ji))
    t_pg_i = float(np.dot(jt, hinv_ji))
    den = ti - t_pg_i
    if den > 0:
        return (float(np.dot(i, i)) - i_pg_i) / den
    t_pg_t = float(np.dot(jt, hinv_jt))
    lam1 = math.sqrt(max(i_pg_i, 0.0) / t_pg_t) if t_pg_t > 0 else 0.0
    lam2 = (t_pg_i - ti) / t_pg_t if t_pg_t > 0 else 0.0
    return max(lam1, lam2)


def _evaluate(level: _Level, params: np.ndarray, model: MotionModel):
    """ZNCC at ``params`` plus the zero-meaned samples needed for a step."""
    q = _params_to_matrix(params, model)
    if not np.all(np.isfinite(q)) or abs(np.linalg.det(q[:, :2])) < 1e-12:
        return None
    vals, valid = level.sample(q)
    if np.count_nonzero(valid) <= _n_params(model) + 1:
        return None
    i = vals[valid, 0]
    t = level.ref_flat[valid]
    t = t - t.mean()
    i = i - i.mean()
    nt = math.sqrt(float(np.dot(t, t)))
    ni = math.sqrt(float(np.dot(i, i)))
    if nt == 0.0 or ni == 0.0:
        return None
    rho = float(np.dot(t, i) / (nt * ni))
    return rho, vals, valid, t, i


def _step(level: _Level, params, model, state) -> np.ndarray | None:
    _, vals, valid, t, i = state
    jac = _jacobian(model, params, vals[valid, 1], vals[valid, 2],
                    level.xs[valid], level.ys[valid])
    jac -= jac.mean(axis=0)
    hess = jac.T @ jac
    ji = jac.T @ i
    jt = jac.T @ t
    try:
        hinv_ji = np.linalg.solve(hess, ji)
        hinv_jt = np.linalg.solve(hess, jt)
    except np.linalg.LinAlgError:
        return None
    lam = _lambda(t, i, jt, ji, hinv_jt, hinv_ji)
    delta = lam * hinv_jt - hinv_ji
    return delta if np.all(np.isfinite(delta)) else None


_MAX_HALVINGS = 6


def _run_level(level: _Level, params: np.ndarray, model: MotionModel, max_iters: int,
               eps: float):
    """Ascend on one level; returns ``(params, ecc, iterations, converged)``.

    Each Gauss-Newton step is halved until the ECC does not decrease, so the
    iterate is always the best warp seen.  Bilinear resampling makes the
    objective slightly non-smooth; when no fraction of the step improves it,
    the iterate is a local maximum at sampling resolution and the level stops
    as converged.
    """
    state = _evaluate(level, params, model)
    if state is None:
        return params, -math.inf, 0, False
    rho = state[0]
    it = 0
    for it in range(1, max_iters + 1):
        delta = _step(level, params, model, state)
        if delta is None:
            return params, rho, it, False
        accepted = None
        scale = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            cand = params + scale * delta
            cand_state = _evaluate(level, cand, model)
            if cand_state is not None and cand_state[0] >= rho:
                accepted = (cand, cand_state)
                break
            scale *= 0.5
        if accepted is None:
            return params, rho, it, True
        params, state = accepted
        gain = state[0] - rho
        rho = state[0]
        if gain < eps:
            return params, rho, it, True
    return params, rho, it, False


def _pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    out = [img]
    for _ in range(levels - 1):
        out.append(ndimage.gaussian_filter(out[-1], 1.0, mode="nearest")[::2, ::2])
    return out


def ecc_register(input, reference, model="affine", max_iters: int = DEFAULT_MAX_ITERS,
                 eps: float = DEFAULT_EPS, sigma: float = DEFAULT_SIGMA,
                 pyramid: bool | None = None, init: GeoWarp | None = None) -> EccResult:
    """Estimate the warp that maps ``input`` coordinates onto ``reference``.

    ``pyramid=None`` enables a 3-level coarse-to-fine schedule when either
    side exceeds 512 px.  The returned ECC is never below that of the starting
    warp; if no step improves on it the starting warp is returned.
    """
    model = MotionModel.parse(model)
    src = to_grayscale(input)
    ref = to_grayscale(reference)
    check_same_shape(src, ref, names=("input", "reference"))
    if int(max_iters) < 1:
        raise InvalidInputError("max_iters must be >= 1")
    if not eps > 0:
        raise InvalidInputError("eps must be > 0")
    if np.ptp(src) == 0 or np.ptp(ref) == 0:
        raise DegenerateInputError("zero-variance image: ZNCC is undefined")
    if pyramid is None:
        pyramid = max(src.shape) > PYRAMID_MIN_SIDE
    levels = PYRAMID_LEVELS if pyramid else 1
    while levels > 1 and min(src.shape) >> (levels - 1) < 16:
        levels -= 1

    start = init if init is not None else GeoWarp.identity(model)
    q0 = start.inverse_matrix()
    params0 = _matrix_to_params(q0, model)
    params = _scale_params(params0, model, 0.5 ** (levels - 1))

    src_pyr, ref_pyr = _pyramid(src, levels), _pyramid(ref, levels)
    finest = None
    total_iters = 0
    converged = False
    rho = -math.inf
    for lvl in range(levels - 1, -1, -1):
        level = _Level(src_pyr[lvl], ref_pyr[lvl], sigma)
        params, rho, iters, converged = _run_level(level, params, model, int(max_iters), eps)
        total_iters += iters
        if lvl > 0:
            params = _scale_params(params, model, 2.0)
        finest = level

    start_rho = finest.ecc(_params_to_matrix(params0, model))
    if start_rho == -math.inf and rho == -math.inf:
        raise DegenerateInputError("zero-variance image: ZNCC is undefined")
    if not rho >= start_rho:
        log.debug("ECC did not improve on the starting warp (%.6g < %.6g)", rho, start_rho)
        params, rho = params0, start_rho

    q = _params_to_matrix(params, model)
    if abs(np.linalg.det(q[:, :2])) < 1e-12:
        return EccResult(start, start_rho, total_iters, False)
    return EccResult(GeoWarp(_invert(q), model), float(rho), total_iters, converged)


# --- cropping ------------------------------------------------------------------

def _largest_rectangle(valid: np.ndarray) -> tuple[int, int, int, int]:
    """Largest all-True axis-aligned rectangle ``(row0, col0, rows, cols)``."""
    h, w = valid.shape
    heights = np.zeros(w + 1, dtype=np.int64)
    best = (0, 0, 0, 0)
    best_area = 0
    for r in range(h):
        heights[:w] = np.where(valid[r], heights[:w] + 1, 0)
        stack: list[int] = []
        for c in range(w + 1):
            hc = heights[c]
            start = c
            while stack and heights[stack[-1]] >= hc:
                top = stack.pop()
                ht = int(heights[top])
                left = stack[-1] + 1 if stack else 0
                area = ht * (c - left)
                if area > best_area:
                    best_area = area
                    best = (r - ht + 1, left, ht, c - left)
                start = top
            stack.append(c)
    return best


def shared_valid_crop(masks, margin: int = DEFAULT_MARGIN) -> Crop:
    """Rectangle valid in every mask, shrunk by ``margin`` on each side.

    When the intersection of the masks is itself a rectangle this is its
    bounding box.  Otherwise (e.g. rotated warps) the largest axis-aligned
    rectangle containing only valid pixels is used, so the crop never covers
    a masked-out pixel.
    """
    masks = [as_plane(m, "mask") for m in masks]
    if not masks:
        raise InvalidInputError("need at least one mask")
    check_same_shape(*masks, names=[f"mask{i}" for i in range(len(masks))])
    margin = int(margin)
    if margin < 0:
        raise InvalidInputError("margin must be >= 0")
    valid = np.logical_and.reduce([m > 0.5 for m in masks])
    rows = np.flatnonzero(valid.any(axis=1))
    cols = np.flatnonzero(valid.any(axis=0))
    if rows.size == 0:
        raise EmptyRegionError("masks have an empty intersection")
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1
    if valid[r0:r1, c0:c1].all():
        box = (r0, c0, r1 - r0, c1 - c0)
    else:
        box = _largest_rectangle(valid)
    row0, col0, nr, nc = box
    row0 += margin
    col0 += margin
    nr -= 2 * margin
    nc -= 2 * margin
    if nr <= 0 or nc <= 0:
        raise EmptyRegionError(f"valid region {box} is empty after a {margin}px margin")
    return Crop(row0, col0, nr, nc)


@dataclass(frozen=True)
class RegisteredPair:
    low: np.ndarray
    gt: np.ndarray
    warp: GeoWarp
    crop: Crop
    ecc: EccResult


def register_pair(low, gt, margin: int = DEFAULT_MARGIN, model="affine",
                  max_iters: int = DEFAULT_MAX_ITERS, eps: float = DEFAULT_EPS,
                  sigma: float = DEFAULT_SIGMA, pyramid: bool | None = None) -> RegisteredPair:
    """Register ``low`` onto ``gt`` and crop both to the shared valid region."""
    low = as_image(low, "low")
    gt = as_image(gt, "gt")
    check_same_shape(low, gt, names=("low", "gt"))
    res = ecc_register(low, gt, model=model, max_iters=max_iters, eps=eps, sigma=sigma,
                       pyramid=pyramid)
    warped, mask = warp_image(low, res.warp, gt.shape[:2])
    crop = shared_valid_crop([mask, np.ones(gt.shape[:2])], margin)
    return RegisteredPair(crop.apply(warped).copy(), crop.apply(gt).copy(), res.warp, crop, res)
