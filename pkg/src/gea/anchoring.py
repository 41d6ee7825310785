"""Global energy anchoring: affine photometric matrices and their least-squares fit.

An anchor matrix ``M = [A | b]`` maps every RGB pixel ``p`` to ``A p + b``.
Four nested parameter families are supported::

    SCALAR     a * I               (1 DoF)
    DIAG_BIAS  diag(d) p + b       (6 DoF)
    LINEAR9    A p                 (9 DoF)
    AFFINE12   A p + b             (12 DoF)

Each family is fitted by its own exact normal equations, accumulated in
float64 over all pixels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateFitError, InvalidInputError
from .imgcore import as_rgb, check_same_shape, to_grayscale

MAX_CONDITION = 1e12


class Family(str, enum.Enum):
    SCALAR = "scalar"
    DIAG_BIAS = "diagbias"
    LINEAR9 = "linear9"
    AFFINE12 = "affine12"

    @property
    def dof(self) -> int:
        return {"scalar": 1, "diagbias": 6, "linear9": 9, "affine12": 12}[self.value]

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        for fam in cls:
            if fam.value == key or fam.name.replace("_", "").lower() == key:
                return fam
        raise InvalidInputError(f"unknown matrix family {name!r}")


@dataclass(frozen=True)
class AnchorMatrix:
    a: np.ndarray
    b: np.ndarray
    family: Family = Family.AFFINE12
    # set when the Gram system was singular and the minimum-norm solution was returned
    min_norm: bool = field(default=False, compare=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(3, 3)
        b = np.array(self.b, dtype=np.float64).reshape(3)
        fam = Family.parse(self.family)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidInputError("anchor matrix entries must be finite")
        off = a - np.diag(np.diag(a))
        if fam is Family.SCALAR:
            ok = np.all(off == 0) and np.all(np.diag(a) == a[0, 0]) and np.all(b == 0)
        elif fam is Family.DIAG_BIAS:
            ok = np.all(off == 0)
        elif fam is Family.LINEAR9:
            ok = np.all(b == 0)
        else:
            ok = True
        if not ok:
            raise InvalidInputError(f"matrix violates the constraints of family {fam.value}")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "family", fam)

    @classmethod
    def identity(cls, family=Family.AFFINE12) -> "AnchorMatrix":
        return cls(np.eye(3), np.zeros(3), family)

    def as_array(self) -> np.ndarray:
        """The 3 x 4 matrix ``[A | b]``."""
        return np.hstack([self.a, self.b[:, None]])

    def is_identity(self) -> bool:
        return bool(np.all(self.a == np.eye(3)) and np.all(self.b == 0))

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "a": [float(x) for x in self.a.ravel()],
            "b": [float(x) for x in self.b],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnchorMatrix":
        try:
            a, b, fam = d["a"], d["b"], d["family"]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed anchor matrix object: {exc}") from None
        if len(a) != 9 or len(b) != 3:
            raise InvalidInputError("anchor matrix needs 9 'a' and 3 'b' numbers")
        return cls(np.array(a, dtype=float), np.array(b, dtype=float), Family.parse(fam))


@dataclass(frozen=True)
class MatrixDiagnostics:
    diag_mean: float
    offdiag_mean: float
    bias_mean: float
    diagonal_dominant: bool
    input_mean_luma: float
    min_norm: bool = False

    def to_dict(self) -> dict:
        return {
            "diag_mean": self.diag_mean,
            "offdiag_mean": self.offdiag_mean,
            "bias_mean": self.bias_mean,
            "diagonal_dominant": self.diagonal_dominant,
            "input_mean_luma": self.input_mean_luma,
            "min_norm": self.min_norm,
        }


def apply_anchor(m: AnchorMatrix, img) -> np.ndarray:
    """Apply ``A p + b`` to every pixel. Output is not clamped."""
    rgb = as_rgb(img)
    if m.is_identity():
        return rgb.copy()
    return rgb @ m.a.T + m.b


def _solve(gram: np.ndarray, rhs: np.ndarray, family: Family, allow_degenerate: bool):
    """Solve ``gram @ x = rhs``; returns ``(x, min_norm_used)``."""
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        if not allow_degenerate:
            raise DegenerateFitError(family, float(cond))
        return np.linalg.pinv(gram, hermitian=True) @ rhs, True
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), rhs), False
    except np.linalg.LinAlgError:
        q, r, piv = scipy.linalg.qr(gram, pivoting=True)
        y = scipy.linalg.solve_triangular(r, q.T @ rhs)
        x = np.empty_like(y)
        x[piv] = y
        return x, False


def fit_anchor(low, gt, family=Family.AFFINE12, allow_degenerate: bool = False) -> AnchorMatrix:
    """Least-squares optimal matrix of ``family`` mapping ``low`` onto ``gt``.

    Raises :class:`DegenerateFitError` when the family's Gram matrix has a
    condition number above 1e12, unless ``allow_degenerate`` is set, in which
    case the minimum-norm minimizer is returned with ``min_norm=True``.
    """
    family = Family.parse(family)
    low = as_rgb(low, "low")
    gt = as_rgb(gt, "gt")
    check_same_shape(low, gt, names=("low", "gt"))
    x = low.reshape(-1, 3)
    y = gt.reshape(-1, 3)
    n = x.shape[0]
    if n < 4:
        raise InvalidInputError(f"need at least 4 pixels to fit, got {n}")

    if family is Family.SCALAR:
        gram = np.array([[np.sum(x * x)]])
        rhs = np.array([np.sum(x * y)])
        alpha, mn = _solve(gram, rhs, family, allow_degenerate)
        return AnchorMatrix(alpha[0] * np.eye(3), np.zeros(3), family, mn)

    if family is Family.DIAG_BIAS:
        gains = np.empty(3)
        bias = np.empty(3)
        any_mn = False
        for c in range(3):
            xc, yc = x[:, c], y[:, c]
            sx = np.sum(xc)
            gram = np.array([[np.dot(xc, xc), sx], [sx, float(n)]])
            rhs = np.array([np.dot(xc, yc), np.sum(yc)])
            sol, mn = _solve(gram, rhs, family, allow_degenerate)
            gains[c], bias[c] = sol
            any_mn |= mn
        return AnchorMatrix(np.diag(gains), bias, family, any_mn)

    if family is Family.LINEAR9:
        gram = x.T @ x
        rhs = x.T @ y
        w, mn = _solve(gram, rhs, family, allow_degenerate)
        return AnchorMatrix(w.T, np.zeros(3), family, mn)

    aug = np.hstack([x, np.ones((n, 1))])
    gram = aug.T @ aug
    rhs = aug.T @ y
    w, mn = _solve(gram, rhs, family, allow_degenerate)
    mt = w.T
    return AnchorMatrix(mt[:, :3], mt[:, 3], family, mn)


def fit_residual(m: AnchorMatrix, low, gt) -> float:
    """Mean squared error per sample of ``apply_anchor(m, low)`` against ``gt``."""
    low = as_rgb(low, "low")
    gt = as_rgb(gt, "gt")
    check_same_shape(low, gt, names=("low", "gt"))
    diff = apply_anchor(m, low) - gt
    return float(np.mean(diff * diff))


def ideal_gea(low, gt, family=Family.AFFINE12, allow_degenerate: bool = False):
    """Per-image optimal anchoring: fit against ``gt`` and apply to ``low``.

    The identity is a member of every family, so if rounding leaves the fitted
    matrix with a residual no better than the identity's, the identity is used.
    Returns ``(matrix, aligned_image)``.
    """
    family = Family.parse(family)
    m = fit_anchor(low, gt, family, allow_degenerate=allow_degenerate)
    ident = AnchorMatrix.identity(family)
    if fit_residual(m, low, gt) >= fit_residual(ident, low, gt):
        m = ident
    return m, apply_anchor(m, low)


def matrix_loss(pred: AnchorMatrix, star: AnchorMatrix, lambda_diag: float = 0.1) -> float:
    """Entrywise L1 distance over all 12 entries plus ``lambda_diag * ||A - I||_F^2``."""
    l1 = np.sum(np.abs(pred.as_array() - star.as_array()))
    reg = np.sum((pred.a - np.eye(3)) ** 2)
    return float(l1 + lambda_diag * reg)


def diagnostics(m: AnchorMatrix, low) -> MatrixDiagnostics:
    a = m.a
    diag = np.diag(a)
    off = a[~np.eye(3, dtype=bool)]
    row_off = np.sum(np.abs(a - np.diag(diag)), axis=1)
    return MatrixDiagnostics(
        diag_mean=float(np.mean(diag)),
        offdiag_mean=float(np.mean(off)),
        bias_mean=float(np.mean(m.b)),
        diagonal_dominant=bool(np.all(np.abs(diag) > row_off)),
        input_mean_luma=float(np.mean(to_grayscale(as_rgb(low, "low")))),
        min_norm=m.min_norm,
    )
