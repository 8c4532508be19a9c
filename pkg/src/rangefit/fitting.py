"""Least-squares plane fitting in four formulations, over two backends.

Formulations (``FORMULATIONS``):

* ``implicit-standard``: minimize sum((a*X + b*Y + c*Z + d)^2) subject to the
  coefficient vector having unit norm; solved by the smallest eigenvector of
  the 4x4 scatter matrix of monomials [X, Y, Z, 1].
* ``implicit-rgbd``: the same plane equation divided through by Z, giving
  monomials [tan_x, tan_y, 1, 1/Z].  The eigenvector is read directly as
  (a, b, c, d); only the scatter entries involving 1/Z depend on the frame,
  the upper-left 3x3 block is a camera constant.
* ``explicit-standard``: minimize sum((a*X + b*Y + c - Z)^2), normal
  equations on monomials [X, Y, 1].
* ``explicit-rgbd``: minimize sum((a*tan_x + b*tan_y + c - 1/Z)^2).  The
  whole normal-equation matrix is camera-constant, so its Cholesky factor can
  be cached per window and reused across frames; only the right-hand side
  needs fresh sums.

Backends: ``naive`` accumulates monomials directly over the window's samples;
``integral`` assembles every scatter entry from one box sum each, and the two
agree to rounding.  Invalid pixels contribute nothing anywhere: the rgbd
formulations read their camera-constant block from the shared precomputed
stack only for hole-free windows, and fall back to the frame's masked tan
channels (added by the builders whenever a frame has holes) otherwise, so a
window's scatter is always the exact Gram matrix of its valid samples.

The dense kernels are deliberately self-contained: a cyclic Jacobi sweep for
the symmetric 3x3/4x4 eigenproblem and a 3x3 Cholesky factorization, both
small enough that their cost is negligible next to the scatter sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .camera import TanAngleMaps
from .errors import DegenerateFitError, InsufficientSamplesError
from .integral import ChannelStack, Rect, _check_rect
from .synth import DepthImage

IMPLICIT_STANDARD = "implicit-standard"
IMPLICIT_RGBD = "implicit-rgbd"
EXPLICIT_STANDARD = "explicit-standard"
EXPLICIT_RGBD = "explicit-rgbd"
FORMULATIONS = (IMPLICIT_STANDARD, IMPLICIT_RGBD, EXPLICIT_STANDARD, EXPLICIT_RGBD)

SPACE_STANDARD = "standard"
SPACE_RGBD = "rgbd"

# Below this count a scatter system is under-determined by construction.
MIN_SAMPLES = {
    IMPLICIT_STANDARD: 4,
    IMPLICIT_RGBD: 4,
    EXPLICIT_STANDARD: 3,
    EXPLICIT_RGBD: 3,
}

# Sign threshold for choosing the canonical representative of a unit
# coefficient vector: components smaller than this are treated as zero so
# rounding noise cannot flip the sign.
_CANONICAL_EPS = 1e-9

# Eigenvalue-gap threshold (relative to the Frobenius norm) below which the
# smallest eigenvector is ambiguous and the fit is flagged degenerate.
_EIGEN_TIE_REL = 1e-9

_PIVOT_REL = 1e-12

CSV_HEADER = "formulation,backend,x0,y0,x1,y1,a,b,c,d,lambda,rms,n_points"


def canonicalize_implicit(coefficients: np.ndarray) -> np.ndarray:
    """Unit-normalize and fix the sign of implicit plane coefficients.

    The representative makes the first non-negligible component, checked in
    the order (c, b, a, d), positive; this gives every geometric plane a
    single deterministic coefficient vector so fits are comparable across
    formulations and backends.
    """
    coef = np.asarray(coefficients, dtype=np.float64)
    if coef.shape != (4,):
        raise ValueError(f"expected 4 coefficients, got shape {coef.shape}")
    norm = float(np.linalg.norm(coef))
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("cannot canonicalize a zero or non-finite coefficient vector")
    unit = coef / norm
    for idx in (2, 1, 0, 3):
        if abs(unit[idx]) > _CANONICAL_EPS:
            return unit if unit[idx] > 0 else -unit
    return unit


@dataclass(frozen=True)
class ImplicitPlane:
    """Implicit plane a*X + b*Y + c*Z + d = 0, unit norm, canonical sign."""

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", canonicalize_implicit(self.coefficients))

    @property
    def normal(self) -> np.ndarray:
        return self.coefficients[:3]

    @property
    def offset(self) -> float:
        return float(self.coefficients[3])


@dataclass(frozen=True)
class ExplicitPlane:
    """Explicit plane coefficients with their interpretation space.

    ``standard`` space: Z = a*X + b*Y + c.  ``rgbd`` space:
    1/Z = a*tan_x + b*tan_y + c.
    """

    coefficients: np.ndarray
    space: str

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=np.float64)
        if coef.shape != (3,):
            raise ValueError(f"expected 3 coefficients, got shape {coef.shape}")
        if self.space not in (SPACE_STANDARD, SPACE_RGBD):
            raise ValueError(f"unknown plane space {self.space!r}")
        object.__setattr__(self, "coefficients", coef)


@dataclass(frozen=True)
class Scatter4:
    """Symmetric 4x4 scatter matrix (sum of outer products) and sample count."""

    matrix: np.ndarray
    n: int


@dataclass(frozen=True)
class Scatter3:
    """3x3 normal-equation system: matrix, right-hand side, sample count.

    ``target_sq`` is the sum of squared regression targets; it is only needed
    to report an rms residual and may be absent when the backing channel
    stack was built without the residual diagnostic channel.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    n: int
    target_sq: float | None = None


@dataclass(frozen=True)
class FitResult:
    """A fitted plane plus the fit's quality diagnostics.

    ``rms_residual`` is the root-mean-square of the fitted objective's own
    residual (algebraic, formulation-specific); None when the inputs did not
    carry enough information to compute it.  ``eigenvalue`` is the smallest
    scatter eigenvalue for implicit fits.  ``degenerate`` marks ambiguous or
    rank-deficient systems; the coefficients are then a minimum-norm choice
    and should not be trusted.
    """

    plane: ImplicitPlane | ExplicitPlane
    n_points: int
    rms_residual: float | None
    eigenvalue: float | None = None
    degenerate: bool = False


class CholeskyFactor(NamedTuple):
    """Lower-triangular factor of a 3x3 SPD matrix, unpacked for fast solves."""

    l00: float
    l10: float
    l11: float
    l20: float
    l21: float
    l22: float


# ---------------------------------------------------------------------------
# Dense kernels
# ---------------------------------------------------------------------------


def jacobi_eigh(matrix: np.ndarray, max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi sweeps.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns, both
    unordered.  Converged when the off-diagonal Frobenius norm falls below
    1e-13 of the matrix Frobenius norm; raises if the input is non-finite,
    asymmetric, or fails to converge within ``max_sweeps`` sweeps.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix holds non-finite entries")
    fro = float(np.linalg.norm(a))
    if float(np.abs(a - a.T).max()) > 1e-12 * max(fro, 1.0):
        raise ValueError("matrix is not symmetric")

    n = a.shape[0]
    v = np.eye(n)
    if fro == 0.0:
        return np.zeros(n), v

    threshold = 1e-13 * fro
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= threshold:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                if abs(theta) > 1e8:
                    # rotation angle at rounding level; avoid theta^2 overflow
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = a[p, p], a[q, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                for k in range(n):
                    if k == p or k == q:
                        continue
                    akp, akq = a[k, p], a[k, q]
                    a[k, p] = a[p, k] = c * akp - s * akq
                    a[k, q] = a[q, k] = s * akp + c * akq
                for k in range(n):
                    vkp, vkq = v[k, p], v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq

    off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
    if off > threshold:
        raise DegenerateFitError("eigen iteration did not converge; ill-posed scatter matrix")
    return np.diag(a).copy(), v


def smallest_eigenvector(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit eigenvector for the smallest eigenvalue of a symmetric matrix."""
    values, vectors = jacobi_eigh(matrix)
    idx = int(np.argmin(values))
    vector = vectors[:, idx]
    return vector / float(np.linalg.norm(vector)), float(values[idx])


def cholesky3(matrix: np.ndarray) -> CholeskyFactor:
    """Cholesky factor of a symmetric positive-definite 3x3 matrix.

    Raises :class:`DegenerateFitError` when a pivot falls below 1e-12 of the
    trace, which signals collinear or otherwise rank-deficient samples.
    """
    s = np.asarray(matrix, dtype=np.float64)
    if s.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {s.shape}")
    trace = float(s[0, 0] + s[1, 1] + s[2, 2])
    floor = _PIVOT_REL * trace
    if not np.isfinite(trace) or trace <= 0.0:
        raise DegenerateFitError("scatter matrix has non-positive trace")

    p0 = float(s[0, 0])
    if p0 <= floor:
        raise DegenerateFitError("rank-deficient scatter matrix (pivot 1)")
    l00 = math.sqrt(p0)
    l10 = float(s[1, 0]) / l00
    l20 = float(s[2, 0]) / l00
    p1 = float(s[1, 1]) - l10 * l10
    if p1 <= floor:
        raise DegenerateFitError("rank-deficient scatter matrix (pivot 2)")
    l11 = math.sqrt(p1)
    l21 = (float(s[2, 1]) - l20 * l10) / l11
    p2 = float(s[2, 2]) - l20 * l20 - l21 * l21
    if p2 <= floor:
        raise DegenerateFitError("rank-deficient scatter matrix (pivot 3)")
    l22 = math.sqrt(p2)
    return CholeskyFactor(l00, l10, l11, l20, l21, l22)


def solve_cholesky3(factor: CholeskyFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve L L^T x = rhs by forward and back substitution."""
    b0, b1, b2 = float(rhs[0]), float(rhs[1]), float(rhs[2])
    y0 = b0 / factor.l00
    y1 = (b1 - factor.l10 * y0) / factor.l11
    y2 = (b2 - factor.l20 * y0 - factor.l21 * y1) / factor.l22
    x2 = y2 / factor.l22
    x1 = (y1 - factor.l21 * x2) / factor.l11
    x0 = (y0 - factor.l10 * x1 - factor.l20 * x2) / factor.l00
    return np.array([x0, x1, x2])


def solve_spd3(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a 3x3 symmetric positive-definite system via Cholesky."""
    return solve_cholesky3(cholesky3(matrix), rhs)


def _pinv_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution for a rank-deficient symmetric system."""
    values, vectors = jacobi_eigh(matrix)
    tol = _PIVOT_REL * max(float(np.trace(matrix)), 0.0)
    x = np.zeros(matrix.shape[0])
    for i, lam in enumerate(values):
        if lam > tol:
            u = vectors[:, i]
            x += u * (float(u @ rhs) / float(lam))
    return x


# ---------------------------------------------------------------------------
# Scatter accumulation
# ---------------------------------------------------------------------------


def _check_formulation(formulation: str) -> None:
    if formulation not in FORMULATIONS:
        raise ValueError(f"unknown formulation {formulation!r}; expected one of {FORMULATIONS}")


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) * 0.5


def accumulate_scatter_naive(
    samples: np.ndarray, formulation: str
) -> Scatter4 | Scatter3:
    """Accumulate a scatter system directly from per-sample monomials.

    ``samples`` is (N, 3): rows of (X, Y, Z) for the standard formulations,
    (tan_x, tan_y, Z) for the rgbd formulations (Z strictly positive; the
    single per-sample division by Z happens here).
    """
    _check_formulation(formulation)
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError(f"samples must be (N, 3), got shape {samples.shape}")
    n = samples.shape[0]
    if n < MIN_SAMPLES[formulation]:
        raise InsufficientSamplesError(
            f"{formulation} needs at least {MIN_SAMPLES[formulation]} samples, got {n}"
        )
    u, v, z = samples[:, 0], samples[:, 1], samples[:, 2]
    if formulation in (IMPLICIT_RGBD, EXPLICIT_RGBD):
        if np.any(z <= 0):
            raise ValueError("rgbd formulations require strictly positive depths")
        inv_z = 1.0 / z

    ones = np.ones(n)
    if formulation == IMPLICIT_STANDARD:
        m = np.column_stack((u, v, z, ones))
        return Scatter4(matrix=_symmetrize(m.T @ m), n=n)
    if formulation == IMPLICIT_RGBD:
        m = np.column_stack((u, v, ones, inv_z))
        return Scatter4(matrix=_symmetrize(m.T @ m), n=n)
    if formulation == EXPLICIT_STANDARD:
        m = np.column_stack((u, v, ones))
        target = z
    else:
        m = np.column_stack((u, v, ones))
        target = inv_z
    return Scatter3(
        matrix=_symmetrize(m.T @ m),
        rhs=m.T @ target,
        n=n,
        target_sq=float(target @ target),
    )


def gather_window_samples(
    depth: DepthImage, maps: TanAngleMaps, rect: Rect, formulation: str
) -> np.ndarray:
    """Collect the valid samples of a window for the naive backend.

    Standard formulations get back-projected (X, Y, Z) rows (two multiplies
    per sample); rgbd formulations get (tan_x, tan_y, Z) rows straight from
    the precomputed maps.
    """
    _check_formulation(formulation)
    _check_rect(rect, depth.width, depth.height)
    sl = (slice(rect.y0, rect.y1), slice(rect.x0, rect.x1))
    valid = depth.valid[sl]
    z = depth.values[sl][valid]
    tx = maps.tan_x[sl][valid]
    ty = maps.tan_y[sl][valid]
    if formulation in (IMPLICIT_STANDARD, EXPLICIT_STANDARD):
        return np.column_stack((z * tx, z * ty, z))
    return np.column_stack((tx, ty, z))


def _box(table: np.ndarray, rect: Rect) -> float:
    return float(
        table[rect.y1, rect.x1]
        - table[rect.y0, rect.x1]
        - table[rect.y1, rect.x0]
        + table[rect.y0, rect.x0]
    )


def _require_channels(stack: ChannelStack, names: tuple[str, ...], what: str) -> None:
    missing = [name for name in names if name not in stack.channels]
    if missing:
        raise ValueError(f"{what} stack is missing channels: {', '.join(missing)}")


def scatter_from_integrals(
    stack: ChannelStack,
    constant: ChannelStack | None,
    rect: Rect,
    formulation: str,
) -> Scatter4 | Scatter3:
    """Assemble a window's scatter system with one box sum per unique entry.

    ``stack`` holds the frame's depth-dependent channels; ``constant`` holds
    the camera-constant tan channels and is required by the rgbd
    formulations.  The sample count is always the window's valid-pixel count
    from the per-frame count channel.
    """
    _check_formulation(formulation)
    _check_rect(rect, stack.width, stack.height)
    n = int(round(_box(stack.count.table, rect)))
    if n < MIN_SAMPLES[formulation]:
        raise InsufficientSamplesError(
            f"window {rect} holds {n} valid samples; "
            f"{formulation} needs {MIN_SAMPLES[formulation]}"
        )

    ch = stack.channels
    if formulation == IMPLICIT_STANDARD:
        _require_channels(stack, ("x2", "xy", "xz", "x", "y2", "yz", "y", "z2", "z"), "per-frame")
        sx2 = _box(ch["x2"].table, rect)
        sxy = _box(ch["xy"].table, rect)
        sxz = _box(ch["xz"].table, rect)
        sx = _box(ch["x"].table, rect)
        sy2 = _box(ch["y2"].table, rect)
        syz = _box(ch["yz"].table, rect)
        sy = _box(ch["y"].table, rect)
        sz2 = _box(ch["z2"].table, rect)
        sz = _box(ch["z"].table, rect)
        matrix = np.array(
            [
                [sx2, sxy, sxz, sx],
                [sxy, sy2, syz, sy],
                [sxz, syz, sz2, sz],
                [sx, sy, sz, float(n)],
            ]
        )
        return Scatter4(matrix=matrix, n=n)

    if formulation == EXPLICIT_STANDARD:
        _require_channels(stack, ("x2", "xy", "x", "y2", "y", "xz", "yz", "z"), "per-frame")
        sx2 = _box(ch["x2"].table, rect)
        sxy = _box(ch["xy"].table, rect)
        sx = _box(ch["x"].table, rect)
        sy2 = _box(ch["y2"].table, rect)
        sy = _box(ch["y"].table, rect)
        matrix = np.array([[sx2, sxy, sx], [sxy, sy2, sy], [sx, sy, float(n)]])
        rhs = np.array(
            [_box(ch["xz"].table, rect), _box(ch["yz"].table, rect), _box(ch["z"].table, rect)]
        )
        target_sq = _box(ch["z2"].table, rect) if "z2" in ch else None
        return Scatter3(matrix=matrix, rhs=rhs, n=n, target_sq=target_sq)

    # Camera-constant block: read from the shared constant stack when the
    # window is hole-free; windows containing invalid pixels read the masked
    # tan channels the frame's builder added instead, keeping the assembled
    # matrix an exact Gram matrix of the window's valid samples.
    if n == rect.area:
        if constant is None:
            raise ValueError(f"{formulation} requires the camera-constant channel stack")
        if constant.count.table.shape != stack.count.table.shape:
            raise ValueError("constant stack dimensions do not match the per-frame stack")
        _require_channels(constant, ("tx2", "txty", "ty2", "tx", "ty"), "constant")
        cc = constant.channels
        stx2 = _box(cc["tx2"].table, rect)
        stxty = _box(cc["txty"].table, rect)
        sty2 = _box(cc["ty2"].table, rect)
        stx = _box(cc["tx"].table, rect)
        sty = _box(cc["ty"].table, rect)
    else:
        if not stack.hole_corrected:
            raise ValueError(
                f"window {rect} contains invalid pixels but the frame stack carries "
                "no masked tan channels (was it built from a different frame?)"
            )
        stx2 = _box(ch["m_tx2"].table, rect)
        stxty = _box(ch["m_txty"].table, rect)
        sty2 = _box(ch["m_ty2"].table, rect)
        stx = _box(ch["m_tx"].table, rect)
        sty = _box(ch["m_ty"].table, rect)
    pixel_count = float(n)

    if formulation == IMPLICIT_RGBD:
        _require_channels(stack, ("tx_over_z", "ty_over_z", "inv_z", "inv_z2"), "per-frame")
        stxz = _box(ch["tx_over_z"].table, rect)
        styz = _box(ch["ty_over_z"].table, rect)
        sinv = _box(ch["inv_z"].table, rect)
        sinv2 = _box(ch["inv_z2"].table, rect)
        matrix = np.array(
            [
                [stx2, stxty, stx, stxz],
                [stxty, sty2, sty, styz],
                [stx, sty, pixel_count, sinv],
                [stxz, styz, sinv, sinv2],
            ]
        )
        return Scatter4(matrix=matrix, n=n)

    _require_channels(stack, ("tx_over_z", "ty_over_z", "inv_z"), "per-frame")
    matrix = np.array([[stx2, stxty, stx], [stxty, sty2, sty], [stx, sty, pixel_count]])
    rhs = np.array(
        [
            _box(ch["tx_over_z"].table, rect),
            _box(ch["ty_over_z"].table, rect),
            _box(ch["inv_z"].table, rect),
        ]
    )
    target_sq = _box(ch["inv_z2"].table, rect) if "inv_z2" in ch else None
    return Scatter3(matrix=matrix, rhs=rhs, n=n, target_sq=target_sq)


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------


def _require_n(n: int, minimum: int) -> None:
    if n < minimum:
        raise InsufficientSamplesError(f"fit needs at least {minimum} samples, got {n}")


def _fit_implicit(scatter: Scatter4) -> FitResult:
    _require_n(scatter.n, 4)
    values, vectors = jacobi_eigh(scatter.matrix)
    order = np.argsort(values)
    smallest = int(order[0])
    lam = float(values[smallest])
    fro = float(np.linalg.norm(scatter.matrix))
    gap = float(values[int(order[1])]) - lam
    degenerate = fro == 0.0 or gap <= _EIGEN_TIE_REL * fro
    plane = ImplicitPlane(vectors[:, smallest])
    rms = math.sqrt(max(lam, 0.0) / scatter.n)
    return FitResult(
        plane=plane, n_points=scatter.n, rms_residual=rms, eigenvalue=lam, degenerate=degenerate
    )


def fit_implicit_standard(scatter: Scatter4) -> FitResult:
    """Implicit fit on [X, Y, Z, 1] monomials: smallest scatter eigenvector.

    The rms residual is the algebraic residual sqrt(lambda / N) under the
    unit-coefficient constraint.
    """
    return _fit_implicit(scatter)


def fit_implicit_rgbd(scatter: Scatter4) -> FitResult:
    """Implicit fit on [tan_x, tan_y, 1, 1/Z] monomials.

    The eigenvector is already the implicit plane (a, b, c, d): multiplying
    a*tan_x + b*tan_y + c + d/Z = 0 through by Z recovers
    a*X + b*Y + c*Z + d = 0.  The rms residual lives in the inverse-depth
    algebraic metric, not in meters.
    """
    return _fit_implicit(scatter)


def _fit_explicit(scatter: Scatter3, space: str) -> FitResult:
    _require_n(scatter.n, 3)
    degenerate = False
    try:
        alpha = solve_cholesky3(cholesky3(scatter.matrix), scatter.rhs)
    except DegenerateFitError:
        alpha = _pinv_solve(scatter.matrix, scatter.rhs)
        degenerate = True
    rms = None
    if scatter.target_sq is not None:
        # At the least-squares solution the residual reduces to
        # sum(b^2) - alpha . (M^t b).  Differencing aggregated sums puts a
        # noise floor of about sqrt(eps * mean(b^2)) under the rms; clamp the
        # tiny negatives the same rounding can produce.
        sq = max(float(scatter.target_sq) - float(alpha @ scatter.rhs), 0.0)
        rms = math.sqrt(sq / scatter.n)
    plane = ExplicitPlane(coefficients=alpha, space=space)
    return FitResult(plane=plane, n_points=scatter.n, rms_residual=rms, degenerate=degenerate)


def fit_explicit_standard(scatter: Scatter3) -> FitResult:
    """Explicit fit Z = a*X + b*Y + c via the normal equations.

    Planes near-parallel to the optical axis have no finite slope in this
    form; their scatter goes rank deficient and the result comes back with
    the degenerate flag set and minimum-norm coefficients.
    """
    return _fit_explicit(scatter, SPACE_STANDARD)


def fit_explicit_rgbd(scatter: Scatter3) -> FitResult:
    """Explicit fit 1/Z = a*tan_x + b*tan_y + c via the normal equations.

    Planes through the camera origin have no finite representation here (the
    regression targets 1/Z become unconstrained by the tan monomials); such
    windows yield a degenerate-flagged result.  For repeated fits over the
    same window prefer :class:`ExplicitRgbdFitter`, which caches the
    camera-constant Cholesky factor.
    """
    return _fit_explicit(scatter, SPACE_RGBD)


FIT_BY_FORMULATION: dict[str, Callable[..., FitResult]] = {
    IMPLICIT_STANDARD: fit_implicit_standard,
    IMPLICIT_RGBD: fit_implicit_rgbd,
    EXPLICIT_STANDARD: fit_explicit_standard,
    EXPLICIT_RGBD: fit_explicit_rgbd,
}


class ExplicitRgbdFitter:
    """Explicit inverse-depth fits with per-window factor caching.

    The normal-equation matrix depends only on the camera constants and the
    window, so its Cholesky factor is computed once per window and reused
    for every frame; each fit then costs three right-hand-side box sums and
    two triangular solves.
    """

    def __init__(self, constant: ChannelStack):
        _require_channels(constant, ("tx2", "txty", "ty2", "tx", "ty"), "constant")
        self.constant = constant
        self._factors: dict[Rect, CholeskyFactor | None] = {}
        self._matrices: dict[Rect, np.ndarray] = {}

    def matrix_for(self, rect: Rect) -> np.ndarray:
        matrix = self._matrices.get(rect)
        if matrix is None:
            cc = self.constant.channels
            stx2 = _box(cc["tx2"].table, rect)
            stxty = _box(cc["txty"].table, rect)
            sty2 = _box(cc["ty2"].table, rect)
            stx = _box(cc["tx"].table, rect)
            sty = _box(cc["ty"].table, rect)
            pixel_count = _box(self.constant.count.table, rect)
            matrix = np.array(
                [[stx2, stxty, stx], [stxty, sty2, sty], [stx, sty, pixel_count]]
            )
            self._matrices[rect] = matrix
        return matrix

    def factor_for(self, rect: Rect) -> CholeskyFactor | None:
        """The cached factor, or None when the window's system is singular."""
        if rect not in self._factors:
            _check_rect(rect, self.constant.width, self.constant.height)
            try:
                self._factors[rect] = cholesky3(self.matrix_for(rect))
            except DegenerateFitError:
                self._factors[rect] = None
        return self._factors[rect]

    def fit(self, stack: ChannelStack, rect: Rect) -> FitResult:
        """Fit one window of one frame.

        Hole-free windows reuse the window's cached camera-constant factor;
        windows containing invalid pixels fall back to the frame's masked tan
        channels and factor on the spot (the masked system is frame-specific,
        so there is nothing to cache).
        """
        ch = stack.channels
        n = int(round(_box(stack.count.table, rect)))
        if n < MIN_SAMPLES[EXPLICIT_RGBD]:
            raise InsufficientSamplesError(
                f"window {rect} holds {n} valid samples; "
                f"{EXPLICIT_RGBD} needs {MIN_SAMPLES[EXPLICIT_RGBD]}"
            )
        rhs = np.array(
            [
                _box(ch["tx_over_z"].table, rect),
                _box(ch["ty_over_z"].table, rect),
                _box(ch["inv_z"].table, rect),
            ]
        )
        if n == rect.area:
            factor = self.factor_for(rect)
            matrix = None
        else:
            if not stack.hole_corrected:
                raise ValueError(
                    f"window {rect} contains invalid pixels but the frame stack "
                    "carries no masked tan channels"
                )
            matrix = np.array(
                [
                    [_box(ch["m_tx2"].table, rect), _box(ch["m_txty"].table, rect), _box(ch["m_tx"].table, rect)],
                    [_box(ch["m_txty"].table, rect), _box(ch["m_ty2"].table, rect), _box(ch["m_ty"].table, rect)],
                    [_box(ch["m_tx"].table, rect), _box(ch["m_ty"].table, rect), float(n)],
                ]
            )
            try:
                factor = cholesky3(matrix)
            except DegenerateFitError:
                factor = None
        if factor is None:
            alpha = _pinv_solve(matrix if matrix is not None else self.matrix_for(rect), rhs)
            degenerate = True
        else:
            alpha = solve_cholesky3(factor, rhs)
            degenerate = False
        rms = None
        if "inv_z2" in ch:
            sq = max(_box(ch["inv_z2"].table, rect) - float(alpha @ rhs), 0.0)
            rms = math.sqrt(sq / n)
        plane = ExplicitPlane(coefficients=alpha, space=SPACE_RGBD)
        return FitResult(plane=plane, n_points=n, rms_residual=rms, degenerate=degenerate)


def explicit_to_implicit(plane: ExplicitPlane) -> ImplicitPlane:
    """Rewrite an explicit fit as a canonical implicit plane.

    Standard space: Z = a*X + b*Y + c becomes (a, b, -1, c).  Rgbd space:
    multiplying 1/Z = a*tan_x + b*tan_y + c through by Z gives
    a*X + b*Y + c*Z - 1 = 0, i.e. (a, b, c, -1).
    """
    a, b, c = (float(v) for v in plane.coefficients)
    if plane.space == SPACE_STANDARD:
        return ImplicitPlane(np.array([a, b, -1.0, c]))
    return ImplicitPlane(np.array([a, b, c, -1.0]))


def normal_angle(p: ImplicitPlane, q: ImplicitPlane) -> float:
    """Angle in radians between two planes' normals (orientation-blind).

    Uses atan2 of the cross/dot pair, which stays accurate for tiny angles
    where arccos of the dot product loses half the significant digits.
    """
    np_, nq = p.normal, q.normal
    denom = float(np.linalg.norm(np_) * np.linalg.norm(nq))
    if denom == 0:
        raise ValueError("degenerate normal")
    cross = float(np.linalg.norm(np.cross(np_, nq)))
    dot = abs(float(np_ @ nq))
    return math.atan2(cross, dot)


def fit_rect(
    depth: DepthImage,
    maps: TanAngleMaps,
    rect: Rect,
    formulation: str,
    backend: str,
    stack: ChannelStack | None = None,
    constant: ChannelStack | None = None,
    rgbd_fitter: ExplicitRgbdFitter | None = None,
) -> FitResult:
    """Fit one window with the chosen formulation and backend.

    ``naive`` gathers the window's samples and accumulates monomials
    directly; ``integral`` assembles the scatter from the prebuilt channel
    stacks (``stack`` required; ``constant`` required for the rgbd
    formulations).  Passing ``rgbd_fitter`` routes explicit-rgbd integral
    fits through the factor cache.
    """
    if backend == "naive":
        samples = gather_window_samples(depth, maps, rect, formulation)
        scatter = accumulate_scatter_naive(samples, formulation)
    elif backend == "integral":
        if stack is None:
            raise ValueError("integral backend requires a per-frame channel stack")
        if formulation == EXPLICIT_RGBD and rgbd_fitter is not None:
            return rgbd_fitter.fit(stack, rect)
        scatter = scatter_from_integrals(stack, constant, rect, formulation)
    else:
        raise ValueError(f"unknown backend {backend!r}; expected 'naive' or 'integral'")
    return FIT_BY_FORMULATION[formulation](scatter)


def fit_result_csv_row(
    result: FitResult, formulation: str, backend: str, rect: Rect
) -> str:
    """One CSV row per fit; explicit fits are reported in implicit form."""
    if isinstance(result.plane, ExplicitPlane):
        coef = explicit_to_implicit(result.plane).coefficients
    else:
        coef = result.plane.coefficients
    lam = "" if result.eigenvalue is None else repr(result.eigenvalue)
    rms = "" if result.rms_residual is None else repr(result.rms_residual)
    fields = [
        formulation,
        backend,
        str(rect.x0),
        str(rect.y0),
        str(rect.x1),
        str(rect.y1),
        repr(float(coef[0])),
        repr(float(coef[1])),
        repr(float(coef[2])),
        repr(float(coef[3])),
        lam,
        rms,
        str(result.n_points),
    ]
    return ",".join(fields)
