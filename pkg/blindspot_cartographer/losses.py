"""
Training losses with analytic gradients
Pairwise-similarity distillation between patch-pooled feature maps, masked binary
cross-entropy over the visibility mask, and their weighted sum. Every gradient can be
checked against central finite differences.

Feature maps are (H', W', C) arrays; a patch grid (w', h') splits them into h' rows
and w' columns of near-equal rectangles, numbered row-major.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import EmptyVisibilityError, InvalidInputError
from .geometry import BinaryMask, as_mask, check_same_shape

DEFAULT_PATCH_GRID = (4, 4)
DEFAULT_EPSILON = 1e-7
FD_STEP = 1e-4
FD_RTOL = 1e-5
FD_ATOL = 1e-8


@dataclass(frozen=True)
class LossConfig:
    """Weight of the distillation term, distillation patch grid and BCE probability clamp"""
    lam: float = 1.0
    patch_grid: Tuple[int, int] = DEFAULT_PATCH_GRID
    epsilon_clip: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidInputError(f"lambda must be non-negative, got {self.lam}")
        grid = tuple(int(g) for g in self.patch_grid)
        if len(grid) != 2 or min(grid) < 1:
            raise InvalidInputError(f"patch grid must be two positive integers, got {self.patch_grid}")
        object.__setattr__(self, "patch_grid", grid)
        if not 0 < self.epsilon_clip < 0.5:
            raise InvalidInputError(f"epsilon_clip must lie in (0, 0.5), got {self.epsilon_clip}")


@dataclass(frozen=True, eq=False)
class Similarity:
    matrix: np.ndarray
    degenerate: np.ndarray

    @property
    def any_degenerate(self) -> bool:
        return bool(self.degenerate.any())


@dataclass(frozen=True, eq=False)
class LossValue:
    """A loss value with its gradient and any zero-norm patch flags"""
    value: float
    grad: np.ndarray
    degenerate: Optional[np.ndarray] = None


def _feature_grid(feat: np.ndarray, name: str = "feature map") -> np.ndarray:
    feat = np.asarray(feat, dtype=np.float64)
    if feat.ndim == 2:
        feat = feat[:, :, None]
    if feat.ndim != 3 or feat.shape[2] < 1:
        raise InvalidInputError(f"{name} must be (H, W, C), got shape {feat.shape}")
    if not np.all(np.isfinite(feat)):
        raise InvalidInputError(f"{name} must be finite")
    return feat


def _patch_edges(size: int, parts: int) -> np.ndarray:
    return np.array([i * size // parts for i in range(parts + 1)])


def patch_pool(feat: np.ndarray, grid: Tuple[int, int]) -> np.ndarray:
    """
    Channel means over a (w', h') grid of near-equal patches

    Returns an (h', w', C) array. Patch row i spans rows [i·H'//h', (i+1)·H'//h').
    """
    feat = _feature_grid(feat)
    cols, rows = int(grid[0]), int(grid[1])
    height, width = feat.shape[:2]
    if cols < 1 or rows < 1 or cols > width or rows > height:
        raise InvalidInputError(f"patch grid {grid} does not fit a {width}x{height} feature map")

    row_edges = _patch_edges(height, rows)
    col_edges = _patch_edges(width, cols)
    pooled = np.empty((rows, cols, feat.shape[2]))
    for i in range(rows):
        for j in range(cols):
            patch = feat[row_edges[i]:row_edges[i + 1], col_edges[j]:col_edges[j + 1]]
            pooled[i, j] = patch.mean(axis=(0, 1))
    return pooled


def unpool_gradient(grad_pooled: np.ndarray, feature_shape: Tuple[int, int, int]) -> np.ndarray:
    """Spread a gradient w.r.t. patch means back over the pixels of each patch"""
    rows, cols = grad_pooled.shape[:2]
    height, width = feature_shape[:2]
    row_edges = _patch_edges(height, rows)
    col_edges = _patch_edges(width, cols)
    grad = np.empty(feature_shape)
    for i in range(rows):
        for j in range(cols):
            r0, r1 = row_edges[i], row_edges[i + 1]
            c0, c1 = col_edges[j], col_edges[j + 1]
            grad[r0:r1, c0:c1] = grad_pooled[i, j] / ((r1 - r0) * (c1 - c0))
    return grad


def _patch_vectors(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 3:
        f = f.reshape(-1, f.shape[2])
    if f.ndim != 2:
        raise InvalidInputError(f"patch vectors must be (N, C) or (h', w', C), got {f.shape}")
    return f


def _normalized(f: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    norms = np.linalg.norm(f, axis=1)
    degenerate = norms == 0.0
    unit = np.zeros_like(f)
    unit[~degenerate] = f[~degenerate] / norms[~degenerate, None]
    return unit, norms, degenerate


def pairwise_similarity(f: np.ndarray) -> Similarity:
    """
    Cosine similarity between every pair of patch vectors

    Zero-norm patches get 0 against every other patch and 1 on the diagonal; they are
    flagged in the result.
    """
    unit, _, degenerate = _normalized(_patch_vectors(f))
    matrix = np.clip(unit @ unit.T, -1.0, 1.0)
    np.fill_diagonal(matrix, 1.0)
    return Similarity(matrix, degenerate)


def kd_loss_matrices(a_teacher: np.ndarray, a_student: np.ndarray) -> float:
    """Mean squared difference over all ordered pairs, diagonal included"""
    a_teacher = np.asarray(a_teacher, dtype=np.float64)
    a_student = np.asarray(a_student, dtype=np.float64)
    if a_teacher.shape != a_student.shape or a_teacher.ndim != 2 \
            or a_teacher.shape[0] != a_teacher.shape[1]:
        raise InvalidInputError(
            f"similarity matrices must be equal and square, got {a_teacher.shape} and {a_student.shape}"
        )
    diff = a_student - a_teacher
    return float(np.sum(diff * diff)) / a_teacher.shape[0] ** 2


def kd_loss(a_teacher: np.ndarray, student: np.ndarray) -> LossValue:
    """
    Distillation loss of student patch vectors against a teacher similarity matrix

    Args:
        a_teacher: (N, N) similarity matrix of the teacher patches
        student: (N, C) or (h', w', C) student patch means

    Returns:
        LossValue whose grad has the shape of `student`
    """
    shape = np.shape(student)
    f = _patch_vectors(student)
    a_teacher = np.asarray(a_teacher, dtype=np.float64)
    if a_teacher.shape != (f.shape[0], f.shape[0]):
        raise InvalidInputError(
            f"teacher matrix {a_teacher.shape} does not match {f.shape[0]} student patches"
        )

    unit, norms, degenerate = _normalized(f)
    a_student = pairwise_similarity(f).matrix
    n = f.shape[0]
    value = kd_loss_matrices(a_teacher, a_student)

    g = 2.0 * (a_student - a_teacher) / n ** 2
    grad_unit = (g + g.T) @ unit
    radial = np.sum(grad_unit * unit, axis=1, keepdims=True)
    grad = np.zeros_like(f)
    ok = ~degenerate
    grad[ok] = (grad_unit[ok] - radial[ok] * unit[ok]) / norms[ok, None]
    return LossValue(value, grad.reshape(shape), degenerate)


def distillation_loss(teacher_feat: np.ndarray, student_feat: np.ndarray,
                      cfg: Optional[LossConfig] = None) -> LossValue:
    """Pool both feature maps, compare their similarity matrices; grad is w.r.t. student_feat"""
    cfg = cfg or LossConfig()
    teacher_feat = _feature_grid(teacher_feat, "teacher features")
    student_feat = _feature_grid(student_feat, "student features")
    teacher = patch_pool(teacher_feat, cfg.patch_grid)
    student = patch_pool(student_feat, cfg.patch_grid)
    a_teacher = pairwise_similarity(teacher)
    result = kd_loss(a_teacher.matrix, student)
    degenerate = result.degenerate | a_teacher.degenerate
    return LossValue(result.value, unpool_gradient(result.grad, student_feat.shape), degenerate)


def bce_loss(omega: BinaryMask, b: np.ndarray, visibility: BinaryMask,
             epsilon_clip: float = DEFAULT_EPSILON) -> LossValue:
    """
    Binary cross-entropy of probabilities b against ω, averaged over the visible pixels

    b is clamped to [ε, 1-ε]; the gradient is zero outside V and where the clamp is active.

    Raises:
        EmptyVisibilityError: V selects no pixel
    """
    if not 0 < epsilon_clip < 0.5:
        raise InvalidInputError(f"epsilon_clip must lie in (0, 0.5), got {epsilon_clip}")
    omega = as_mask(omega, "blind-spot mask")
    visibility = as_mask(visibility, "visibility mask")
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(omega=omega, b=b, visibility=visibility)
    if not np.all((b >= 0) & (b <= 1)):
        raise InvalidInputError("probabilities must lie in [0, 1]")
    count = int(visibility.sum())
    if count == 0:
        raise EmptyVisibilityError("visibility mask selects no pixel")

    clipped = np.clip(b, epsilon_clip, 1.0 - epsilon_clip)
    target = omega.astype(np.float64)
    per_pixel = target * np.log(clipped) + (1.0 - target) * np.log1p(-clipped)
    value = -float(per_pixel[visibility].sum()) / count

    free = visibility & (b > epsilon_clip) & (b < 1.0 - epsilon_clip)
    grad = np.zeros_like(b)
    grad[free] = -(target[free] / b[free] - (1.0 - target[free]) / (1.0 - b[free])) / count
    return LossValue(value, grad)


def total_loss(bce: float, kd: float, lam: float = 1.0) -> float:
    """bce + λ·kd"""
    for name, value in (("bce", bce), ("kd", kd), ("lambda", lam)):
        if not (math.isfinite(value) and value >= 0):
            raise InvalidInputError(f"{name} must be finite and non-negative, got {value}")
    return bce + lam * kd


def finite_difference_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray,
                               step: float = FD_STEP) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time"""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + step
        upper = fn(x)
        flat[k] = original - step
        lower = fn(x)
        flat[k] = original
        out[k] = (upper - lower) / (2.0 * step)
    return grad


@dataclass(frozen=True)
class GradientCheck:
    """One analytic-vs-numeric gradient comparison"""
    loss: str
    instance: int
    max_abs_error: float
    max_rel_error: float
    passed: bool


def _compare(loss: str, instance: int, analytic: np.ndarray, numeric: np.ndarray,
             rtol: float, atol: float) -> GradientCheck:
    error = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(numeric), atol)
    return GradientCheck(
        loss=loss,
        instance=instance,
        max_abs_error=float(error.max(initial=0.0)),
        max_rel_error=float((error / scale).max(initial=0.0)),
        passed=bool(np.all(error <= atol + rtol * np.abs(numeric))),
    )


def gradient_suite(instances: int = 20, seed: int = 0, step: float = FD_STEP,
                   rtol: float = FD_RTOL, atol: float = FD_ATOL) -> List[GradientCheck]:
    """
    Check the analytic gradients of kd, BCE and pooled distillation on random instances

    Probabilities are drawn from [0.05, 0.95] so the clamp never binds.
    """
    if instances < 1:
        raise InvalidInputError(f"instances must be at least 1, got {instances}")
    rng = np.random.default_rng(seed)
    checks = []
    for k in range(instances):
        teacher = rng.normal(size=(16, 8))
        student = rng.normal(size=(16, 8))
        a_teacher = pairwise_similarity(teacher).matrix
        numeric = finite_difference_gradient(lambda f: kd_loss(a_teacher, f).value, student, step)
        checks.append(_compare("kd", k, kd_loss(a_teacher, student).grad, numeric, rtol, atol))

        omega = rng.random((16, 16)) < 0.3
        visibility = rng.random((16, 16)) < 0.8
        visibility[0, 0] = True
        b = rng.uniform(0.05, 0.95, size=(16, 16))
        numeric = finite_difference_gradient(lambda p: bce_loss(omega, p, visibility).value, b, step)
        checks.append(_compare("bce", k, bce_loss(omega, b, visibility).grad, numeric, rtol, atol))

        cfg = LossConfig(patch_grid=(3, 2))
        teacher_feat = rng.normal(size=(6, 9, 4))
        student_feat = rng.normal(size=(6, 9, 4))
        numeric = finite_difference_gradient(
            lambda s: distillation_loss(teacher_feat, s, cfg).value, student_feat, step)
        analytic = distillation_loss(teacher_feat, student_feat, cfg).grad
        checks.append(_compare("distillation", k, analytic, numeric, rtol, atol))
    return checks
