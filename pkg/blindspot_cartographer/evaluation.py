"""
Blind-spot evaluation
Thresholding, confusion counts inside the visibility mask, micro-averaged reports,
threshold selection, the Detection-2D baseline and scoring against ray-cast oracles
"""

from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence as Seq, Tuple

import numpy as np
from scipy import ndimage

from .errors import EmptyVisibilityError, InvalidInputError, WindowUnderflowError
from .geometry import BinaryMask, as_mask, check_same_shape
from .labels import LabelConfig
from .pipeline import PipelineParams, generate_sequence
from .sequence import Sequence
from .synthworld import SynthScene, oracle_blind_spots
from .utils.log import get_logger

logger = get_logger(__name__)

DEFAULT_THRESHOLDS: Tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 10))

# One-pixel tolerance when matching generated blind spots to ray-cast oracles
BOUNDARY_TOLERANCE = 1
BAND_STRUCTURE = np.ones((3, 3), dtype=bool)

REPORT_KEYS = ("iou", "recall", "precision", "fn_rate", "tp", "fp", "fn", "tn", "frames",
               "precision_applicable", "threshold")


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator > 0 else 0.0


@dataclass(frozen=True)
class MetricReport:
    """
    Micro-averaged confusion counts and the ratios derived from them

    A ratio whose denominator is zero is reported as 0.0. When the ground truth is
    sparse, precision_applicable is False and precision should not be read.
    """
    tp: int
    fp: int
    fn: int
    tn: int
    frames: int = 1
    precision_applicable: bool = True
    threshold: Optional[float] = None

    @property
    def iou(self) -> float:
        return _ratio(self.tp, self.tp + self.fp + self.fn)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def fn_rate(self) -> float:
        return _ratio(self.fn, self.fn + self.tn)

    def to_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in REPORT_KEYS}

    def to_lines(self) -> List[str]:
        """key=value lines in REPORT_KEYS order"""
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, bool):
                text = str(value).lower()
            elif isinstance(value, float):
                text = f"{value:.6f}"
            elif value is None:
                text = "none"
            else:
                text = str(value)
            lines.append(f"{key}={text}")
        return lines


@dataclass
class MetricAccumulator:
    """Sums confusion counts over frames"""
    precision_applicable: bool = True
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    frames: int = 0
    visible: int = 0

    def add(self, pred: BinaryMask, gt: BinaryMask, visibility: BinaryMask) -> None:
        pred = as_mask(pred, "prediction")
        gt = as_mask(gt, "ground truth")
        visibility = as_mask(visibility, "visibility mask")
        check_same_shape(pred=pred, gt=gt, visibility=visibility)
        self.tp += int(np.count_nonzero(pred & gt & visibility))
        self.fp += int(np.count_nonzero(pred & ~gt & visibility))
        self.fn += int(np.count_nonzero(~pred & gt & visibility))
        self.tn += int(np.count_nonzero(~pred & ~gt & visibility))
        self.visible += int(np.count_nonzero(visibility))
        self.frames += 1

    def report(self, threshold: Optional[float] = None) -> MetricReport:
        if self.visible == 0:
            raise EmptyVisibilityError(
                f"visibility masks select no pixel across {self.frames} frame(s)"
            )
        return MetricReport(self.tp, self.fp, self.fn, self.tn, self.frames,
                            self.precision_applicable, threshold)


def binarize(prob: np.ndarray, threshold: float) -> BinaryMask:
    """1 where prob ≥ threshold"""
    if not 0 < threshold < 1:
        raise InvalidInputError(f"threshold must lie in (0, 1), got {threshold}")
    prob = np.asarray(prob, dtype=np.float64)
    if np.any((prob < 0) | (prob > 1)) or np.any(np.isnan(prob)):
        raise InvalidInputError("probabilities must lie in [0, 1]")
    return prob >= threshold


def masked_metrics(pred: BinaryMask, gt: BinaryMask, visibility: BinaryMask,
                   sparse_gt: bool = False) -> MetricReport:
    """Confusion counts of one frame restricted to the visibility mask"""
    return evaluate_frames([pred], [gt], [visibility], sparse_gt)


def evaluate_frames(preds: Iterable[BinaryMask], gts: Iterable[BinaryMask],
                    visibilities: Iterable[BinaryMask], sparse_gt: bool = False,
                    threshold: Optional[float] = None) -> MetricReport:
    """Micro-averaged report over matching frames"""
    preds, gts, visibilities = list(preds), list(gts), list(visibilities)
    if not (len(preds) == len(gts) == len(visibilities)):
        raise InvalidInputError(
            f"frame counts differ: {len(preds)} predictions, {len(gts)} ground truths, "
            f"{len(visibilities)} visibility masks"
        )
    if not preds:
        raise InvalidInputError("no frames to evaluate")
    accumulator = MetricAccumulator(precision_applicable=not sparse_gt)
    for pred, gt, visibility in zip(preds, gts, visibilities):
        accumulator.add(pred, gt, visibility)
    return accumulator.report(threshold)


def threshold_sweep(probs: Seq[np.ndarray], gts: Seq[BinaryMask], visibilities: Seq[BinaryMask],
                    grid: Iterable[float] = DEFAULT_THRESHOLDS,
                    sparse_gt: bool = False) -> Tuple[float, MetricReport]:
    """
    Grid threshold with the highest micro-averaged IoU

    Ties go to the lowest threshold.
    """
    grid = sorted(set(float(t) for t in grid))
    if not grid:
        raise InvalidInputError("threshold grid is empty")
    best: Optional[Tuple[float, MetricReport]] = None
    for threshold in grid:
        preds = [binarize(p, threshold) for p in probs]
        report = evaluate_frames(preds, gts, visibilities, sparse_gt, threshold)
        logger.debug("threshold %.3f: iou=%.4f", threshold, report.iou)
        if best is None or report.iou > best[1].iou:
            best = (threshold, report)
    logger.info("best threshold %.3f with iou %.4f", best[0], best[1].iou)
    return best


def detection2d_baseline(sem: np.ndarray, obstacle_ids: Iterable[int],
                         labels: Optional[LabelConfig] = None) -> BinaryMask:
    """
    Mark every pixel whose class is an obstacle (vehicle, pedestrian, cyclist) as blind spot

    With a label table, unknown IDs in the raster or in obstacle_ids are rejected.
    """
    sem = np.asarray(sem)
    if sem.ndim != 2:
        raise InvalidInputError(f"semantic map must be 2-D, got shape {sem.shape}")
    ids: FrozenSet[int] = frozenset(int(i) for i in obstacle_ids)
    if labels is not None:
        unknown = sorted(ids - labels.known_ids)
        if unknown:
            raise InvalidInputError(f"obstacle IDs {unknown} are not in the label table")
        labels.validate(sem)
    return np.isin(sem, np.fromiter(ids, dtype=np.int64, count=len(ids)))


def boundary_band(mask: BinaryMask, width: int = BOUNDARY_TOLERANCE) -> BinaryMask:
    """
    Pixels within `width` 8-neighbourhood steps of the mask edge, inside or outside

    The raster border does not count as an edge.
    """
    if width < 1:
        raise InvalidInputError(f"band width must be at least 1, got {width}")
    mask = as_mask(mask)
    grown = ndimage.binary_dilation(mask, structure=BAND_STRUCTURE, iterations=width)
    shrunk = ndimage.binary_erosion(mask, structure=BAND_STRUCTURE, iterations=width,
                                    border_value=1)
    return grown & ~shrunk


@dataclass(frozen=True)
class OracleComparison:
    """
    Generated blind spots of one scene scored against its ray-cast oracle

    against_tframe_tolerant ignores pixels on the boundary band of either mask.
    """
    window: int
    frames: int
    against_tframe: MetricReport
    against_true: MetricReport
    oracle_coverage: MetricReport
    against_tframe_tolerant: MetricReport

    def to_dict(self) -> Dict[str, float]:
        return {
            "window": self.window,
            "frames": self.frames,
            "iou_tframe": self.against_tframe.iou,
            "iou_tframe_tolerant": self.against_tframe_tolerant.iou,
            "precision_true": self.against_true.precision,
            "recall_true": self.against_true.recall,
            "fn_rate_true": self.against_true.fn_rate,
            "oracle_recall": self.oracle_coverage.recall,
            "oracle_fn_rate": self.oracle_coverage.fn_rate,
        }


def compare_with_oracle(scene: SynthScene, params: PipelineParams,
                        seq: Optional[Sequence] = None,
                        frames: Optional[Iterable[int]] = None,
                        tolerance: int = BOUNDARY_TOLERANCE) -> OracleComparison:
    """
    Run the generator on a synthetic scene and score every processable frame

    `seq` overrides the exact rendering (e.g. with injected noise). The oracle always uses
    the exact scene. Counts cover the whole raster, except for the tolerant T-frame score
    which skips the `tolerance`-pixel boundary bands.
    """
    seq = seq if seq is not None else scene.to_sequence()
    if len(seq) != len(scene):
        raise InvalidInputError(f"sequence has {len(seq)} frames, scene has {len(scene)}")
    window = params.window

    to_tframe = MetricAccumulator()
    to_true = MetricAccumulator()
    coverage = MetricAccumulator()
    tolerant = MetricAccumulator()
    full = np.ones(scene.K.shape, dtype=bool)
    for result in generate_sequence(seq, params, frames=frames):
        oracle = oracle_blind_spots(scene, result.frame, window)
        to_tframe.add(result.omega, oracle.tframe_blind, full)
        to_true.add(result.omega, oracle.true_blind, full)
        coverage.add(oracle.tframe_blind, oracle.true_blind, full)
        band = (boundary_band(result.omega, tolerance)
                | boundary_band(oracle.tframe_blind, tolerance))
        tolerant.add(result.omega, oracle.tframe_blind, ~band)
    if to_tframe.frames == 0:
        raise WindowUnderflowError(0, window, len(seq) - 1 - window)

    tolerant_report = (tolerant.report() if tolerant.visible
                       else MetricReport(0, 0, 0, 0, tolerant.frames, True, None))
    comparison = OracleComparison(window, to_tframe.frames, to_tframe.report(),
                                  to_true.report(), coverage.report(), tolerant_report)
    logger.info("scene %s, T=%d: iou=%.4f (tolerant %.4f) precision(true)=%.4f over %d frames",
                scene.name, window, comparison.against_tframe.iou,
                comparison.against_tframe_tolerant.iou,
                comparison.against_true.precision, comparison.frames)
    return comparison
