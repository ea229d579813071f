"""Instance-segmentation average precision and runtime profiling.

AP follows the street-scene benchmark convention: per class and IoU
threshold, predictions are matched greedily in descending score order to
the unmatched ground-truth instance of highest overlap, a match counting
only when IoU strictly exceeds the threshold. The per-threshold score is
the area under the interpolated precision-recall curve; AP averages the ten
thresholds 0.50..0.95. Multi-scene evaluation pools matched flags across
scenes per class (matching itself never crosses scene boundaries).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

# (10 + i) / 20 reproduces the decimal thresholds exactly in binary floats
IOU_THRESHOLDS = tuple((10 + i) / 20 for i in range(10))


@dataclass
class GtInstance:
    mask: np.ndarray
    class_id: int


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.logical_and(a, b).sum())
    if inter == 0:
        return 0.0
    union = int(a.sum()) + int(b.sum()) - inter
    return inter / union


@dataclass
class ApReport:
    per_class: dict                  # class id -> AP over all thresholds
    per_class_at: dict               # class id -> tuple of per-threshold APs
    thresholds: tuple = IOU_THRESHOLDS

    @property
    def mean_ap(self) -> float:
        if not self.per_class:
            return 0.0
        return float(np.mean(list(self.per_class.values())))

    @property
    def ap50(self) -> float:
        if not self.per_class_at:
            return 0.0
        idx = self.thresholds.index(0.5)
        return float(np.mean([v[idx] for v in self.per_class_at.values()]))


def _iou_table(preds, gts) -> np.ndarray:
    table = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            table[i, j] = mask_iou(p.mask, g.mask)
    return table


def _match_flags(iou: np.ndarray, threshold: float) -> np.ndarray:
    """Greedy one-to-one matching; rows must already be score-ordered."""
    n_pred, n_gt = iou.shape
    taken = np.zeros(n_gt, dtype=bool)
    tp = np.zeros(n_pred, dtype=bool)
    for i in range(n_pred):
        best_j = -1
        best = threshold
        for j in range(n_gt):
            if not taken[j] and iou[i, j] > best:
                best = iou[i, j]
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            tp[i] = True
    return tp


def _pr_area(scores: np.ndarray, tp: np.ndarray, n_gt: int) -> float:
    """Area under the interpolated precision-recall curve."""
    if n_gt == 0:
        return 0.0
    if scores.size == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    flags = tp[order]
    cum_tp = np.cumsum(flags)
    cum_fp = np.cumsum(~flags)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    dr = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(dr * interp))


def ap_report(scenes, thresholds=IOU_THRESHOLDS) -> ApReport:
    """AP over (predictions, ground truths) pairs, pooled across scenes.

    ``scenes``: iterable of (list of ScoredInstance, list of GtInstance);
    masks within one scene must share a resolution. Classes without any
    ground-truth instance are excluded from the means.
    """
    scenes = list(scenes)
    for preds, gts in scenes:
        shapes = {p.mask.shape for p in preds} | {g.mask.shape for g in gts}
        if len(shapes) > 1:
            raise InputError(f"masks within a scene must share a resolution, got {shapes}")

    classes = sorted({g.class_id for _, gts in scenes for g in gts})
    per_class = {}
    per_class_at = {}
    for cls in classes:
        n_gt = sum(sum(1 for g in gts if g.class_id == cls) for _, gts in scenes)
        scene_data = []
        for preds, gts in scenes:
            cp = sorted([p for p in preds if p.class_id == cls],
                        key=lambda p: -p.score)
            cg = [g for g in gts if g.class_id == cls]
            scene_data.append((cp, _iou_table(cp, cg)))
        ap_at = []
        for t in thresholds:
            scores = []
            flags = []
            for cp, iou in scene_data:
                scores.extend(p.score for p in cp)
                flags.extend(_match_flags(iou, t))
            ap_at.append(_pr_area(np.asarray(scores, dtype=np.float64),
                                  np.asarray(flags, dtype=bool), n_gt))
        per_class_at[cls] = tuple(ap_at)
        per_class[cls] = float(np.mean(ap_at))
    return ApReport(per_class, per_class_at, tuple(thresholds))


def average_precision(predictions, ground_truth, thresholds=IOU_THRESHOLDS) -> ApReport:
    """Single-scene AP; see ``ap_report``."""
    return ap_report([(list(predictions), list(ground_truth))], thresholds)


# -- runtime profiling -------------------------------------------------------

@dataclass
class ProfileRow:
    pixels: int
    seconds_median: float
    seconds_p95: float


@dataclass
class ProfileResult:
    rows: list
    slope: float
    intercept: float
    r_squared: float

    def to_csv(self) -> str:
        lines = ["pixels,seconds_median,seconds_p95"]
        for r in self.rows:
            lines.append(f"{r.pixels},{r.seconds_median:.6f},{r.seconds_p95:.6f}")
        return "\n".join(lines) + "\n"


def runtime_profile(sizes, make_pyramid, partition, repeats: int = 5) -> ProfileResult:
    """Time ``partition`` over a size sweep and fit a log-log slope.

    ``make_pyramid(shape)`` builds the input once per size; ``partition``
    is timed ``repeats`` times on it. Rows report the median and the 95th
    percentile. The slope comes from least squares on (ln pixels,
    ln median seconds).
    """
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    rows = []
    for shape in sizes:
        h, w = shape
        pyramid = make_pyramid((h, w))
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            partition(pyramid)
            times.append(time.perf_counter() - start)
        rows.append(ProfileRow(h * w, float(np.median(times)),
                               float(np.percentile(times, 95))))
    x = np.log([r.pixels for r in rows])
    y = np.log([max(r.seconds_median, 1e-9) for r in rows])
    if len(rows) >= 2:
        slope, intercept = np.polyfit(x, y, 1)
        fitted = slope * x + intercept
        ss_res = float(np.sum((y - fitted) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    else:
        slope, intercept, r2 = 0.0, float(y[0]) if len(rows) else 0.0, 1.0
    return ProfileResult(rows, float(slope), float(intercept), float(r2))
