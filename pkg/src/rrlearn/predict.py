"""Prediction rules and 0-d-1 evaluation.

Margins are turned into decisions by soft-thresholding at level delta:
margins shrunk to exactly 0 are "insignificant".  The reject rule abstains
when every margin is insignificant; the reject-and-refine rule additionally
predicts a set of plausible classes when no margin is significantly
positive.  Decisions are scored with the generalized 0-d-1 loss: 0 for a
correct label or a set containing the truth, d for a rejection, 1 for a
misclassification or mis-refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .coding import MarginVector

DEFINITE = "definite"
REFINED = "refined"
REJECT = "reject"


@dataclass(frozen=True)
class Prediction:
    """A definite label, a refined label set, or a rejection."""

    kind: str
    labels: Tuple[int, ...]
    k: int

    @classmethod
    def definite(cls, label: int, k: int) -> "Prediction":
        if not 1 <= label <= k:
            raise ValueError(f"label {label} outside 1..{k}")
        return cls(DEFINITE, (int(label),), int(k))

    @classmethod
    def refined(cls, labels, k: int) -> "Prediction":
        lab = tuple(sorted(int(j) for j in labels))
        if len(lab) < 2:
            raise ValueError("refined sets have at least 2 labels")
        if len(set(lab)) != len(lab) or lab[0] < 1 or lab[-1] > k:
            raise ValueError(f"invalid label set {lab} for k={k}")
        if len(lab) == k:
            # a set of all k labels carries no information
            return cls.reject(k)
        return cls(REFINED, lab, int(k))

    @classmethod
    def reject(cls, k: int) -> "Prediction":
        return cls(REJECT, (), int(k))

    @property
    def label(self) -> int:
        if self.kind != DEFINITE:
            raise ValueError(f"{self.kind} prediction has no single label")
        return self.labels[0]


def soft_threshold(c, delta: float):
    """S_delta(c) = sign(c) * max(|c| - delta, 0), elementwise."""
    if delta < 0:
        raise ValueError(f"threshold delta must be >= 0, got {delta}")
    c = np.asarray(c, dtype=float)
    out = np.sign(c) * np.maximum(np.abs(c) - delta, 0.0)
    return out if out.ndim else float(out)


def _margin_array(margins) -> np.ndarray:
    if isinstance(margins, MarginVector):
        return margins.values
    m = np.asarray(margins, dtype=float)
    if m.ndim != 1:
        raise ValueError("expected a single margin vector")
    return m


def predict_reject(margins, delta: float) -> Prediction:
    """Reject when every soft-thresholded margin is 0, else argmax label."""
    m = _margin_array(margins)
    k = m.shape[0]
    s = soft_threshold(m, delta)
    if np.all(s == 0.0):
        return Prediction.reject(k)
    return Prediction.definite(int(np.argmax(m)) + 1, k)


def predict_refine(margins, delta: float) -> Prediction:
    """Reject-and-refine rule.

    All thresholded margins zero: reject.  Some positive: predict the
    positive set.  Otherwise: predict the zero set (classes not ruled out).
    Singleton sets are reported as definite labels.
    """
    m = _margin_array(margins)
    k = m.shape[0]
    s = soft_threshold(m, delta)
    pos = np.flatnonzero(s > 0.0)
    zero = np.flatnonzero(s == 0.0)
    if zero.shape[0] == k:
        return Prediction.reject(k)
    chosen = pos if pos.shape[0] > 0 else zero
    if chosen.shape[0] == 0:
        raise ValueError("all margins significantly negative; margins must sum to 0")
    if chosen.shape[0] == 1:
        return Prediction.definite(int(chosen[0]) + 1, k)
    return Prediction.refined((chosen + 1).tolist(), k)


def admissible_d_max(k: int) -> float:
    """Largest rejection cost for which rejecting can ever be optimal."""
    return (k - 1) / k


def check_d(d: float, k: int) -> None:
    if not 0.0 < d <= admissible_d_max(k):
        raise ValueError(
            f"rejection cost d={d} outside admissible range (0, {(k - 1)}/{k}] "
            f"for k={k}"
        )


def zero_d_one_loss(pred: Prediction, truth: int, d: float) -> float:
    """0 for a correct decision, d for a rejection, 1 for a mistake."""
    check_d(d, pred.k)
    if pred.kind == REJECT:
        return float(d)
    if pred.kind == DEFINITE:
        return 0.0 if pred.labels[0] == truth else 1.0
    return 0.0 if truth in pred.labels else 1.0


def _refine_masks(margins: np.ndarray, delta: float):
    """Vectorized case analysis of the reject-and-refine rule.

    Returns (rejected, chosen) where chosen[i] is the boolean row of the
    predicted set for non-rejected rows (positive set if any margin is
    significantly positive, zero set otherwise).
    """
    s = soft_threshold(margins, delta)
    pos = s > 0.0
    zer = s == 0.0
    rejected = zer.all(axis=1)
    has_pos = pos.any(axis=1)
    chosen = np.where(has_pos[:, None], pos, zer)
    # degenerate size-k sets carry no information
    rejected = rejected | chosen.all(axis=1)
    return rejected, chosen


@dataclass(frozen=True)
class EvalReport:
    """0-d-1 evaluation of one model under three decision rules.

    The test set is partitioned by the reject-and-refine rule into
    label-predicted (p1), set-predicted (p2) and rejected (p3) fractions.
    Error columns report, on that same partition, the plain argmax rule
    (``regular``), the reject-only rule (``reject``) and the
    reject-and-refine rule (``rnr``).
    """

    n: int
    k: int
    delta: float
    d: float
    p1: float
    p2: float
    p3: float
    error_p1: float
    misrefine_p2: float
    overall_0d1: float
    overall_regular: float
    overall_reject: float
    regular_error_p1: float
    regular_error_p2: float
    regular_error_p3: float
    reject_error_p1: float
    reject_error_p2: float
    set_histogram: Dict[Tuple[int, ...], int] = field(default_factory=dict)
    set_size_fractions: Dict[int, float] = field(default_factory=dict)

    def as_text(self) -> str:
        lines = [
            f"n = {self.n}  k = {self.k}  delta = {self.delta:.6g}  d = {self.d:.6g}",
            f"p1 (label predicted)  = {self.p1:.4f}",
            f"p2 (set predicted)    = {self.p2:.4f}",
            f"p3 (rejected)         = {self.p3:.4f}",
            f"error on p1 {{regular, reject, rnr}} = "
            f"{self.regular_error_p1:.4f}, {self.reject_error_p1:.4f}, {self.error_p1:.4f}",
            f"error on p2 {{regular, reject, rnr}} = "
            f"{self.regular_error_p2:.4f}, {self.reject_error_p2:.4f}, {self.misrefine_p2:.4f}",
            f"error on p3 {{regular}}              = {self.regular_error_p3:.4f}",
            f"overall 0-d-1 {{regular, reject, rnr}} = "
            f"{self.overall_regular:.4f}, {self.overall_reject:.4f}, {self.overall_0d1:.4f}",
        ]
        for size in sorted(self.set_size_fractions):
            lines.append(f"set size {size} fraction = {self.set_size_fractions[size]:.4f}")
        for labels, count in sorted(self.set_histogram.items()):
            lines.append("set {" + ",".join(map(str, labels)) + "} count = " + str(count))
        return "\n".join(lines)

    def csv_rows(self):
        """Rows (subset, proportion, regular, reject, rnr) in table layout."""
        return [
            ("p1", self.p1, self.regular_error_p1, self.reject_error_p1, self.error_p1),
            ("p2", self.p2, self.regular_error_p2, self.reject_error_p2, self.misrefine_p2),
            ("p3", self.p3, self.regular_error_p3, "", ""),
            ("overall", 1.0, self.overall_regular, self.overall_reject, self.overall_0d1),
        ]


def evaluate_margins(margins: np.ndarray, y: np.ndarray, delta: float, d: float) -> EvalReport:
    """Score an (n, k) margin matrix against labels under all three rules."""
    margins = np.asarray(margins, dtype=float)
    y = np.asarray(y)
    n, k = margins.shape
    if n == 0:
        raise ValueError("cannot evaluate an empty test set")
    check_d(d, k)

    rejected, chosen = _refine_masks(margins, delta)
    sizes = chosen.sum(axis=1)
    p1_mask = ~rejected & (sizes == 1)
    p2_mask = ~rejected & (sizes >= 2)

    argmax_label = np.argmax(margins, axis=1) + 1
    correct_argmax = argmax_label == y
    truth_in_set = chosen[np.arange(n), y - 1] & ~rejected

    def rate(err_mask, subset) -> float:
        total = int(subset.sum())
        return float(err_mask[subset].mean()) if total else 0.0

    p1 = float(p1_mask.mean())
    p2 = float(p2_mask.mean())
    p3 = float(rejected.mean())

    # reject-and-refine: definite rows predict their single set member,
    # which is also the argmax among non-negative margins
    rnr_wrong_p1 = ~truth_in_set
    error_p1 = rate(rnr_wrong_p1, p1_mask)
    misrefine_p2 = rate(~truth_in_set, p2_mask)
    per_point = np.where(rejected, d, np.where(truth_in_set, 0.0, 1.0))
    overall_0d1 = float(per_point.mean())

    overall_regular = float((~correct_argmax).mean())
    reject_per_point = np.where(rejected, d, np.where(correct_argmax, 0.0, 1.0))
    overall_reject = float(reject_per_point.mean())

    regular_error_p1 = rate(~correct_argmax, p1_mask)
    regular_error_p2 = rate(~correct_argmax, p2_mask)
    regular_error_p3 = rate(~correct_argmax, rejected)
    # the reject-only rule never rejects outside p3, so on p1/p2 it is argmax
    reject_error_p1 = regular_error_p1
    reject_error_p2 = regular_error_p2

    histogram: Dict[Tuple[int, ...], int] = {}
    size_fractions: Dict[int, float] = {}
    if p2_mask.any():
        rows = chosen[p2_mask]
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        for row, count in zip(uniq, counts):
            labels = tuple((np.flatnonzero(row) + 1).tolist())
            histogram[labels] = int(count)
        for size in np.unique(rows.sum(axis=1)):
            size_fractions[int(size)] = float((rows.sum(axis=1) == size).sum() / n)

    return EvalReport(
        n=n, k=k, delta=float(delta), d=float(d),
        p1=p1, p2=p2, p3=p3,
        error_p1=error_p1, misrefine_p2=misrefine_p2, overall_0d1=overall_0d1,
        overall_regular=overall_regular, overall_reject=overall_reject,
        regular_error_p1=regular_error_p1, regular_error_p2=regular_error_p2,
        regular_error_p3=regular_error_p3,
        reject_error_p1=reject_error_p1, reject_error_p2=reject_error_p2,
        set_histogram=histogram, set_size_fractions=size_fractions,
    )


def evaluate(model, test, delta: float, d: float) -> EvalReport:
    """Evaluate a trained model on a labeled dataset."""
    margins = model.margins(test.X)
    if margins.shape[1] != test.k:
        raise ValueError(
            f"model predicts {margins.shape[1]} classes, dataset has {test.k}"
        )
    return evaluate_margins(margins, test.y, delta, d)
