"""Population-level properties of bent-loss classifiers.

For class conditional probabilities P_1..P_k, the classifier minimizing the
population bent-loss risk has angle margins m solving

    minimize  sum_j Q_j * loss(m_j)   subject to  sum_j m_j = 0,

with Q_j = 1 - P_j, because each wrong-class term for class j carries total
weight 1 - P_j and the zero-sum constraint is exactly the range of the
coding map f -> (<Y_j, f>)_j.  The solver here finds the exact minimizer
from the stationarity condition: a multiplier t >= 0 with
t in Q_j * dloss(m_j) for every j.  The margin sign pattern, the Bayes rule
under 0-d-1 loss, and the nesting of reject regions on the probability
simplex are all checked against this oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .coding import CodingSimplex, build_simplex
from .errors import SolverError
from .losses import CUSTOM, DWD, HINGE, BentLoss
from .predict import Prediction, check_d

BIG = 1e12
CERT_TOL = 1e-8
ZERO_MARGIN_TOL = 1e-5


@dataclass(frozen=True)
class ProbVector:
    """Class conditional probabilities at one point, plus Q = 1 - P."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if p.ndim != 1 or p.shape[0] < 2:
            raise ValueError("probability vector needs at least 2 entries")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"entries must be nonnegative and sum to 1, got {p}")

    @property
    def k(self) -> int:
        return self.p.shape[0]

    @property
    def q(self) -> np.ndarray:
        return 1.0 - self.p


def _prob_array(p) -> np.ndarray:
    if isinstance(p, ProbVector):
        return p.p
    return ProbVector(np.asarray(p, dtype=float)).p


def bayes_rule(p, d: float) -> Prediction:
    """Bayes decision under 0-d-1 loss: top label if P_(1) > 1-d, else reject."""
    pv = _prob_array(p)
    k = pv.shape[0]
    check_d(d, k)
    if pv.max() > 1.0 - d:
        return Prediction.definite(int(np.argmax(pv)) + 1, k)
    return Prediction.reject(k)


def _branch_interval(loss: BentLoss, s: float) -> Tuple[float, float]:
    """Margin interval {m : s in dloss(m)} for slope level s >= 0."""
    a = loss.a
    if s > a:
        return (BIG, BIG)
    if s == a:
        return (0.0, BIG)
    if loss.kind == HINGE:
        if s > 1.0:
            return (0.0, 0.0)
        if s == 1.0:
            return (-1.0, 0.0)
        if s > 0.0:
            return (-1.0, -1.0)
        return (-BIG, -1.0)
    if loss.kind == DWD:
        if s > 1.0:
            return (0.0, 0.0)
        if s == 1.0:
            return (-0.5, 0.0)
        if s > 0.0:
            m = -0.5 / math.sqrt(s)
            return (m, m)
        return (-BIG, -BIG)
    return _invert_subgrad(loss, s)


def _invert_subgrad(loss: BentLoss, s: float) -> Tuple[float, float]:
    """Generic inversion of the subgradient map by bisection (custom bases)."""
    if s >= loss.a:
        return (0.0, BIG) if s == loss.a else (BIG, BIG)

    def below(m):  # entire subdifferential below s
        return loss.subgradient(m)[1] < s

    def above(m):
        return loss.subgradient(m)[0] > s

    lo, hi = -BIG, 0.0
    if not below(lo):
        left = lo
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if below(mid):
                lo = mid
            else:
                hi = mid
        left = hi
    lo, hi = left, 0.0
    if not above(hi):
        right = hi
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if above(mid):
                hi = mid
            else:
                lo = mid
        right = lo
    return (left, right)


def population_margins(q: np.ndarray, loss: BentLoss) -> Tuple[np.ndarray, float]:
    """Exact zero-sum minimizer of sum_j q_j*loss(m_j) and its multiplier t."""
    q = np.asarray(q, dtype=float)
    k = q.shape[0]
    if np.any(q <= 0.0):
        raise ValueError("population minimizer needs max_j P_j < 1")

    def interval_sums(t: float):
        los = np.empty(k)
        his = np.empty(k)
        for j in range(k):
            los[j], his[j] = _branch_interval(loss, t / q[j])
        return los, his

    breakpoints = np.unique(np.concatenate([q, loss.a * q]))
    t_star = None
    for t in breakpoints:
        los, his = interval_sums(float(t))
        if los.sum() <= 0.0 <= his.sum():
            t_star = float(t)
            break
    if t_star is None:
        # root in an open interval where all branch intervals are singletons
        lo_t, hi_t = None, None
        grid = np.concatenate([[breakpoints[0] * 0.5], breakpoints,
                               [breakpoints[-1] * 2.0]])
        for t1, t2 in zip(grid[:-1], grid[1:]):
            s1 = interval_sums(float(t1))[1].sum()
            s2 = interval_sums(float(t2))[0].sum()
            if s1 < 0.0 < s2:
                lo_t, hi_t = float(t1), float(t2)
                break
        if lo_t is None:
            raise SolverError("no stationary multiplier found for population risk")
        for _ in range(200):
            mid = 0.5 * (lo_t + hi_t)
            if interval_sums(mid)[1].sum() < 0.0:
                lo_t = mid
            else:
                hi_t = mid
        t_star = 0.5 * (lo_t + hi_t)
        los, his = interval_sums(t_star)

    # distribute the slack of flat pieces to restore the zero sum,
    # most plausible class (smallest q) first
    m = los.copy()
    deficit = -los.sum()
    for j in np.argsort(q, kind="stable"):
        room = his[j] - m[j]
        step = min(deficit, room)
        m[j] += step
        deficit -= step
        if deficit <= 0.0:
            break
    return m, t_star


def population_minimizer(p, loss: BentLoss,
                         simplex: Optional[CodingSimplex] = None) -> np.ndarray:
    """Minimizer f* of the population bent-loss risk at probabilities p.

    Raises SolverError if the stationarity certificate exceeds 1e-8.
    """
    pv = _prob_array(p)
    k = pv.shape[0]
    if simplex is None:
        simplex = build_simplex(k)
    if simplex.k != k:
        raise ValueError(f"simplex has k={simplex.k}, probabilities have k={k}")
    q = 1.0 - pv
    m, t_star = population_margins(q, loss)

    # certificate: pick s_j in dloss(m_j); q_j*s_j must be constant = t*
    weighted = np.empty(k)
    for j in range(k):
        lo, hi = loss.subgradient(float(m[j]))
        weighted[j] = min(max(t_star, q[j] * lo), q[j] * hi)
    residual = np.linalg.norm(simplex.vertices.T @ weighted)
    residual = max(residual, abs(float(m.sum())))
    if residual > CERT_TOL:
        raise SolverError(
            f"population minimizer certificate failed: residual {residual:.3e}"
        )
    return (k - 1) / k * (simplex.vertices.T @ m)


@dataclass(frozen=True)
class RegionLabel:
    """Decision-region label of a probability vector: reject/label/refine."""

    kind: str  # "reject", "label" or "refine"
    labels: Tuple[int, ...] = ()


def _fstar_pattern(q: np.ndarray, a: float):
    """Prop-style sign pattern from Q ratios: (s, ascending-Q order)."""
    order = np.argsort(q, kind="stable")
    ratio_count = int(np.sum(q < a * q[order[0]]))
    return ratio_count, order


def fstar_region(p, a: float) -> RegionLabel:
    """Region of the population minimizer: reject iff Q_(k) < a * Q_(1)."""
    if not a > 1.0:
        raise ValueError(f"bend slope a must exceed 1, got {a}")
    pv = _prob_array(p)
    q = 1.0 - pv
    s, order = _fstar_pattern(q, a)
    if s == q.shape[0]:
        return RegionLabel("reject")
    if s == 1:
        return RegionLabel("label", (int(order[0]) + 1,))
    plausible = tuple(sorted(int(j) + 1 for j in order[:s]))
    return RegionLabel("refine", plausible)


@dataclass
class Prop1Report:
    """Outcome of one sign-pattern check of the population minimizer."""

    matched: bool
    margins: np.ndarray
    expected_positive: Tuple[int, ...]
    expected_zero: Tuple[int, ...]
    expected_negative: Tuple[int, ...]
    message: str = ""


def verify_prop1(p, loss: BentLoss, tol: float = ZERO_MARGIN_TOL) -> Prop1Report:
    """Check the margin sign pattern of the population minimizer.

    Predicted pattern from Q ratios: all margins zero when Q_(k) < a*Q_(1);
    otherwise the top class is positive, classes with Q_(j) < a*Q_(1) are
    zero, and the rest are negative.
    """
    pv = _prob_array(p)
    k = pv.shape[0]
    q = 1.0 - pv
    simplex = build_simplex(k)
    f_star = population_minimizer(pv, loss, simplex)
    margins = simplex.margins_of(f_star)

    s, order = _fstar_pattern(q, loss.a)
    if s == k:
        exp_pos: Tuple[int, ...] = ()
        exp_zero = tuple(range(1, k + 1))
        exp_neg: Tuple[int, ...] = ()
    else:
        exp_pos = (int(order[0]) + 1,)
        exp_zero = tuple(sorted(int(j) + 1 for j in order[1:s]))
        exp_neg = tuple(sorted(int(j) + 1 for j in order[s:]))

    got_pos = tuple(sorted(int(j) + 1 for j in np.flatnonzero(margins > tol)))
    got_zero = tuple(sorted(int(j) + 1 for j in np.flatnonzero(np.abs(margins) <= tol)))
    got_neg = tuple(sorted(int(j) + 1 for j in np.flatnonzero(margins < -tol)))
    matched = (got_pos, got_zero, got_neg) == (exp_pos, exp_zero, exp_neg)
    message = "" if matched else (
        f"margins {margins} -> pattern (+{got_pos}, 0{got_zero}, -{got_neg}), "
        f"expected (+{exp_pos}, 0{exp_zero}, -{exp_neg})"
    )
    return Prop1Report(matched, margins, exp_pos, exp_zero, exp_neg, message)


@dataclass
class SandwichReport:
    """Monte Carlo check that the f*-reject regions sandwich the Bayes one."""

    k: int
    d: float
    a1: float
    a2: float
    n_samples: int
    inner_violations: int
    outer_violations: int
    offending: List[np.ndarray] = field(default_factory=list)
    interior_a: Optional[float] = None
    tight_inside: Optional[bool] = None
    tight_outside: Optional[bool] = None
    coincide_mismatches: Optional[int] = None

    @property
    def passed(self) -> bool:
        ok = self.inner_violations == 0 and self.outer_violations == 0
        if self.coincide_mismatches is not None:
            ok = ok and self.coincide_mismatches == 0
        if self.tight_inside is not None:
            ok = ok and self.tight_inside and self.tight_outside
        return ok

    def as_text(self) -> str:
        lines = [
            f"k={self.k} d={self.d} a1={self.a1:.6g} a2={self.a2:.6g} "
            f"samples={self.n_samples}",
            f"inner inclusion violations (fstar(a1) outside Bayes): {self.inner_violations}",
            f"outer inclusion violations (Bayes outside fstar(a2)): {self.outer_violations}",
        ]
        if self.coincide_mismatches is not None:
            lines.append(f"coincidence mismatches at a1=a2: {self.coincide_mismatches}")
        if self.tight_inside is not None:
            lines.append(
                f"tightness witnesses at a={self.interior_a:.6g}: "
                f"fstar-not-Bayes {self.tight_inside}, Bayes-not-fstar {self.tight_outside}"
            )
        for off in self.offending[:5]:
            lines.append(f"  offending p: {np.array2string(off, precision=6)}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def verify_region_sandwich(k: int, d: float, n_samples: int = 100_000,
                           seed: int = 0, a1: Optional[float] = None,
                           a2: Optional[float] = None,
                           interior_a: Optional[float] = None) -> SandwichReport:
    """Sample the probability simplex and check the reject-region nesting.

    With the extreme slopes a1 and a2, the f*-reject region at a1 must sit
    inside the Bayes reject region, which must sit inside the region at a2.
    For k > 2 an interior slope must witness tightness on both sides; for
    k = 2 the three regions coincide instead.
    """
    from .tune import a_bounds  # local import to avoid a module cycle

    check_d(d, k)
    default_a1, default_a2 = a_bounds(k, d)
    if a1 is None:
        a1 = default_a1
    if a2 is None:
        a2 = default_a2
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,)))
    p = rng.dirichlet(np.ones(k), size=n_samples)
    q = 1.0 - p
    q_min = q.min(axis=1)
    q_max = q.max(axis=1)
    bayes_rej = p.max(axis=1) <= 1.0 - d
    fstar_rej_a1 = q_max < a1 * q_min
    fstar_rej_a2 = q_max < a2 * q_min

    inner_bad = fstar_rej_a1 & ~bayes_rej
    outer_bad = bayes_rej & ~fstar_rej_a2
    offending = [p[i] for i in np.flatnonzero(inner_bad | outer_bad)[:10]]

    report = SandwichReport(
        k=k, d=d, a1=float(a1), a2=float(a2), n_samples=n_samples,
        inner_violations=int(inner_bad.sum()),
        outer_violations=int(outer_bad.sum()),
        offending=offending,
    )
    if a2 - a1 <= 1e-12:
        mism = int((fstar_rej_a1 != bayes_rej).sum())
        report.coincide_mismatches = mism
    else:
        a_mid = interior_a if interior_a is not None else 0.5 * (a1 + a2)
        fstar_mid = q_max < a_mid * q_min
        report.interior_a = float(a_mid)
        report.tight_inside = bool(np.any(fstar_mid & ~bayes_rej))
        report.tight_outside = bool(np.any(bayes_rej & ~fstar_mid))
    return report


def region_map_rows(k: int, d: float, a: float, grid: int = 100):
    """Barycentric-grid region labels for CSV export (k = 3 maps).

    Yields (p1, ..., pk, bayes_kind, bayes_label, fstar_kind, fstar_labels)
    over the lattice of compositions of ``grid`` into k parts.
    """
    if k != 3:
        raise ValueError("region maps are exported for k=3 only")
    check_d(d, k)
    for i in range(grid + 1):
        for j in range(grid + 1 - i):
            p = np.array([i, j, grid - i - j], dtype=float) / grid
            b = bayes_rule(p, d)
            f = fstar_region(p, a) if p.max() < 1.0 else RegionLabel(
                "label", (int(np.argmax(p)) + 1,))
            yield (
                p[0], p[1], p[2],
                b.kind, b.labels[0] if b.labels else "",
                f.kind, " ".join(map(str, f.labels)),
            )
