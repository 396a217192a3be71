"""One-way repeated-measures ANOVA over a subjects x periods matrix.

Rows are subjects (distinct commanded positions), columns are the levels of
the within-subject factor (cycle periods). Besides the univariate test the
module produces the sphericity diagnostics and corrections, adjacent-level
contrasts, the multivariate tests, Bonferroni pairwise comparisons,
per-level parameter estimates and the between-subjects intercept test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from servorig import distributions as dist
from servorig.errors import InsufficientDataError, SingularMatrixError

CORRECTIONS = ("Sphericity Assumed", "Greenhouse-Geisser", "Huynh-Feldt", "Lower-bound")


@dataclass(frozen=True)
class SubjectMatrix:
    values: np.ndarray
    row_labels: tuple = ()
    column_labels: tuple = ()
    dropped: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"subject matrix must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("subject matrix has missing or non-finite cells")
        object.__setattr__(self, "values", v)
        n, k = v.shape
        if not self.row_labels:
            object.__setattr__(self, "row_labels", tuple(range(1, n + 1)))
        if not self.column_labels:
            object.__setattr__(self, "column_labels", tuple(f"level_{j + 1}" for j in range(k)))
        if len(self.row_labels) != n or len(self.column_labels) != k:
            raise ValueError("label lengths do not match matrix shape")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]


def as_matrix(m):
    return m if isinstance(m, SubjectMatrix) else SubjectMatrix(np.asarray(m, dtype=float))


@dataclass(frozen=True)
class ColumnSummary:
    label: str
    mean: float
    sd: float
    n: int
    sd_defined: bool


@dataclass(frozen=True)
class SphericityResult:
    W: float
    chi2: float
    df: int
    p: float
    eps_gg: float
    eps_hf: float
    eps_lb: float
    degenerate: bool = False


@dataclass(frozen=True)
class CorrectionRow:
    correction: str
    epsilon: float
    df_effect: float
    df_error: float
    ms_effect: float
    ms_error: float
    F: float
    p: float


@dataclass(frozen=True)
class WithinSubjectsResult:
    ss_effect: float
    ss_error: float
    ss_subjects: float
    ss_total: float
    rows: tuple
    partial_eta2: float
    degenerate: bool = False

    def row(self, correction):
        for r in self.rows:
            if r.correction == correction:
                return r
        raise KeyError(correction)


@dataclass(frozen=True)
class ContrastResult:
    label: str
    ss_hypothesis: float
    ss_error: float
    df_hypothesis: int
    df_error: int
    ms_hypothesis: float
    ms_error: float
    F: float
    p: float
    partial_eta2: float
    degenerate: bool = False


@dataclass(frozen=True)
class MultivariateResult:
    pillai: float
    wilks: float
    hotelling: float
    roy: float
    F: float
    df_hypothesis: float
    df_error: float
    p: float
    partial_eta2: float


@dataclass(frozen=True)
class PairwiseResult:
    i: int
    j: int
    mean_diff: float
    se: float
    p_bonferroni: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class ParamEstimate:
    level: str
    mean: float
    se: float
    t: float
    p: float
    ci_low: float
    ci_high: float
    partial_eta2: float


@dataclass(frozen=True)
class InterceptResult:
    ss: float
    df: int
    ms: float
    ss_error: float
    df_error: int
    ms_error: float
    F: float
    p: float
    partial_eta2: float


# --------------------------------------------------------------------------
# building the matrix from a rig log

def _log_arrays(log):
    if hasattr(log, "commanded_deg") and hasattr(log, "encoder_counts"):
        return (np.asarray(log.commanded_deg, dtype=np.int64),
                np.asarray(log.encoder_counts, dtype=float))
    recs = list(log)
    return (np.array([r.commanded_deg for r in recs], dtype=np.int64),
            np.array([r.encoder_counts for r in recs], dtype=float))


def period_position_means(commanded, counts, period_cycles, n_periods, sample_size, seed):
    """Per-period ``{position: mean count}`` from seeded random draws.

    One ``numpy`` generator is consumed in block order; each block of
    ``period_cycles`` consecutive records contributes ``sample_size``
    records drawn without replacement.
    """
    if sample_size > period_cycles:
        raise ValueError(f"sample_size {sample_size} exceeds period length {period_cycles}")
    need = n_periods * period_cycles
    if len(commanded) < need:
        raise InsufficientDataError(
            f"log has {len(commanded)} records, {need} required "
            f"({n_periods} periods x {period_cycles} cycles)")
    rng = np.random.default_rng(seed)
    out = []
    for b in range(n_periods):
        lo = b * period_cycles
        if sample_size == period_cycles:
            idx = np.arange(period_cycles)
        else:
            idx = np.sort(rng.choice(period_cycles, size=sample_size, replace=False))
        cmd = commanded[lo + idx]
        cnt = counts[lo + idx]
        pos, inv = np.unique(cmd, return_inverse=True)
        sums = np.bincount(inv, weights=cnt)
        nums = np.bincount(inv)
        out.append({int(p): s / c for p, s, c in zip(pos, sums, nums)})
    return out


def build_subject_matrix(log, period_cycles, n_periods, sample_size, seed):
    """Positions x periods matrix of mean encoder counts.

    Positions missing from any period's draw are dropped (complete cases).
    """
    commanded, counts = _log_arrays(log)
    per = period_position_means(commanded, counts, period_cycles, n_periods, sample_size, seed)
    for b, d in enumerate(per):
        if not d:
            raise InsufficientDataError(f"period {b + 1} retained no positions")
    every = set(per[0])
    for d in per[1:]:
        every &= set(d)
    union = set().union(*per)
    if not every:
        raise InsufficientDataError("no position is present in every period")
    rows = sorted(every)
    values = np.array([[d[p] for d in per] for p in rows])
    return SubjectMatrix(values, row_labels=tuple(rows),
                         column_labels=tuple(f"period_{b + 1}" for b in range(n_periods)),
                         dropped=tuple(sorted(union - every)))


# --------------------------------------------------------------------------
# statistics

def column_summary(m):
    m = as_matrix(m)
    y = m.values
    n = m.n
    out = []
    for j, label in enumerate(m.column_labels):
        sd = float(np.std(y[:, j], ddof=1)) if n > 1 else math.nan
        out.append(ColumnSummary(str(label), float(y[:, j].mean()), sd, n, n > 1))
    return out


def _orthonormal_contrasts(k):
    # rows span the complement of the constant vector
    basis = np.linalg.qr(np.column_stack([np.ones(k), np.eye(k)[:, : k - 1]]))[0]
    return basis[:, 1:].T


def sphericity(m):
    """Mauchly's test and the three epsilon estimates."""
    m = as_matrix(m)
    n, k = m.n, m.k
    if k < 2:
        raise InsufficientDataError("sphericity needs at least two levels")
    if k == 2:
        return SphericityResult(1.0, 0.0, 0, 1.0, 1.0, 1.0, 1.0)
    if n < 2:
        raise InsufficientDataError("sphericity needs at least two subjects")
    p = k - 1
    c = _orthonormal_contrasts(k)
    s = c @ np.cov(m.values, rowvar=False) @ c.T
    tr = float(np.trace(s))
    eps_lb = 1.0 / p
    if tr <= 0:
        # no within-subject variation at all: sphericity holds trivially
        return SphericityResult(1.0, 0.0, p * (p + 1) // 2 - 1, 1.0, 1.0, 1.0, eps_lb, True)
    eps_gg = tr * tr / (p * float(np.trace(s @ s)))
    eps_gg = min(1.0, max(eps_lb, eps_gg))
    denom = p * (n - 1 - p * eps_gg)
    eps_hf = (n * p * eps_gg - 2.0) / denom if denom > 0 else 1.0
    eps_hf = min(1.0, max(eps_gg, eps_hf))
    det = float(np.linalg.det(s))
    w = det / (tr / p) ** p
    df = p * (p + 1) // 2 - 1
    if w <= 1e-14:
        return SphericityResult(0.0, math.inf, df, 0.0, eps_gg, eps_hf, eps_lb, True)
    w = min(w, 1.0)
    d = 1.0 - (2 * p * p + p + 2) / (6.0 * p * (n - 1))
    chi2 = -(n - 1) * d * math.log(w)
    return SphericityResult(w, chi2, df, dist.chi2_sf(chi2, df), eps_gg, eps_hf, eps_lb)


def _f_test(ss_h, df_h, ss_e, df_e):
    ms_h = ss_h / df_h
    ms_e = ss_e / df_e
    if ms_e > 0:
        f = ms_h / ms_e
        return ms_h, ms_e, f, dist.f_sf(f, df_h, df_e)
    if ms_h > 0:
        return ms_h, ms_e, math.inf, 0.0
    return ms_h, ms_e, 0.0, 1.0


def _is_zero(ss, scale):
    return ss <= 1e-12 * scale or ss == 0.0


def within_subjects(m, spher=None):
    """Univariate within-subjects test with all four df corrections."""
    m = as_matrix(m)
    n, k = m.n, m.k
    if n < 2 or k < 2:
        raise InsufficientDataError(f"within-subjects test needs n >= 2 and k >= 2, got {n}x{k}")
    y = m.values
    grand = y.mean()
    ss_total = float(((y - grand) ** 2).sum())
    ss_effect = float(n * ((y.mean(axis=0) - grand) ** 2).sum())
    ss_subjects = float(k * ((y.mean(axis=1) - grand) ** 2).sum())
    resid = y - y.mean(axis=0) - y.mean(axis=1)[:, None] + grand
    ss_error = float((resid ** 2).sum())
    scale = max(ss_total, np.abs(y).max() ** 2 if y.size else 0.0)
    degenerate = _is_zero(ss_error, scale)
    if degenerate:
        ss_error = 0.0
    if _is_zero(ss_effect, scale):
        ss_effect = 0.0

    spher = spher or sphericity(m)
    df_e0 = k - 1
    df_r0 = (n - 1) * (k - 1)
    _, _, f, _ = _f_test(ss_effect, df_e0, ss_error, df_r0)
    rows = []
    for name, eps in zip(CORRECTIONS, (1.0, spher.eps_gg, spher.eps_hf, spher.eps_lb)):
        # epsilon scales both df, so F is shared and only df and p move
        df_h, df_r = df_e0 * eps, df_r0 * eps
        if math.isfinite(f) and f > 0:
            p = dist.f_sf(f, df_h, df_r)
        else:
            p = 0.0 if f == math.inf else 1.0
        rows.append(CorrectionRow(name, eps, df_h, df_r, ss_effect / df_h, ss_error / df_r, f, p))
    denom = ss_effect + ss_error
    eta = ss_effect / denom if denom > 0 else 0.0
    return WithinSubjectsResult(ss_effect, ss_error, ss_subjects, ss_total,
                                tuple(rows), eta, degenerate)


def contrasts(m):
    """Adjacent-level ("repeated") contrasts on raw difference scores."""
    m = as_matrix(m)
    n, k = m.n, m.k
    if k < 2:
        raise InsufficientDataError("contrasts need at least two levels")
    if n < 2:
        raise InsufficientDataError("contrasts need at least two subjects")
    out = []
    for j in range(k - 1):
        d = m.values[:, j + 1] - m.values[:, j]
        dbar = float(d.mean())
        ss_h = n * dbar * dbar
        ss_e = float(((d - dbar) ** 2).sum())
        scale = float((d ** 2).sum()) or 1.0
        degenerate = _is_zero(ss_e, scale)
        if degenerate:
            ss_e = 0.0
        ms_h, ms_e, f, p = _f_test(ss_h, 1, ss_e, n - 1)
        eta = ss_h / (ss_h + ss_e) if ss_h + ss_e > 0 else 0.0
        out.append(ContrastResult(f"Level {j + 1} vs. Level {j + 2}", ss_h, ss_e, 1, n - 1,
                                  ms_h, ms_e, f, p, eta, degenerate and ss_h > 0))
    return out


def multivariate(m):
    """Pillai, Wilks, Hotelling-Lawley and Roy for the single within factor.

    With one within-subject factor the hypothesis matrix has rank one, so
    all four statistics are functions of Hotelling's ``T^2`` on the
    ``k - 1`` adjacent difference variables.
    """
    m = as_matrix(m)
    n, k = m.n, m.k
    if k < 2:
        raise InsufficientDataError("multivariate test needs at least two levels")
    if n < k + 1:
        raise InsufficientDataError(f"multivariate test needs n >= k + 1, got n={n}, k={k}")
    d = np.diff(m.values, axis=1)
    dbar = d.mean(axis=0)
    s = np.atleast_2d(np.cov(d, rowvar=False))
    p = k - 1
    sv = np.linalg.svd(s, compute_uv=False)
    if sv[0] <= 0 or sv[-1] <= 1e-12 * sv[0]:
        rank = int((sv > 1e-12 * max(sv[0], 1e-300)).sum())
        labels = [f"{m.column_labels[j + 1]}-{m.column_labels[j]}" for j in range(p)]
        raise SingularMatrixError(
            f"difference scores {labels} are collinear (covariance rank {rank} < {p})")
    t2 = n * float(dbar @ np.linalg.solve(s, dbar))
    hot = t2 / (n - 1)
    pillai = hot / (1.0 + hot)
    df_h, df_e = float(p), float(n - k + 1)
    f = hot * df_e / df_h
    return MultivariateResult(pillai, 1.0 - pillai, hot, hot, f, df_h, df_e,
                              dist.f_sf(f, df_h, df_e), pillai)


def _t_stat(diff, se):
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def pairwise(m, alpha=0.05):
    """Bonferroni-adjusted comparisons for every ordered pair of levels."""
    m = as_matrix(m)
    n, k = m.n, m.k
    if n < 2:
        raise InsufficientDataError("pairwise comparisons need at least two subjects")
    n_comp = k * (k - 1) // 2
    tcrit = dist.t_quantile(1.0 - alpha / (2 * n_comp), n - 1)
    out = []
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            d = m.values[:, i] - m.values[:, j]
            md = float(d.mean())
            se = float(np.std(d, ddof=1)) / math.sqrt(n)
            p_raw = dist.t_two_sided_p(_t_stat(md, se), n - 1)
            out.append(PairwiseResult(i + 1, j + 1, md, se, min(1.0, p_raw * n_comp),
                                      md - tcrit * se, md + tcrit * se))
    return out


def param_estimates_from_summary(means, sds, n, labels=None, alpha=0.05):
    """Intercept-only estimates per level from column means and sds."""
    if n < 2:
        raise InsufficientDataError("parameter estimates need n >= 2")
    labels = labels or [str(j + 1) for j in range(len(means))]
    tcrit = dist.t_quantile(1.0 - alpha / 2, n - 1)
    out = []
    for label, mean, sd in zip(labels, means, sds):
        se = sd / math.sqrt(n)
        t = _t_stat(mean, se)
        eta = t * t / (t * t + n - 1) if math.isfinite(t) else 1.0
        out.append(ParamEstimate(str(label), mean, se, t, dist.t_two_sided_p(t, n - 1),
                                 mean - tcrit * se, mean + tcrit * se, eta))
    return out


def param_estimates(m, alpha=0.05):
    cols = column_summary(m)
    return param_estimates_from_summary([c.mean for c in cols], [c.sd for c in cols],
                                        cols[0].n, [c.label for c in cols], alpha)


def between_intercept(m):
    """Intercept test on the unscaled subject means."""
    m = as_matrix(m)
    n = m.n
    if n < 2:
        raise InsufficientDataError("intercept test needs at least two subjects")
    z = m.values.mean(axis=1)
    zbar = float(z.mean())
    ss = n * zbar * zbar
    ss_e = float(((z - zbar) ** 2).sum())
    ms, ms_e, f, p = _f_test(ss, 1, ss_e, n - 1)
    eta = ss / (ss + ss_e) if ss + ss_e > 0 else 0.0
    return InterceptResult(ss, 1, ms, ss_e, n - 1, ms_e, f, p, eta)


@dataclass
class AnovaSuite:
    """Every table of the analysis for one subject matrix."""

    matrix: SubjectMatrix
    summary: list
    sphericity: SphericityResult
    within: WithinSubjectsResult
    contrasts: list
    multivariate: MultivariateResult | None
    pairwise: list
    estimates: list
    intercept: InterceptResult
    notes: list = field(default_factory=list)


def analyze(m, alpha=0.05):
    m = as_matrix(m)
    notes = []
    spher = sphericity(m)
    if spher.degenerate:
        notes.append("sphericity: degenerate contrast covariance")
    within = within_subjects(m, spher)
    if within.degenerate:
        notes.append("within-subjects: zero error sum of squares")
    try:
        multi = multivariate(m)
    except (SingularMatrixError, InsufficientDataError) as exc:
        multi = None
        notes.append(f"multivariate: {exc}")
    con = contrasts(m)
    if any(c.degenerate for c in con):
        notes.append("contrasts: zero-variance differences with nonzero mean")
    return AnovaSuite(m, column_summary(m), spher, within, con, multi,
                      pairwise(m, alpha), param_estimates(m, alpha), between_intercept(m), notes)
