"""Reference data from the published rig study and generators built on it.

The original recorder file and rig log are not public, so this module
regenerates stand-ins with the published shape:

* ``FLIGHT_SCHEDULE`` - the 119 whole-degree commands the rig cycled through.
* ``synthetic_fdr`` - a 7854-row recorder file whose sign groups have the
  published sizes (1095 negative, 6557 positive) and whose per-position
  frequencies follow ``FLIGHT_SCHEDULE`` within each sign.
* ``reconstructed_matrix`` - a 48 x 3 subject matrix whose column means and
  standard deviations and whose adjacent/outer difference variances equal
  the published summaries exactly, so every moment-based ANOVA statistic
  is pinned down.
"""
from __future__ import annotations

import io
import random
from collections import Counter

import numpy as np

from servorig.fdr import FINE_UNITS_MAX, FdrEntry, round_half_away, write_fdr

FLIGHT_SCHEDULE = (
    4, -11, 13, -11, 32, 15, 7, 17, 23, 14, 3, 11, 11, 11, 10, 17, -1, -11, 18, 6,
    25, -10, 25, 20, 11, 10, 7, -24, 7, 37, 8, 14, -18, -14, 10, 11, -4, 17, 35, 6,
    3, 14, 28, 17, 34, -6, 11, -30, 4, 13, 17, 21, 11, 15, -20, -1, 24, 20, 6, -11,
    14, 13, 24, -25, 21, 8, -13, 23, 14, -15, 3, 14, 17, 30, 31, 15, -28, 14, -11, 15,
    1, 27, 13, -8, 8, -3, -7, 10, 8, 10, 7, 18, 27, 14, 20, 8, 4, 13, 15, -17,
    23, -11, -3, 18, 8, 20, 13, -21, 6, -27, -23, 21, 15, 13, 10, 13, 28, 15, 7,
)

# recorder quantization: positions are multiples of 512 fine units
FDR_UNIT_STEP = 512

FDR_ROWS = 7854
NEGATIVE_COUNT = 1095
POSITIVE_COUNT = 6557

PERIOD_MEANS = (54.3347, 59.9299, 66.6863)
PERIOD_SDS = (44.81194, 50.30706, 55.13150)
SUBJECTS = 48
# sample variances of period differences (1-2, 2-3, 1-3)
DIFF_VARIANCES = {(0, 1): 54.662, (1, 2): 224.155, (0, 2): 245.42}


def _level_for_position(pos):
    for m in range(-63, 64):
        deg = m * FDR_UNIT_STEP / FINE_UNITS_MAX * 90.0
        if round_half_away(deg) == pos:
            return m
    raise ValueError(f"no recorder level rounds to {pos} deg")


def _apportion(weights, total):
    """Largest-remainder integer apportionment of ``total`` by ``weights``."""
    keys = sorted(weights)
    wsum = sum(weights[k] for k in keys)
    raw = {k: weights[k] * total / wsum for k in keys}
    out = {k: int(raw[k]) for k in keys}
    short = total - sum(out.values())
    order = sorted(keys, key=lambda k: (-(raw[k] - out[k]), k))
    for k in order[:short]:
        out[k] += 1
    return out


def synthetic_level_counts():
    """Recorder level (multiple of 512 units) -> number of rows."""
    mult = Counter(FLIGHT_SCHEDULE)
    neg = _apportion({p: c for p, c in mult.items() if p < 0}, NEGATIVE_COUNT)
    pos = _apportion({p: c for p, c in mult.items() if p > 0}, POSITIVE_COUNT)
    counts = {0: FDR_ROWS - NEGATIVE_COUNT - POSITIVE_COUNT}
    for p, c in {**neg, **pos}.items():
        counts[_level_for_position(p)] = c
    return dict(sorted(counts.items()))


def synthetic_fdr_entries(seed=0, rate_hz=5.0):
    rows = []
    for level, count in synthetic_level_counts().items():
        rows.extend([level * FDR_UNIT_STEP] * count)
    random.Random(seed).shuffle(rows)
    return [FdrEntry(i, i / rate_hz, u) for i, u in enumerate(rows)]


def synthetic_fdr(seed=0, bad_rows=0):
    """Recorder text shaped like the study's flight log.

    ``bad_rows`` appends that many out-of-range rows, which a parser must
    reject.
    """
    buf = io.StringIO()
    entries = synthetic_fdr_entries(seed)
    write_fdr(entries, buf)
    for j in range(bad_rows):
        buf.write(f"{len(entries) + j},{(len(entries) + j) / 5.0!r},40000\n")
    return buf.getvalue()


def period_covariance():
    """Covariance of the three period columns implied by the summaries."""
    sd = np.asarray(PERIOD_SDS)
    k = len(sd)
    cov = np.diag(sd ** 2)
    for (i, j), v in DIFF_VARIANCES.items():
        cov[i, j] = cov[j, i] = (sd[i] ** 2 + sd[j] ** 2 - v) / 2.0
    assert k == 3
    return cov


def reconstructed_matrix(seed=2019):
    """Deterministic 48 x 3 matrix with the published moments.

    Random normals are centred and whitened to an exact identity sample
    covariance, then coloured with the Cholesky factor of
    ``period_covariance()`` and shifted to ``PERIOD_MEANS``. Rows are then
    ordered by their mean so that row labels (recorded positions, ascending)
    read like encoder counts rising with commanded angle.
    """
    from servorig.anova import SubjectMatrix

    rng = np.random.default_rng(seed)
    n, k = SUBJECTS, len(PERIOD_MEANS)
    x = rng.standard_normal((n, k))
    x -= x.mean(axis=0)
    c = np.cov(x, rowvar=False)
    w = np.linalg.cholesky(c)
    z = np.linalg.solve(w, x.T).T
    y = z @ np.linalg.cholesky(period_covariance()).T + np.asarray(PERIOD_MEANS)
    y = y[np.argsort(y.mean(axis=1), kind="stable")]
    labels = tuple(sorted(set(FLIGHT_SCHEDULE) | {0}))
    return SubjectMatrix(y, row_labels=labels,
                         column_labels=("period_1", "period_2", "period_3"))
