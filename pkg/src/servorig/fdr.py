"""Flight-data-recorder ingestion, deflection statistics and command schedules.

The recorder stores aileron servo position as integer "fine servo units"
in [-32767, 32767]. Those map linearly onto signed deflection degrees
(``units / 32767 * 90``); the servo horn angle is that deflection + 90.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field

from servorig.errors import ConfigurationError, InsufficientDataError

log = logging.getLogger(__name__)

FINE_UNITS_MAX = 32767
DEFLECTION_MAX_DEG = 90.0
SAMPLE_RATE_HZ = 5.0


@dataclass(frozen=True)
class FdrEntry:
    sample_index: int
    time_s: float
    fine_units: int


@dataclass(frozen=True)
class DeflectionSample:
    degrees: float


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    missing: int
    mean: float
    se_mean: float
    median: float
    sd: float
    variance: float
    skewness: float
    se_skewness: float
    kurtosis: float
    se_kurtosis: float
    range: float
    min: float
    max: float
    p25: float
    p50: float
    p75: float

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class CommandSchedule:
    positions: tuple
    source_frequencies: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.positions)

    def multiplicities(self):
        return dict(sorted(Counter(self.positions).items()))


@dataclass
class ParseResult:
    """Valid entries plus per-row diagnostics for rejected rows."""

    entries: list
    rejected: list  # (line_number, reason)

    @property
    def valid_count(self):
        return len(self.entries)

    @property
    def rejected_count(self):
        return len(self.rejected)


# --------------------------------------------------------------------------
# parsing

def parse_fdr(source, units_column="fine_units", time_column=None,
              delimiter=",", sample_rate_hz=SAMPLE_RATE_HZ):
    """Parse delimiter-separated recorder text.

    Parameters
    ----------
    source : str or text stream
        File contents (header row required) or an open text handle.
    units_column : str
        Header name of the fine-servo-units column.
    time_column : str, optional
        Header name of a time column in seconds. When absent, time is
        reconstructed from the row ordinal and ``sample_rate_hz``.

    Returns
    -------
    ParseResult
        Entries are re-indexed consecutively over valid rows; rejected rows
        carry their 1-based line number (header is line 1).
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ConfigurationError("recorder file is empty (header row required)") from None
    if units_column not in header:
        raise ConfigurationError(
            f"column {units_column!r} not found; header has {header}")
    ucol = header.index(units_column)
    tcol = None
    if time_column is not None:
        if time_column not in header:
            raise ConfigurationError(
                f"column {time_column!r} not found; header has {header}")
        tcol = header.index(time_column)

    entries = []
    rejected = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            cell = row[ucol].strip()
        except IndexError:
            rejected.append((lineno, "short row"))
            continue
        try:
            units = int(cell)
        except ValueError:
            rejected.append((lineno, f"non-integer servo units {cell!r}"))
            continue
        if not -FINE_UNITS_MAX <= units <= FINE_UNITS_MAX:
            rejected.append((lineno, f"servo units {units} outside +/-{FINE_UNITS_MAX}"))
            continue
        idx = len(entries)
        if tcol is not None:
            try:
                t = float(row[tcol])
            except (ValueError, IndexError):
                rejected.append((lineno, "bad time cell"))
                continue
        else:
            t = idx / sample_rate_hz
        entries.append(FdrEntry(idx, t, units))

    for lineno, reason in rejected:
        log.debug("line %d rejected: %s", lineno, reason)
    log.info("parsed %d valid rows, rejected %d", len(entries), len(rejected))
    return ParseResult(entries, rejected)


def write_fdr(entries, stream, units_column="fine_units", delimiter=","):
    """Serialize entries in the format ``parse_fdr`` reads."""
    w = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    w.writerow(["sample_index", "time_s", units_column])
    for e in entries:
        w.writerow([e.sample_index, repr(float(e.time_s)), e.fine_units])


def duration_s(entries, sample_rate_hz=SAMPLE_RATE_HZ):
    return len(entries) / sample_rate_hz


# --------------------------------------------------------------------------
# conversion and filtering

def to_deflection(entry):
    units = entry.fine_units if isinstance(entry, FdrEntry) else entry
    return DeflectionSample(units / FINE_UNITS_MAX * DEFLECTION_MAX_DEG)


def filter_outliers(samples):
    return [s for s in samples
            if math.isfinite(s.degrees) and abs(s.degrees) <= DEFLECTION_MAX_DEG]


def split_by_sign(samples):
    """Partition into (negatives, positives); exact zeros fall in neither."""
    neg = [s for s in samples if s.degrees < 0]
    pos = [s for s in samples if s.degrees > 0]
    return neg, pos


# --------------------------------------------------------------------------
# descriptive statistics

def _percentile(sorted_x, p):
    # weighted average at h = (n + 1) p, clamped to the sample extremes
    n = len(sorted_x)
    h = (n + 1) * p
    lo = math.floor(h)
    if lo < 1:
        return sorted_x[0]
    if lo >= n:
        return sorted_x[-1]
    frac = h - lo
    return sorted_x[lo - 1] + frac * (sorted_x[lo] - sorted_x[lo - 1])


def se_skewness(n):
    return math.sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))


def se_kurtosis(n):
    return math.sqrt(4.0 * (n * n - 1) * se_skewness(n) ** 2 / ((n - 3) * (n + 5)))


def describe(samples, missing=0):
    """Summary statistics of a sample of deflections (or plain numbers).

    Skewness and kurtosis are the bias-adjusted estimators
    ``G1 = sqrt(n(n-1))/(n-2) * g1`` and
    ``G2 = (n-1)/((n-2)(n-3)) * ((n+1) g2 + 6)`` (excess kurtosis).
    """
    x = [s.degrees if isinstance(s, DeflectionSample) else float(s) for s in samples]
    n = len(x)
    if n < 4:
        raise InsufficientDataError(f"describe needs at least 4 samples, got {n}")
    mean = math.fsum(x) / n
    dev = [v - mean for v in x]
    m2 = math.fsum(d * d for d in dev) / n
    m3 = math.fsum(d ** 3 for d in dev) / n
    m4 = math.fsum(d ** 4 for d in dev) / n
    var = m2 * n / (n - 1)
    sd = math.sqrt(var)
    if m2 > 0:
        g1 = m3 / m2 ** 1.5
        g2 = m4 / m2 ** 2 - 3.0
        skew = math.sqrt(n * (n - 1)) / (n - 2) * g1
        kurt = (n - 1) / ((n - 2) * (n - 3)) * ((n + 1) * g2 + 6.0)
    else:
        skew = kurt = math.nan
    s = sorted(x)
    return DescriptiveStats(
        n=n, missing=missing, mean=mean, se_mean=sd / math.sqrt(n),
        median=_percentile(s, 0.5), sd=sd, variance=var,
        skewness=skew, se_skewness=se_skewness(n),
        kurtosis=kurt, se_kurtosis=se_kurtosis(n),
        range=s[-1] - s[0], min=s[0], max=s[-1],
        p25=_percentile(s, 0.25), p50=_percentile(s, 0.5), p75=_percentile(s, 0.75),
    )


# --------------------------------------------------------------------------
# schedules

def round_half_away(x):
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def frequency_table(samples):
    """Counts of whole-degree positions, sorted by position."""
    return dict(sorted(Counter(round_half_away(s.degrees) for s in samples).items()))


def build_schedule(samples, target_length=119, min_multiplicity=1, seed=0):
    """Frequency-weighted command list.

    Each distinct whole-degree position is repeated
    ``max(min_multiplicity, round(freq / total * target_length))`` times,
    then the list is shuffled with ``random.Random(seed)``.
    """
    if not samples:
        raise InsufficientDataError("cannot build a schedule from no samples")
    freqs = frequency_table(samples)
    total = sum(freqs.values())
    positions = []
    for pos, count in freqs.items():
        reps = max(min_multiplicity, round_half_away(count / total * target_length))
        positions.extend([pos] * reps)
    random.Random(seed).shuffle(positions)
    return CommandSchedule(tuple(positions), freqs)


def write_positions(samples, stream):
    for s in samples:
        stream.write(f"{s.degrees!r}\n")


def read_positions(stream):
    return [DeflectionSample(float(line)) for line in stream if line.strip()]


def write_schedule(schedule, stream):
    for p in schedule.positions:
        stream.write(f"{p}\n")


def read_schedule(stream):
    positions = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            positions.append(int(line))
        except ValueError:
            raise ConfigurationError(f"schedule line {lineno}: not an integer: {line!r}") from None
    if not positions:
        raise ConfigurationError("schedule file contains no positions")
    bad = [p for p in positions if abs(p) > DEFLECTION_MAX_DEG]
    if bad:
        raise ConfigurationError(f"schedule positions outside +/-90 deg: {sorted(set(bad))}")
    return CommandSchedule(tuple(positions), dict(sorted(Counter(positions).items())))
