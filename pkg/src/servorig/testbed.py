"""Rig simulation: stepped servo, wear, quadrature encoder and logging.

A campaign cycles the command schedule. Every command is turned into an
achieved shaft angle by the wear model, the servo walks there in one-degree
steps (each costing ``step_period_ms`` of simulated time), and the encoder
decodes the shaft motion into a signed counter that is logged when the
command completes.
"""
from __future__ import annotations

import bisect
import hashlib
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from servorig import kernels
from servorig.errors import CalibrationIncomplete, CommandRejected, ConfigurationError

LOG_HEADER = ("cycle", "sim_time_ms", "commanded_deg", "encoder_counts")
DEFAULT_STEP_MS = 232
DEFAULT_PPR = 1024


@dataclass(frozen=True)
class ServoState:
    current_deg: int = 0
    commanded_deg: int = 0
    step_period_ms: float = DEFAULT_STEP_MS
    cycle_count: int = 0

    def __post_init__(self):
        if self.step_period_ms <= 0:
            raise ConfigurationError("step_period_ms must be positive")


def step_servo(state, target_deg):
    """Walk the servo to ``target_deg`` one degree at a time.

    Returns ``(new_state, angles, elapsed_ms)`` where ``angles`` lists the
    position after each step. Completing the command increments
    ``cycle_count`` exactly once.
    """
    if not isinstance(target_deg, (int, np.integer)) or abs(target_deg) > 90:
        raise CommandRejected(f"command {target_deg!r} outside [-90, 90] whole degrees")
    target = int(target_deg)
    direction = 1 if target > state.current_deg else -1
    angles = list(range(state.current_deg + direction, target + direction, direction)) \
        if target != state.current_deg else []
    elapsed = len(angles) * state.step_period_ms
    new = replace(state, current_deg=target, commanded_deg=target,
                  cycle_count=state.cycle_count + 1)
    return new, angles, elapsed


@dataclass(frozen=True)
class WearModel:
    """Gain drift with an asymmetry between positive and negative commands.

    ``achieved = commanded * (1 + alpha * cycle)`` for positive commands,
    ``commanded * (1 + beta * alpha * cycle)`` for negative ones, plus
    Gaussian jitter, clamped to +/-90 degrees. The jitter for a cycle is
    drawn from a generator seeded by ``(seed, cycle)``, so it depends only
    on those two numbers.
    """

    alpha: float = 1e-6
    beta: float = 0.0
    noise_sd_deg: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"wear beta must lie in [0, 1], got {self.beta}")
        if self.noise_sd_deg < 0:
            raise ConfigurationError("noise_sd_deg must be non-negative")

    def noise(self, cycle):
        if self.noise_sd_deg == 0:
            return 0.0
        rng = np.random.default_rng([self.seed, int(cycle)])
        return self.noise_sd_deg * float(rng.standard_normal())


PRISTINE = WearModel(alpha=0.0, beta=0.0, noise_sd_deg=0.0)


def apply_wear(model, commanded_deg, cycle_count):
    gain = model.alpha * cycle_count
    if commanded_deg < 0:
        gain *= model.beta
    achieved = commanded_deg * (1.0 + gain) + model.noise(cycle_count)
    return min(90.0, max(-90.0, achieved))


@dataclass(frozen=True)
class EncoderState:
    ppr: int = DEFAULT_PPR
    counter: int = 0
    a_level: int = 0
    b_level: int = 1
    shaft_deg: float = 0.0

    @property
    def quantum_deg(self):
        """Shaft travel between consecutive channel-A edges."""
        return 360.0 / (2 * self.ppr)

    @property
    def counts_per_degree(self):
        return 2 * self.ppr / 360.0

    @classmethod
    def at(cls, shaft_deg=0.0, ppr=DEFAULT_PPR, counter=0):
        q = 360.0 / (2 * ppr)
        a, b = kernels.channel_levels(shaft_deg, q)
        return cls(ppr, counter, a, b, float(shaft_deg))


def drive_encoder(enc, trajectory):
    """Feed sampled shaft angles through the channel-A edge decoder."""
    q = enc.quantum_deg
    edge = kernels.edge_index(enc.shaft_deg, q)
    pts = [float(x) for x in trajectory]
    counter, _ = kernels.drive_path(enc.counter, edge, pts, q)
    last = pts[-1] if pts else enc.shaft_deg
    a, b = kernels.channel_levels(last, q)
    return replace(enc, counter=int(counter), a_level=a, b_level=b, shaft_deg=last), int(counter)


def move_encoder(enc, target_deg, n_steps=1):
    """Linear move to ``target_deg`` with automatic sub-stepping."""
    q = enc.quantum_deg
    edge = kernels.edge_index(enc.shaft_deg, q)
    counter, _ = kernels.drive_linear(enc.counter, edge, enc.shaft_deg, float(target_deg),
                                      max(1, int(n_steps)), q)
    a, b = kernels.channel_levels(target_deg, q)
    return replace(enc, counter=int(counter), a_level=a, b_level=b,
                   shaft_deg=float(target_deg)), int(counter)


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    sim_time_ms: float
    commanded_deg: int
    encoder_counts: int


class CampaignLog:
    """Column store of cycle records; iterates as ``CycleRecord``."""

    def __init__(self, cycle, sim_time_ms, commanded_deg, encoder_counts, steps=None):
        self.cycle = np.asarray(cycle, dtype=np.int64)
        self.sim_time_ms = np.asarray(sim_time_ms, dtype=np.int64)
        self.commanded_deg = np.asarray(commanded_deg, dtype=np.int64)
        self.encoder_counts = np.asarray(encoder_counts, dtype=np.int64)
        self.steps = None if steps is None else np.asarray(steps, dtype=np.int64)

    def __len__(self):
        return len(self.cycle)

    def __iter__(self):
        for row in zip(self.cycle.tolist(), self.sim_time_ms.tolist(),
                       self.commanded_deg.tolist(), self.encoder_counts.tolist()):
            yield CycleRecord(*row)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return CampaignLog(self.cycle[i], self.sim_time_ms[i], self.commanded_deg[i],
                               self.encoder_counts[i],
                               None if self.steps is None else self.steps[i])
        return CycleRecord(int(self.cycle[i]), int(self.sim_time_ms[i]),
                           int(self.commanded_deg[i]), int(self.encoder_counts[i]))

    @property
    def total_time_ms(self):
        return int(self.sim_time_ms[-1]) if len(self) else 0

    def write_csv(self, stream):
        stream.write(",".join(LOG_HEADER) + "\n")
        rows = np.column_stack([self.cycle, self.sim_time_ms, self.commanded_deg,
                                self.encoder_counts])
        buf = io.StringIO()
        np.savetxt(buf, rows, fmt="%d", delimiter=",", newline="\n")
        stream.write(buf.getvalue())

    def to_csv(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def checksum(self):
        return hashlib.sha256(self.to_csv().encode()).hexdigest()

    @classmethod
    def read_csv(cls, stream):
        header = stream.readline().strip()
        if tuple(h.strip() for h in header.split(",")) != LOG_HEADER:
            raise ConfigurationError(
                f"log header must be {','.join(LOG_HEADER)!r}, got {header!r}")
        body = stream.read()
        if not body.strip():
            return cls([], [], [], [])
        data = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)
        if data.shape[1] != 4:
            raise ConfigurationError(f"log rows must have 4 columns, got {data.shape[1]}")
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def _schedule_positions(schedule):
    return np.asarray(getattr(schedule, "positions", schedule), dtype=np.int64)


def achieved_angles(wear, commanded, cycles):
    """Vectorised ``apply_wear`` over a command sequence."""
    commanded = np.asarray(commanded, dtype=float)
    cycles = np.asarray(cycles, dtype=float)
    gain = wear.alpha * cycles
    gain = np.where(commanded < 0, gain * wear.beta, gain)
    noise = np.array([wear.noise(c) for c in cycles.astype(np.int64)]) \
        if wear.noise_sd_deg else np.zeros_like(commanded)
    return np.clip(commanded * (1.0 + gain) + noise, -90.0, 90.0)


def run_campaign(schedule, total_cycles, wear=PRISTINE, ppr=DEFAULT_PPR,
                 step_period_ms=DEFAULT_STEP_MS, seed=None):
    """Cycle the schedule ``total_cycles`` times and log every completion.

    ``seed`` overrides ``wear.seed`` when given. The servo and shaft start
    at 0 degrees with the counter at 0.
    """
    positions = _schedule_positions(schedule)
    if total_cycles < 0:
        raise ConfigurationError("total_cycles must be non-negative")
    if len(positions) == 0:
        raise ConfigurationError("schedule is empty")
    if np.any(np.abs(positions) > 90):
        raise CommandRejected("schedule holds commands outside [-90, 90]")
    if step_period_ms <= 0 or ppr <= 0:
        raise ConfigurationError("step_period_ms and ppr must be positive")
    if seed is not None:
        wear = replace(wear, seed=seed)
    cycles = np.arange(total_cycles, dtype=np.int64)
    commanded = positions[cycles % len(positions)]
    achieved = achieved_angles(wear, commanded, cycles)
    quantum = 360.0 / (2 * ppr)
    counts, steps = kernels.campaign(commanded, achieved, quantum)
    steps = np.asarray(steps, dtype=np.int64)
    sim_time = np.cumsum(steps * step_period_ms)
    return CampaignLog(cycles, np.rint(sim_time).astype(np.int64), commanded,
                       np.asarray(counts, dtype=np.int64), steps)


@dataclass(frozen=True)
class CalibrationTable:
    anchors: dict  # commanded_deg -> baseline counts

    def __post_init__(self):
        object.__setattr__(self, "anchors", dict(sorted(self.anchors.items())))

    def counts_to_deg(self, counts):
        """Piecewise-linear inverse of the anchor map, extrapolated at the ends."""
        degs = list(self.anchors)
        cts = [self.anchors[d] for d in degs]
        if len(degs) == 1:
            return float(degs[0]) if counts == cts[0] else float(degs[0]) + \
                (counts - cts[0]) * 360.0 / (2 * DEFAULT_PPR)
        i = bisect.bisect_left(cts, counts)
        i = min(max(i, 1), len(cts) - 1)
        c0, c1 = cts[i - 1], cts[i]
        d0, d1 = degs[i - 1], degs[i]
        return d0 + (counts - c0) * (d1 - d0) / (c1 - c0)

    def is_monotone(self):
        vals = list(self.anchors.values())
        return all(b > a for a, b in zip(vals, vals[1:]))


def calibrate(first_pass, expected_positions=None):
    """Anchor each scheduled position at its first logged counter value."""
    anchors = {}
    for rec in first_pass:
        anchors.setdefault(int(rec.commanded_deg), int(rec.encoder_counts))
    if expected_positions is not None:
        missing = set(int(p) for p in expected_positions) - set(anchors)
        if missing:
            raise CalibrationIncomplete(missing)
    if not anchors:
        raise CalibrationIncomplete(set(expected_positions or ()))
    return CalibrationTable(anchors)


def calibrated_errors(log, schedule):
    """Per-cycle ``counts_to_deg(counts) - commanded`` after first-pass calibration."""
    positions = _schedule_positions(schedule)
    table = calibrate(log[: len(positions)], expected_positions=positions)
    return np.array([table.counts_to_deg(c) - d
                     for d, c in zip(log.commanded_deg.tolist(), log.encoder_counts.tolist())])


def simulated_hours(log):
    return log.total_time_ms / 3_600_000.0


def pacing_seconds_per_command(log):
    return (log.total_time_ms / 1000.0) / len(log) if len(log) else math.nan
