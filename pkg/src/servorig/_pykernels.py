"""Pure-Python encoder kernels.

Same contract as the compiled ``_ckernels`` module; used when the
extension is not built or ``SERVORIG_PURE_PYTHON`` is set.

Channel geometry: with ``quantum = 360 / (2 * ppr)`` degrees, channel A
is ``floor(angle / quantum) mod 2`` and channel B is the same square wave
shifted by half a quantum (a quarter period). Every change of A is
decoded with the rule ``B != A -> +1 else -1``.
"""
import math

from servorig.errors import SamplingDensityError


def edge_index(angle, quantum):
    return math.floor(angle / quantum)


def channel_levels(angle, quantum):
    a = math.floor(angle / quantum) & 1
    b = math.floor(angle / quantum - 0.5) & 1
    return a, b


def drive_path(counter, edge, angles, quantum):
    """Decode channel A edges along sampled shaft angles.

    Returns the updated ``(counter, edge)`` pair where ``edge`` is the
    channel-A edge index of the last sample.
    """
    for x in angles:
        e = math.floor(x / quantum)
        de = e - edge
        if de == 0:
            continue
        if de > 1 or de < -1:
            raise SamplingDensityError(
                f"shaft moved across {abs(de)} encoder edges between samples at {x!r} deg"
            )
        a = e & 1
        b = math.floor(x / quantum - 0.5) & 1
        if b != a:
            counter += 1
        else:
            counter -= 1
        edge = e
    return counter, edge


def drive_linear(counter, edge, x0, x1, n_seg, quantum):
    """Move the shaft linearly from ``x0`` to ``x1`` in ``n_seg`` steps.

    Each step is sub-sampled finely enough that channel A toggles at most
    once between consecutive samples.
    """
    if n_seg < 1:
        n_seg = 1
    span = x1 - x0
    per_seg = abs(span) / n_seg
    sub = max(1, math.ceil(per_seg / (0.5 * quantum)))
    total = n_seg * sub
    for s in range(1, total + 1):
        x = x1 if s == total else x0 + span * s / total
        e = math.floor(x / quantum)
        de = e - edge
        if de == 0:
            continue
        if de > 1 or de < -1:
            raise SamplingDensityError(
                f"shaft moved across {abs(de)} encoder edges between samples at {x!r} deg"
            )
        a = e & 1
        b = math.floor(x / quantum - 0.5) & 1
        counter += 1 if b != a else -1
        edge = e
    return counter, edge


def campaign(commanded, achieved, quantum, start_cmd=0, start_deg=0.0, start_counter=0):
    """Run the encoder over a whole command sequence.

    Returns ``(counts, steps)`` lists: the raw counter at completion of
    each command and the number of one-degree servo steps it took.
    """
    n = len(commanded)
    counts = [0] * n
    steps = [0] * n
    counter = start_counter
    edge = math.floor(start_deg / quantum)
    prev_cmd = start_cmd
    prev_x = start_deg
    for i in range(n):
        cmd = int(commanded[i])
        x = float(achieved[i])
        k = abs(cmd - prev_cmd)
        counter, edge = drive_linear(counter, edge, prev_x, x, k, quantum)
        counts[i] = counter
        steps[i] = k
        prev_cmd = cmd
        prev_x = x
    return counts, steps
