# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled encoder kernels; mirrors ``_pykernels`` exactly."""
from libc.math cimport floor, ceil, fabs

import numpy as np

from servorig.errors import SamplingDensityError


cpdef long long edge_index(double angle, double quantum):
    return <long long>floor(angle / quantum)


def channel_levels(double angle, double quantum):
    cdef long long a = (<long long>floor(angle / quantum)) & 1
    cdef long long b = (<long long>floor(angle / quantum - 0.5)) & 1
    return int(a), int(b)


cdef inline int _decode(double x, double quantum, long long *counter,
                        long long *edge) except -1:
    cdef long long e = <long long>floor(x / quantum)
    cdef long long de = e - edge[0]
    cdef long long a, b
    if de == 0:
        return 0
    if de > 1 or de < -1:
        raise SamplingDensityError(
            f"shaft moved across {abs(de)} encoder edges between samples at {x!r} deg"
        )
    a = e & 1
    b = (<long long>floor(x / quantum - 0.5)) & 1
    if b != a:
        counter[0] += 1
    else:
        counter[0] -= 1
    edge[0] = e
    return 0


def drive_path(long long counter, long long edge, angles, double quantum):
    cdef double x
    for x in angles:
        _decode(x, quantum, &counter, &edge)
    return counter, edge


cdef int _linear(long long *counter, long long *edge, double x0, double x1,
                 long long n_seg, double quantum) except -1:
    cdef double span, per_seg, x
    cdef long long sub, total, s
    if n_seg < 1:
        n_seg = 1
    span = x1 - x0
    per_seg = fabs(span) / n_seg
    sub = <long long>ceil(per_seg / (0.5 * quantum))
    if sub < 1:
        sub = 1
    total = n_seg * sub
    for s in range(1, total + 1):
        if s == total:
            x = x1
        else:
            x = x0 + span * s / total
        _decode(x, quantum, counter, edge)
    return 0


def drive_linear(long long counter, long long edge, double x0, double x1,
                 long long n_seg, double quantum):
    _linear(&counter, &edge, x0, x1, n_seg, quantum)
    return counter, edge


def campaign(commanded, achieved, double quantum, long long start_cmd=0,
             double start_deg=0.0, long long start_counter=0):
    cdef long long[:] cmd_v = np.ascontiguousarray(commanded, dtype=np.int64)
    cdef double[:] ach_v = np.ascontiguousarray(achieved, dtype=np.float64)
    cdef Py_ssize_t n = cmd_v.shape[0]
    counts_arr = np.zeros(n, dtype=np.int64)
    steps_arr = np.zeros(n, dtype=np.int64)
    cdef long long[:] counts = counts_arr
    cdef long long[:] steps = steps_arr
    cdef long long counter = start_counter
    cdef long long edge = <long long>floor(start_deg / quantum)
    cdef long long prev_cmd = start_cmd
    cdef double prev_x = start_deg
    cdef long long k
    cdef Py_ssize_t i
    for i in range(n):
        k = cmd_v[i] - prev_cmd
        if k < 0:
            k = -k
        _linear(&counter, &edge, prev_x, ach_v[i], k, quantum)
        counts[i] = counter
        steps[i] = k
        prev_cmd = cmd_v[i]
        prev_x = ach_v[i]
    return counts_arr, steps_arr
