"""Tail probabilities and quantiles for the F, chi-square and t distributions.

Everything reduces to the regularized incomplete beta and gamma functions,
evaluated by the modified Lentz continued fraction (and a power series for
the lower gamma when it converges faster).
"""
import math

from servorig.errors import DomainError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x, y=None):
    """Regularized incomplete beta function ``I_x(a, b)``.

    ``y`` may carry ``1 - x`` computed without cancellation by the caller.
    """
    if y is None:
        y = 1.0 - x
    if a <= 0 or b <= 0:
        raise DomainError(f"betainc requires a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"betainc requires 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def _gamma_series(a, x):
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cf(a, x):
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def gammaincc(a, x):
    """Regularized upper incomplete gamma function ``Q(a, x)``."""
    if a <= 0:
        raise DomainError(f"gammaincc requires a > 0, got {a}")
    if x < 0:
        raise DomainError(f"gammaincc requires x >= 0, got {x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def _check_df(*dfs):
    for df in dfs:
        if not (df > 0) or math.isinf(df):
            raise DomainError(f"degrees of freedom must be positive and finite, got {df}")


def f_sf(x, d1, d2):
    """Survival function of the F(d1, d2) distribution."""
    _check_df(d1, d2)
    if math.isnan(x):
        raise DomainError("f_sf of NaN")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    denom = d2 + d1 * x
    return betainc(d2 / 2.0, d1 / 2.0, d2 / denom, d1 * x / denom)


def chi2_sf(x, df):
    """Survival function of the chi-square distribution."""
    _check_df(df)
    if math.isnan(x):
        raise DomainError("chi2_sf of NaN")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return gammaincc(df / 2.0, x / 2.0)


def t_sf(t, df):
    """Survival function ``P(T > t)`` of Student's t."""
    _check_df(df)
    if math.isnan(t):
        raise DomainError("t_sf of NaN")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    denom = df + t * t
    tail = 0.5 * betainc(df / 2.0, 0.5, df / denom, t * t / denom)
    return tail if t >= 0 else 1.0 - tail


def t_cdf(t, df):
    return 1.0 - t_sf(t, df) if t >= 0 else t_sf(-t, df)


def t_two_sided_p(t, df):
    """Two-sided p-value ``P(|T| > |t|)``."""
    if math.isinf(t):
        return 0.0
    return min(1.0, 2.0 * t_sf(abs(t), df))


def t_quantile(q, df):
    """Inverse CDF of Student's t.

    Bisection on the upper tail; the bracket is widened geometrically, so
    the result is accurate to a few ulps regardless of ``df``.
    """
    _check_df(df)
    if not 0.0 < q < 1.0:
        raise DomainError(f"t_quantile requires 0 < q < 1, got {q}")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_quantile(1.0 - q, df)
    target = 1.0 - q
    lo, hi = 0.0, 1.0
    while t_sf(hi, df) > target:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if t_sf(mid, df) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
