"""
Arrival and service curves used by the FIFO analyses.

Time is in seconds and data in bits.  All curves are wide-sense increasing
functions of time that vanish at ``t = 0``; arrival curves may jump right
after zero (the burst).  ``math.inf`` is used as an absorbing value: a
deviation that cannot be bounded is reported as ``INF`` rather than raised.

>>> h_dev(TokenBucket(1.0, 1.0), RateLatency(2.0, 1.0))
1.5
>>> v_dev(TokenBucket(1.0, 1.0), RateLatency(2.0, 1.0))
2.0
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence, Union

INF = math.inf

_EPS = 1e-12


def _check_value(name: str, value: float, allow_inf: bool = False) -> float:
    value = float(value)
    if math.isnan(value):
        raise ValueError("%s is NaN" % name)
    if value < 0:
        raise ValueError("%s must be non-negative, got %r" % (name, value))
    if math.isinf(value) and not allow_inf:
        raise ValueError("%s must be finite" % name)
    return value


def _mul(a: float, b: float) -> float:
    """Product where ``0 * inf`` is 0 and any other infinity is absorbing."""
    if a == 0 or b == 0:
        return 0.0
    return a * b


@dataclass(frozen=True)
class TokenBucket:
    """
    Token-bucket arrival curve :math:`\\gamma_{b,r}(t) = b + rt` for
    :math:`t > 0` and 0 at :math:`t = 0`.

    An infinite burst encodes an arrival curve that could not be bounded.

    :param burst: burst ``b`` in bits
    :type burst: float
    :param rate: long-term rate ``r`` in bits per second
    :type rate: float
    """
    burst: float
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "burst", _check_value("burst", self.burst, allow_inf=True))
        object.__setattr__(self, "rate", _check_value("rate", self.rate))

    def __call__(self, t: float) -> float:
        if t <= 0:
            return 0.0
        return self.burst + self.rate * t

    @property
    def is_finite(self) -> bool:
        return not math.isinf(self.burst)

    def to_pl(self) -> "ConcavePL":
        return ConcavePL(((0.0, self.burst),), self.rate)


@dataclass(frozen=True)
class RateLatency:
    """
    Rate-latency service curve :math:`\\beta_{R,T}(t) = R(t-T)_+`.

    :param rate: service rate ``R`` in bits per second, may be ``INF``
    :type rate: float
    :param latency: latency ``T`` in seconds
    :type latency: float
    """
    rate: float
    latency: float

    def __post_init__(self):
        object.__setattr__(self, "rate", _check_value("rate", self.rate, allow_inf=True))
        object.__setattr__(self, "latency", _check_value("latency", self.latency))
        if self.rate == 0:
            raise ValueError("service rate must be positive")

    def __call__(self, t: float) -> float:
        if t <= self.latency:
            return 0.0
        return self.rate * (t - self.latency)


@dataclass(frozen=True)
class PureDelay:
    """Pure delay :math:`\\delta_d`: 0 up to ``d`` and infinite after."""
    delay: float

    def __post_init__(self):
        object.__setattr__(self, "delay", _check_value("delay", self.delay))

    def __call__(self, t: float) -> float:
        return 0.0 if t <= self.delay else INF


class ConcavePL:
    """
    Concave piecewise-linear arrival curve.

    The curve is 0 at ``t = 0``.  For ``t > 0`` it is the linear
    interpolation of ``points`` (the first point is at ``t = 0`` and gives the
    right limit, i.e. the burst), continued after the last point with
    ``final_slope``.

    >>> c = ConcavePL.min_of(TokenBucket(0, 4), TokenBucket(2, 2))
    >>> c.points, c.final_slope
    (((0.0, 0.0), (1.0, 4.0)), 2.0)
    >>> c(0.5), c(2.0)
    (2.0, 6.0)

    :param points: breakpoints ``(t_k, y_k)`` with ``t_0 = 0``
    :type points: sequence of pairs
    :param final_slope: slope after the last breakpoint
    :type final_slope: float
    """
    __slots__ = ("points", "final_slope", "_ts")

    def __init__(self, points: Sequence[tuple], final_slope: float):
        pts = tuple((float(t), float(y)) for t, y in points)
        if not pts or pts[0][0] != 0.0:
            raise ValueError("first breakpoint must be at t = 0")
        for (t1, _), (t2, _) in zip(pts, pts[1:]):
            if not t2 > t1:
                raise ValueError("breakpoints must be strictly increasing in t")
        if pts[0][1] < 0 or math.isnan(pts[0][1]):
            raise ValueError("value at 0+ must be non-negative")
        final_slope = _check_value("final_slope", final_slope)
        slopes = [(y2 - y1) / (t2 - t1) for (t1, y1), (t2, y2) in zip(pts, pts[1:])]
        slopes.append(final_slope)
        for s1, s2 in zip(slopes, slopes[1:]):
            if s2 > s1 * (1 + 1e-9) + 1e-9:
                raise ValueError("curve is not concave")
        if slopes and min(slopes) < -1e-9:
            raise ValueError("curve must be non-decreasing")
        self.points = pts
        self.final_slope = final_slope
        self._ts = [t for t, _ in pts]

    def __repr__(self):
        return "ConcavePL(%r, %r)" % (self.points, self.final_slope)

    def __eq__(self, other):
        return (isinstance(other, ConcavePL) and self.points == other.points
                and self.final_slope == other.final_slope)

    def __hash__(self):
        return hash((self.points, self.final_slope))

    @property
    def burst(self) -> float:
        return self.points[0][1]

    def slopes(self) -> list:
        out = [(y2 - y1) / (t2 - t1) for (t1, y1), (t2, y2) in zip(self.points, self.points[1:])]
        out.append(self.final_slope)
        return out

    def __call__(self, t: float) -> float:
        if t <= 0:
            return 0.0
        return self._right_value(t)

    def _right_value(self, t: float) -> float:
        """Value at ``t`` using the right limit at 0."""
        k = bisect.bisect_right(self._ts, t) - 1
        t0, y0 = self.points[k]
        if k + 1 < len(self.points):
            t1, y1 = self.points[k + 1]
            return y0 + (y1 - y0) * (t - t0) / (t1 - t0)
        return y0 + self.final_slope * (t - t0)

    @staticmethod
    def _normalised(points, final_slope) -> "ConcavePL":
        pts = [points[0]]
        for k in range(1, len(points)):
            t, y = points[k]
            if k + 1 < len(points):
                tn, yn = points[k + 1]
                s_next = (yn - y) / (tn - t)
            else:
                s_next = final_slope
            tp, yp = pts[-1]
            s_prev = (y - yp) / (t - tp)
            # collinear points, or a kink that only rounding made convex
            if s_prev - s_next <= 1e-12 * max(1.0, abs(s_prev)):
                continue
            pts.append((t, y))
        return ConcavePL(pts, final_slope)

    @staticmethod
    def sum_of(*curves: "CurveLike") -> "ConcavePL":
        """Pointwise sum of concave curves (a concave curve)."""
        cs = [as_concave(c) for c in curves]
        if not cs:
            return ConcavePL(((0.0, 0.0),), 0.0)
        ts = sorted({t for c in cs for t in c._ts})
        pts = [(t, sum(c._right_value(t) for c in cs)) for t in ts]
        return ConcavePL._normalised(pts, sum(c.final_slope for c in cs))

    @staticmethod
    def min_of(*curves: "CurveLike") -> "ConcavePL":
        """Pointwise minimum of concave curves (a concave curve)."""
        cs = [as_concave(c) for c in curves]
        if not cs:
            raise ValueError("min_of needs at least one curve")
        result = cs[0]
        for c in cs[1:]:
            result = _min2(result, c)
        return result


CurveLike = Union[TokenBucket, ConcavePL]


def as_concave(curve: CurveLike) -> ConcavePL:
    if isinstance(curve, ConcavePL):
        return curve
    if isinstance(curve, TokenBucket):
        if not curve.is_finite:
            raise ValueError("cannot build a piecewise-linear curve with infinite burst")
        return curve.to_pl()
    raise TypeError("unsupported curve type %r" % type(curve).__name__)


def _min2(a: ConcavePL, b: ConcavePL) -> ConcavePL:
    ts = sorted(set(a._ts) | set(b._ts))
    cand = set(ts)
    # crossings inside each interval, including the final ray
    bounds = ts + [INF]
    for lo, hi in zip(bounds, bounds[1:]):
        fa, fb = a._right_value(lo), b._right_value(lo)
        if math.isinf(hi):
            sa, sb = _slope_after(a, lo), _slope_after(b, lo)
        else:
            sa = (a._right_value(hi) - fa) / (hi - lo)
            sb = (b._right_value(hi) - fb) / (hi - lo)
        if sa != sb:
            tc = lo + (fb - fa) / (sa - sb)
            tol = _EPS * max(abs(lo), 0.0 if math.isinf(hi) else abs(hi), abs(tc))
            if lo + tol < tc < hi - tol:
                cand.add(tc)
    ts = sorted(cand)
    pts = [(t, min(a._right_value(t), b._right_value(t))) for t in ts]
    last = ts[-1]
    final = min(a.final_slope, b.final_slope)
    if a._right_value(last) < b._right_value(last) - _EPS * max(1.0, abs(b._right_value(last))):
        final = _slope_after(a, last)
    elif b._right_value(last) < a._right_value(last) - _EPS * max(1.0, abs(a._right_value(last))):
        final = _slope_after(b, last)
    return ConcavePL._normalised(pts, final)


def _slope_after(c: ConcavePL, t: float) -> float:
    k = bisect.bisect_right(c._ts, t) - 1
    if k + 1 < len(c.points):
        (t0, y0), (t1, y1) = c.points[k], c.points[k + 1]
        return (y1 - y0) / (t1 - t0)
    return c.final_slope


def sum_curves(*curves: CurveLike) -> CurveLike:
    """
    Sum of arrival curves.  The sum of token buckets stays a token bucket,
    anything else becomes a :class:`ConcavePL`.  Infinite bursts absorb.
    """
    if not curves:
        return TokenBucket(0.0, 0.0)
    if all(isinstance(c, TokenBucket) for c in curves):
        return TokenBucket(sum(c.burst for c in curves), sum(c.rate for c in curves))
    if any(isinstance(c, TokenBucket) and not c.is_finite for c in curves):
        return TokenBucket(INF, sum(_long_rate(c) for c in curves))
    return ConcavePL.sum_of(*curves)


def min_concave(*curves: CurveLike) -> CurveLike:
    """Pointwise minimum of concave arrival curves; infinite ones are neutral."""
    finite = [c for c in curves if not (isinstance(c, TokenBucket) and not c.is_finite)]
    if not finite:
        return TokenBucket(INF, min(c.rate for c in curves))
    if len(finite) == 1:
        return finite[0]
    return ConcavePL.min_of(*finite)


def _long_rate(c: CurveLike) -> float:
    return c.rate if isinstance(c, TokenBucket) else c.final_slope


def conv_rate_latency(b1: RateLatency, b2: RateLatency) -> RateLatency:
    """
    Min-plus convolution of two rate-latency curves.

    >>> conv_rate_latency(RateLatency(2, 1), RateLatency(3, 0.5))
    RateLatency(rate=2.0, latency=1.5)
    """
    return RateLatency(min(b1.rate, b2.rate), b1.latency + b2.latency)


def deconv_tb_rl(alpha: TokenBucket, beta: RateLatency) -> TokenBucket:
    """
    Output arrival curve :math:`\\gamma_{b,r} \\oslash \\beta_{R,T} =
    \\gamma_{b+rT,r}`.  When ``r > R`` the burst is infinite.

    :rtype: TokenBucket
    """
    if alpha.rate > beta.rate:
        return TokenBucket(INF, alpha.rate)
    return TokenBucket(alpha.burst + _mul(alpha.rate, beta.latency), alpha.rate)


def deconv_delay(alpha: TokenBucket, d: float) -> TokenBucket:
    """Output arrival curve after a delay bounded by ``d``: :math:`\\gamma_{b+rd,r}`."""
    return TokenBucket(alpha.burst + _mul(alpha.rate, d), alpha.rate)


def h_dev(alpha: CurveLike, beta: RateLatency) -> float:
    """
    Horizontal deviation between a concave arrival curve and a rate-latency
    service curve, i.e. the FIFO delay bound.

    It is :math:`T + \\max_k (\\alpha(t_k) - R t_k)_+ / R` over the
    breakpoints of ``alpha``; ``INF`` if the long-term rate exceeds ``R``
    and 0 for the null curve.

    :param alpha: arrival curve
    :type alpha: TokenBucket or ConcavePL
    :param beta: service curve
    :type beta: RateLatency
    :rtype: float
    """
    if isinstance(alpha, TokenBucket):
        if not alpha.is_finite or alpha.rate > beta.rate:
            return INF
        if alpha.burst == 0 and alpha.rate == 0:
            return 0.0
        if math.isinf(beta.rate):
            return beta.latency
        return beta.latency + alpha.burst / beta.rate
    if alpha.final_slope > beta.rate:
        return INF
    if alpha.final_slope == 0 and all(y == 0 for _, y in alpha.points):
        return 0.0
    if math.isinf(beta.rate):
        return beta.latency
    best = max(max(y - beta.rate * t, 0.0) for t, y in alpha.points)
    return beta.latency + best / beta.rate


def v_dev(alpha: CurveLike, beta: RateLatency) -> float:
    """
    Vertical deviation (backlog bound); :math:`b + rT` for a token bucket.

    :rtype: float
    """
    if isinstance(alpha, TokenBucket):
        if not alpha.is_finite or alpha.rate > beta.rate:
            return INF
        return alpha.burst + _mul(alpha.rate, beta.latency)
    if alpha.final_slope > beta.rate:
        return INF
    cand = [t for t, _ in alpha.points] + [beta.latency]
    return max(alpha._right_value(t) - beta(t) for t in cand)
