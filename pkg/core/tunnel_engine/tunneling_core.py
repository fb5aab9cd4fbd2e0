"""
tunneling_core.py - Closed-form transmission coefficient for range-bound markets

Evaluates the time-independent range-bound model in closed form:

    lambda = r / sigma
    u      = sqrt(1 - (r/sigma) * K^2)                       (barrier parameter)
    T      = exp(-2 * sqrt(r (sigma^2 + r) / sigma^4) * [artanh(u) - u])
    d      = sqrt(sigma / r) - K                             (penetration distance)

K is the distance between resistance and support in the same price units as the
quotes. The model mixes an annualized r/sigma ratio with K in dollars; that is
how the reference event values are computed, so it is implemented literally.

The log term is read as 0.5 * ln((1 + u) / (1 - u)) = artanh(u). The other
placement of the +1/-1 makes the log argument negative for every u < 1.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict

from .exceptions import NoBarrierError

# Equality band on (r/sigma) * K^2 around 1
TURNING_POINT_TOLERANCE = 1e-12

# Below this u the bracket is summed as a power series
_SERIES_CROSSOVER = 0.1

# Float bounds for T on the tunneling side; the exponent itself is never rounded
_T_FLOOR = math.ulp(0.0)
_T_CEILING = math.nextafter(1.0, 0.0)


class Regime(Enum):
    """Position of the range width relative to the turning point sqrt(sigma/r)."""
    TUNNELING = "Tunneling"
    AT_TURNING_POINT = "AtTurningPoint"
    NO_BARRIER = "NoBarrier"


@dataclass(frozen=True)
class MarketParams:
    """Risk-free rate and implied volatility at one instant (annualized fractions)."""
    r: float
    sigma: float

    def __post_init__(self):
        for name in ('r', 'sigma'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value <= 0:
                raise ValueError(f"{name} must be > 0, got {value!r}")

    def scaled(self, c: float) -> 'MarketParams':
        """Return (c*r, c*sigma); lambda is unchanged."""
        return MarketParams(r=self.r * c, sigma=self.sigma * c)

    def to_dict(self) -> Dict[str, Any]:
        return {'r': self.r, 'sigma': self.sigma}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MarketParams':
        return cls(r=data['r'], sigma=data['sigma'])


@dataclass(frozen=True)
class RangeBound:
    """Support/resistance pair. The width K is always derived, never stored."""
    support: float
    resistance: float

    def __post_init__(self):
        if not (math.isfinite(self.support) and math.isfinite(self.resistance)):
            raise ValueError(f"range levels must be finite: {self.support!r}, {self.resistance!r}")
        if self.resistance <= self.support:
            raise ValueError(
                f"resistance ({self.resistance!r}) must be above support ({self.support!r})"
            )

    @property
    def width(self) -> float:
        return self.resistance - self.support

    @property
    def midpoint(self) -> float:
        return (self.resistance + self.support) / 2.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'support': self.support,
            'resistance': self.resistance,
            'width': self.width,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RangeBound':
        return cls(support=data['support'], resistance=data['resistance'])


@dataclass(frozen=True)
class TunnelEvaluation:
    """Everything computed for one (r, sigma, K)."""
    lambda_: float
    u: float
    exponent: float
    T: float
    d: float
    regime: Regime

    @property
    def log_T(self) -> float:
        """ln T. Exact even where the float T is pinned next to 0 or 1."""
        return -self.exponent

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lambda': self.lambda_,
            'u': self.u,
            'exponent': self.exponent,
            'T': self.T,
            'd': self.d,
            'regime': self.regime.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TunnelEvaluation':
        return cls(
            lambda_=data['lambda'],
            u=data['u'],
            exponent=data['exponent'],
            T=data['T'],
            d=data['d'],
            regime=Regime(data['regime']),
        )


def lambda_ratio(params: MarketParams) -> float:
    """lambda = r / sigma."""
    return params.r / params.sigma


def barrier_product(params: MarketParams, K: float) -> float:
    """(r/sigma) * K^2; below 1 the range width sits inside the barrier."""
    return lambda_ratio(params) * K * K


def turning_point(params: MarketParams) -> float:
    """s* = sqrt(sigma / r), where 1/s^2 equals r/sigma."""
    return math.sqrt(params.sigma / params.r)


def _check_width(K: float) -> None:
    if not (math.isfinite(K) and K > 0):
        raise ValueError(f"range width K must be finite and > 0, got {K!r}")


def classify_regime(params: MarketParams, K: float) -> Regime:
    """
    Classify K against the turning point.

    Args:
        params: validated market parameters
        K: range width in price units

    Returns:
        TUNNELING if (r/sigma)K^2 < 1, AT_TURNING_POINT when it equals 1 within
        TURNING_POINT_TOLERANCE, NO_BARRIER otherwise
    """
    _check_width(K)
    product = barrier_product(params, K)
    if abs(product - 1.0) <= TURNING_POINT_TOLERANCE:
        return Regime.AT_TURNING_POINT
    if product < 1.0:
        return Regime.TUNNELING
    return Regime.NO_BARRIER


def _raise_no_barrier(params: MarketParams, K: float) -> None:
    raise NoBarrierError(params.r, params.sigma, K, barrier_product(params, K))


def barrier_parameter(params: MarketParams, K: float) -> float:
    """u = sqrt(1 - (r/sigma) K^2), in [0, 1). Raises NoBarrierError past the turning point."""
    regime = classify_regime(params, K)
    if regime is Regime.NO_BARRIER:
        _raise_no_barrier(params, K)
    if regime is Regime.AT_TURNING_POINT:
        return 0.0
    return math.sqrt(1.0 - barrier_product(params, K))


def artanh_excess(u: float) -> float:
    """
    artanh(u) - u for u in [0, 1).

    artanh(u) - u = u^3/3 + u^5/5 + u^7/7 + ...; the subtraction loses digits for
    small u so the series is summed there instead.
    """
    if u < 0.0 or u >= 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u!r}")
    if u >= _SERIES_CROSSOVER:
        return math.atanh(u) - u
    u2 = u * u
    power = u * u2
    total = 0.0
    k = 3
    while True:
        term = power / k
        total += term
        if term <= total * 1e-17:
            return total
        power *= u2
        k += 2


def barrier_bracket(product: float) -> float:
    """
    artanh(u) - u with u = sqrt(1 - product), for product in (0, 1).

    Away from the series region artanh(u) is taken as 0.5 * ln((1 + u)^2 / product),
    using 1 - u = product / (1 + u). That stays finite when u itself rounds to 1.
    """
    u = math.sqrt(1.0 - product)
    if u < _SERIES_CROSSOVER:
        return artanh_excess(u)
    return 0.5 * math.log((1.0 + u) ** 2 / product) - u


def bounded_transmission(exponent: float) -> float:
    """exp(-exponent) kept inside (0, 1) for a positive exponent."""
    return min(max(math.exp(-exponent), _T_FLOOR), _T_CEILING)


def exponent_prefactor(params: MarketParams) -> float:
    """sqrt(r (sigma^2 + r) / sigma^4)."""
    sigma2 = params.sigma * params.sigma
    return math.sqrt(params.r * (sigma2 + params.r)) / sigma2


def penetration_distance(params: MarketParams, K: float) -> float:
    """
    d = sqrt(sigma/r) - K, the minimum move beyond the broken level.

    Zero at the turning point; NoBarrierError once K passes it.
    """
    regime = classify_regime(params, K)
    if regime is Regime.NO_BARRIER:
        _raise_no_barrier(params, K)
    if regime is Regime.AT_TURNING_POINT:
        return 0.0
    return turning_point(params) - K


def transmission_coefficient(params: MarketParams, K: float) -> TunnelEvaluation:
    """
    Evaluate lambda, u, the exponent, T and d for one range width.

    Args:
        params: risk-free rate and implied volatility
        K: range width (resistance - support), price units

    Returns:
        TunnelEvaluation with T = exp(-exponent). T is 1 at the turning point and
        strictly inside (0, 1) when tunneling: an exp that underflows to 0 or
        rounds up to 1 is pinned to the nearest float inside the interval, and
        the unrounded value is available as log_T.

    Raises:
        NoBarrierError: K >= sqrt(sigma/r) outside the turning-point band
    """
    regime = classify_regime(params, K)
    if regime is Regime.NO_BARRIER:
        _raise_no_barrier(params, K)

    lam = lambda_ratio(params)
    if regime is Regime.AT_TURNING_POINT:
        return TunnelEvaluation(lambda_=lam, u=0.0, exponent=0.0, T=1.0, d=0.0, regime=regime)

    product = barrier_product(params, K)
    exponent = 2.0 * exponent_prefactor(params) * barrier_bracket(product)
    return TunnelEvaluation(
        lambda_=lam,
        u=barrier_parameter(params, K),
        exponent=exponent,
        T=bounded_transmission(exponent),
        d=penetration_distance(params, K),
        regime=regime,
    )
