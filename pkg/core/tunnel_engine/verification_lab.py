"""
verification_lab.py - Independent numerical check of the closed-form exponent

The time-independent equation

    -(sigma^4 / (r (sigma^2 + r))) psi''(s) + psi(s) / s^2 = (r / sigma) psi(s)

rearranges to psi'' = C (1/s^2 - r/sigma) psi with C = r (sigma^2 + r) / sigma^4.
Inside the barrier (K <= s <= s*, s* = sqrt(sigma/r)) the local decay rate is
kappa(s) = sqrt(C (1/s^2 - r/sigma)) and the WKB exponent is 2 * int kappa ds.

This module recomputes that integral by adaptive quadrature and integrates the
equation itself with fixed-step RK4, without using the closed form, so the two
can be compared. Price s is used in absolute units, exactly as the equation is
written; the equation is not scale free.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad

from .exceptions import (BarrierRangeError, ConfigurationError, NoBarrierError,
                         QuadratureError)
from .reference_events import REFERENCE_EVENTS
from .tunneling_core import (MarketParams, Regime, barrier_product,
                             classify_regime, exponent_prefactor,
                             transmission_coefficient, turning_point)

logger = logging.getLogger(__name__)

# scipy's QUADPACK refuses epsrel below 50 * machine epsilon
QUADRATURE_FLOOR = 1e-14
QUADRATURE_REL_TOL = 1e-12
MIN_WAVEFUNCTION_STEPS = 100
DEFAULT_SEED = 20130207


@dataclass(frozen=True)
class BarrierSpec:
    """
    Barrier between the range width K and the turning point s*.

    K at the turning point is a zero-thickness barrier: its integral is 0 and
    integrate_wavefunction refuses it. K past s* is rejected here.
    """
    params: MarketParams
    K: float
    s_star: float = field(init=False)
    C: float = field(init=False)

    def __post_init__(self):
        regime = classify_regime(self.params, self.K)
        if regime is Regime.NO_BARRIER:
            raise NoBarrierError(self.params.r, self.params.sigma, self.K,
                                 barrier_product(self.params, self.K))
        object.__setattr__(self, 's_star', turning_point(self.params))
        object.__setattr__(self, 'C', exponent_prefactor(self.params) ** 2)

    @classmethod
    def from_values(cls, r: float, sigma: float, K: float) -> 'BarrierSpec':
        return cls(params=MarketParams(r=r, sigma=sigma), K=K)

    @property
    def regime(self) -> Regime:
        return classify_regime(self.params, self.K)

    @property
    def thickness(self) -> float:
        return max(self.s_star - self.K, 0.0)


@dataclass(frozen=True)
class WavefunctionProfile:
    """psi(s) on [K, s*] with psi(s*) = 1, s ascending."""
    s_grid: np.ndarray
    psi: np.ndarray
    kappa: np.ndarray
    log_psi: np.ndarray

    def __post_init__(self):
        for name in ('s_grid', 'psi', 'kappa', 'log_psi'):
            getattr(self, name).setflags(write=False)

    @property
    def log_growth(self) -> float:
        """ln(psi(K) / psi(s*))."""
        return float(self.log_psi[0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'s': self.s_grid, 'psi': self.psi, 'kappa': self.kappa})


def _local_rate_squared(spec: BarrierSpec, s):
    """C (1/s^2 - r/sigma), written as C (s* - s)(s* + s) / (s*^2 s^2) to avoid cancellation."""
    s_star = spec.s_star
    return spec.C * (s_star - s) * (s_star + s) / (s_star * s_star * s * s)


def kappa(spec: BarrierSpec, s: float) -> float:
    """
    Local decay rate sqrt(C (1/s^2 - r/sigma)) inside the barrier.

    Raises:
        BarrierRangeError: s outside [K, s*]
    """
    slack = 1e-12 * spec.s_star
    low = min(spec.K, spec.s_star)
    if not (low - slack <= s <= spec.s_star + slack):
        raise BarrierRangeError(
            f"s={s!r} outside the barrier [{spec.K!r}, {spec.s_star!r}]"
        )
    s = min(s, spec.s_star)
    return math.sqrt(max(_local_rate_squared(spec, s), 0.0))


def kappa_values(spec: BarrierSpec, s_grid: np.ndarray) -> np.ndarray:
    """Vectorized kappa for grids already inside the barrier."""
    s = np.minimum(np.asarray(s_grid, dtype=float), spec.s_star)
    return np.sqrt(np.maximum(_local_rate_squared(spec, s), 0.0))


def kappa_integral(spec: BarrierSpec, rel_tol: float = QUADRATURE_REL_TOL,
                   limit: int = 200) -> Tuple[float, float]:
    """
    int_K^s* kappa(s) ds by adaptive Gauss-Kronrod quadrature.

    kappa ~ sqrt(s* - s) at the turning point. With s = s* - t^2 the integrand
    becomes 2 t kappa(s* - t^2), which is smooth on [0, sqrt(s* - K)].

    Returns:
        (integral, absolute error estimate)
    """
    if not (QUADRATURE_FLOOR < rel_tol < 1e-3):
        raise ConfigurationError(
            f"rel_tol must lie in ({QUADRATURE_FLOOR:g}, 1e-3), got {rel_tol!r}"
        )
    if spec.regime is not Regime.TUNNELING:
        return 0.0, 0.0

    s_star = spec.s_star
    sqrt_c = math.sqrt(spec.C)
    t_max = math.sqrt(s_star - spec.K)

    def integrand(t: float) -> float:
        s = s_star - t * t
        return 2.0 * t * sqrt_c * t * math.sqrt(2.0 * s_star - t * t) / (s_star * s)

    epsrel = max(rel_tol, 50.0 * np.finfo(float).eps * 1.01)
    result = quad(integrand, 0.0, t_max, epsabs=0.0, epsrel=epsrel, limit=limit, full_output=1)
    value, abserr = result[0], result[1]
    if len(result) > 3:
        raise QuadratureError(f"quadrature did not converge: {result[3]}", value, abserr)
    return value, abserr


def wkb_exponent_numeric(spec: BarrierSpec, rel_tol: float = QUADRATURE_REL_TOL,
                         limit: int = 200) -> float:
    """2 * int_K^s* kappa ds, computed without the closed form."""
    value, _ = kappa_integral(spec, rel_tol=rel_tol, limit=limit)
    return 2.0 * value


def closed_form_exponent(spec: BarrierSpec) -> float:
    """2 sqrt(C) (artanh(u) - u) from tunneling_core."""
    return transmission_coefficient(spec.params, spec.K).exponent


def wkb_transmission(spec: BarrierSpec, rel_tol: float = QUADRATURE_REL_TOL) -> float:
    return math.exp(-wkb_exponent_numeric(spec, rel_tol=rel_tol))


def integrate_wavefunction(spec: BarrierSpec, n_steps: int = 10000) -> WavefunctionProfile:
    """
    Integrate psi'' = C (1/s^2 - r/sigma) psi from s* down to K with classic RK4.

    Boundary values psi(s*) = 1, psi'(s*) = 0. Only ratios of psi are used so the
    normalization is arbitrary. The state is (eta, eta') with psi = 1 + eta, which
    keeps the tiny growth across thin barriers out of the rounding of 1.0.

    Raises:
        ConfigurationError: n_steps < 100, or a step longer than 1/kappa(K)
    """
    if n_steps < MIN_WAVEFUNCTION_STEPS:
        raise ConfigurationError(
            f"n_steps must be >= {MIN_WAVEFUNCTION_STEPS}, got {n_steps}"
        )
    if spec.regime is not Regime.TUNNELING:
        raise ConfigurationError("wavefunction integration needs K strictly below the turning point")

    s_desc = np.linspace(spec.s_star, spec.K, n_steps + 1)
    step = spec.thickness / n_steps
    if step * kappa(spec, spec.K) > 1.0:
        raise ConfigurationError(
            f"n_steps={n_steps} cannot resolve a barrier of width {spec.thickness:.6g} "
            f"(step x kappa(K) = {step * kappa(spec, spec.K):.3g} > 1)"
        )

    def derivative(s: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], _local_rate_squared(spec, s) * (1.0 + y[0])])

    eta = np.zeros((n_steps + 1, 2))
    y = eta[0]
    for i in range(n_steps):
        s = s_desc[i]
        h = s_desc[i + 1] - s
        k1 = h * derivative(s, y)
        k2 = h * derivative(s + h / 2, y + k1 / 2)
        k3 = h * derivative(s + h / 2, y + k2 / 2)
        k4 = h * derivative(s + h, y + k3)
        y = y + (k1 + 2 * k2 + 2 * k3 + k4) / 6
        eta[i + 1] = y

    growth = eta[::-1, 0]
    s_grid = s_desc[::-1].copy()
    logger.debug(f"RK4 wavefunction: {n_steps} steps, ln psi(K) = {math.log1p(growth[0]):.6g}")
    return WavefunctionProfile(
        s_grid=s_grid,
        psi=1.0 + growth,
        kappa=kappa_values(spec, s_grid),
        log_psi=np.log1p(growth),
    )


def wkb_growth_ratio(profile: WavefunctionProfile, spec: BarrierSpec) -> float:
    """ln psi(K) / int kappa ds; tends to 1 as the barrier thickens."""
    integral, _ = kappa_integral(spec)
    return profile.log_growth / integral


@dataclass(frozen=True)
class OracleCase:
    label: str
    r: float
    sigma: float
    K: float
    closed_form: float
    numeric: float

    @property
    def rel_deviation(self) -> float:
        if self.closed_form == 0.0:
            return abs(self.numeric)
        return abs(self.numeric - self.closed_form) / abs(self.closed_form)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'r': self.r,
            'sigma': self.sigma,
            'K': self.K,
            'closed_form': self.closed_form,
            'numeric': self.numeric,
            'rel_deviation': self.rel_deviation,
        }


@dataclass(frozen=True)
class VerificationReport:
    rel_tol: float
    seed: int
    cases: List[OracleCase]
    attainable: bool

    @property
    def worst(self) -> Optional[OracleCase]:
        if not self.cases:
            return None
        return max(self.cases, key=lambda case: case.rel_deviation)

    @property
    def max_rel_deviation(self) -> float:
        worst = self.worst
        return worst.rel_deviation if worst else 0.0

    @property
    def passed(self) -> bool:
        return self.attainable and self.max_rel_deviation <= self.rel_tol

    def to_dict(self) -> Dict[str, Any]:
        worst = self.worst
        return {
            'cases': len(self.cases),
            'seed': self.seed,
            'rel_tol': self.rel_tol,
            'max_rel_deviation': self.max_rel_deviation,
            'worst_case': worst.label if worst else None,
            'attainable': self.attainable,
            'status': 'PASS' if self.passed else 'FAIL',
        }


def random_specs(n: int, seed: int = DEFAULT_SEED) -> List[BarrierSpec]:
    """Seeded Tunneling-regime specs: r in [0.005, 0.08], sigma in [0.05, 1], K = f s*."""
    rng = np.random.default_rng(seed)
    specs = []
    for _ in range(n):
        r = float(rng.uniform(0.005, 0.08))
        sigma = float(rng.uniform(0.05, 1.0))
        fraction = float(rng.uniform(0.05, 0.95))
        params = MarketParams(r=r, sigma=sigma)
        specs.append(BarrierSpec(params=params, K=fraction * turning_point(params)))
    return specs


def verify_oracle(rel_tol: float = 1e-9, n_random: int = 50,
                  seed: int = DEFAULT_SEED) -> VerificationReport:
    """
    Compare the closed-form exponent with quadrature on the reference events plus
    n_random seeded specs.

    Tolerances at or below QUADRATURE_FLOOR cannot be certified by the
    quadrature and are reported as unattainable.
    """
    labelled = [(row.symbol, BarrierSpec.from_values(row.r, row.sigma, row.K)) for row in REFERENCE_EVENTS]
    labelled += [(f"random-{i:02d}", spec) for i, spec in enumerate(random_specs(n_random, seed))]

    cases = []
    for label, spec in labelled:
        cases.append(OracleCase(
            label=label,
            r=spec.params.r,
            sigma=spec.params.sigma,
            K=spec.K,
            closed_form=closed_form_exponent(spec),
            numeric=wkb_exponent_numeric(spec),
        ))

    report = VerificationReport(
        rel_tol=rel_tol, seed=seed, cases=cases, attainable=rel_tol > QUADRATURE_FLOOR,
    )
    logger.info(
        f"Oracle check: {len(cases)} cases, max relative deviation "
        f"{report.max_rel_deviation:.3e} (tolerance {rel_tol:g})"
    )
    return report
