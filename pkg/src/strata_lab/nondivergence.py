"""Sublevel-set measurements for horocycle pushes.

Three experiments live here: the good-function inequality for saddle
connection length functions ``s -> |u_s Hol|``, fractions of a horocycle
arc along which ``a_t u_s x`` has a short saddle connection, and Monte Carlo
measures of sublevel sets of the quadratic polynomials that appear when a
short vector is tracked across a smeared horocycle segment.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameter, PreconditionUnmet
from .saddle import SaddleConnection, enumerate_arrays, injectivity_radius
from .sl2 import a_t, sigma_max, u_s
from .surface import TranslationSurface


@dataclass(frozen=True)
class NondivConstants:
    """Constants of the short-vector fraction bound.

    Parameters
    ----------
    kappa1, kappa2, alpha : float
        The fraction of ``s`` in an interval with ``inj(a_t u_s x) < eps``
        is compared to ``C4 * eps**alpha`` with ``C4 = kappa2 / kappa1**alpha``.
    """

    kappa1: float = 0.1
    kappa2: float = 10.0
    alpha: float = 0.5

    def __post_init__(self) -> None:
        if not (0 < self.kappa1 < 1 and self.kappa2 > 0 and 0 < self.alpha <= 1):
            raise InvalidParameter("need 0 < kappa1 < 1, kappa2 > 0, 0 < alpha <= 1")

    @property
    def C3(self) -> float:
        return math.log(1.0 / self.kappa1) + 0.5 * math.log(2.0)

    @property
    def C4(self) -> float:
        return self.kappa2 / self.kappa1**self.alpha

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.C3, self.C4, self.alpha, self.kappa1, self.kappa2)


def stat_tol(p: float, n: int) -> float:
    """Three binomial standard deviations."""
    p = min(max(p, 0.0), 1.0)
    return 3.0 * math.sqrt(p * (1.0 - p) / n)


def midpoint_grid(interval: tuple[float, float], n: int) -> np.ndarray:
    lo, hi = interval
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


# ---------------------------------------------------------------- good functions


@dataclass
class GoodCheckReport:
    kappa: float
    alpha: float
    rho: float
    trials: int
    violations: list = field(default_factory=list)
    cells: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "kappa": self.kappa,
            "alpha": self.alpha,
            "rho": self.rho,
            "trials": self.trials,
            "violations": [list(v) for v in self.violations],
            "cells": [list(c) for c in self.cells],
        }


def _as_function(sc) -> Callable[[np.ndarray], np.ndarray]:
    if callable(sc):
        return sc
    x, y = sc.holonomy if isinstance(sc, SaddleConnection) else sc
    return lambda s: np.hypot(x + s * y, y)


def good_property_check(
    S: TranslationSurface | None,
    sc,
    I: tuple[float, float],
    eps_list: Sequence[float],
    grid_n: int = 10_000,
    kappa: float = 2.0,
    alpha: float = 1.0,
) -> GoodCheckReport:
    """Check ``|{s in I : f(s) < eps}| / |I| <= kappa (eps / sup_I f)^alpha``.

    ``f`` is the length function ``s -> |u_s Hol(sc)|``; ``sc`` may also be a
    holonomy pair or any vectorised callable. The sublevel measure is the
    fraction of a midpoint grid, and a violation needs the observed ratio
    to exceed the bound by more than three binomial standard deviations.
    """
    if grid_n < 1000:
        raise InvalidParameter("grid_n must be at least 1000")
    lo, hi = I
    if not hi > lo:
        raise InvalidParameter("empty interval")
    f = _as_function(sc)
    s = midpoint_grid(I, grid_n)
    vals = np.asarray(f(s), dtype=float)
    sup = float(max(vals.max(), np.max(f(np.array([lo, hi])))))
    rep = GoodCheckReport(kappa=kappa, alpha=alpha, rho=0.0, trials=0)
    for eps in eps_list:
        ratio = float(np.count_nonzero(vals < eps)) / grid_n
        bound = kappa * (eps / sup) ** alpha
        rep.trials += 1
        rep.cells.append(((lo, hi), float(eps), ratio, bound))
        if ratio > bound + stat_tol(ratio, grid_n):
            rep.violations.append(((lo, hi), float(eps), ratio, bound))
    return rep


def good_sweep(
    S: TranslationSurface,
    n_cells: int,
    rng: np.random.Generator | int = 0,
    L: float = 3.0,
    grid_n: int = 10_000,
    span: float = 3.0,
) -> GoodCheckReport:
    """Random ``(connection, interval, epsilon)`` cells of the good-function check.

    Connections are drawn from those of length at most ``L``, intervals
    from ``[-span, span]`` and ``epsilon`` as a random fraction (up to 1.2)
    of the supremum of the length function on the interval.
    """
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    res = enumerate_arrays(S, L)
    if len(res) == 0:
        raise InvalidParameter("no saddle connections below L")
    order = res.sorted_order()
    total = GoodCheckReport(kappa=2.0, alpha=1.0, rho=0.0, trials=0)
    for _ in range(n_cells):
        k = int(order[gen.integers(len(order))])
        hol = (float(res.hol[k, 0]), float(res.hol[k, 1]))
        lo, hi = np.sort(gen.uniform(-span, span, 2))
        if hi - lo < 1e-3:
            hi = lo + 1e-3
        f = _as_function(hol)
        sup = float(np.max(f(np.array([lo, hi]))))
        eps = sup * float(gen.uniform(0.01, 1.2))
        rep = good_property_check(S, hol, (float(lo), float(hi)), [eps], grid_n)
        total.trials += rep.trials
        total.cells.extend(rep.cells)
        total.violations.extend(rep.violations)
    return total


# ---------------------------------------------------------------- short-vector fractions


def inj_profile(
    S: TranslationSurface, t: float, s_values: np.ndarray, cap: float, budget: int = 10**7
) -> np.ndarray:
    """``min(inj(a_t u_s S), cap)`` for every ``s`` (exact below ``cap``).

    One enumeration of ``S`` up to ``max_s sigma_max(a_t u_s) * cap`` is
    shared by all ``s``: a connection of ``a_t u_s S`` shorter than ``cap``
    is the image of one of ``S`` no longer than that radius.
    """
    s_values = np.asarray(s_values, dtype=float)
    if cap <= 0:
        return np.zeros_like(s_values)
    R = max(sigma_max(a_t(t) @ u_s(float(s))) for s in (s_values.min(), s_values.max(), 0.0))
    res = enumerate_arrays(S, R * cap * (1 + 1e-9), budget=budget)
    x, y = res.hol[:, 0], res.hol[:, 1]
    et, emt = math.exp(t), math.exp(-t)
    out = np.full(s_values.shape, cap, dtype=float)
    chunk = max(1, 2_000_000 // max(1, len(x)))
    for i in range(0, len(s_values), chunk):
        s = s_values[i : i + chunk, None]
        lens = np.hypot(et * (x[None, :] + s * y[None, :]), emt * y[None, :])
        if lens.shape[1]:
            out[i : i + chunk] = np.minimum(lens.min(axis=1), cap)
    return out


@dataclass
class MWFractionReport:
    t: float
    epsilon: float
    interval: tuple[float, float]
    grid_n: int
    fraction: float
    bound: float
    constants_used: tuple[float, float, float, float, float]
    flagged: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["interval"] = list(self.interval)
        d["constants_used"] = dict(zip(("C3", "C4", "alpha", "kappa1", "kappa2"), self.constants_used))
        return d


def mw_fraction(
    S: TranslationSurface,
    t: float,
    epsilon: float,
    I: tuple[float, float] = (0.0, 1.0),
    grid_n: int = 1000,
    constants: NondivConstants = NondivConstants(),
    profile: np.ndarray | None = None,
) -> MWFractionReport:
    """Fraction of a midpoint grid on ``I`` with ``inj(a_t u_s S) < epsilon``.

    ``profile`` may supply precomputed ``inj_profile`` values (clipped at a
    cap no smaller than ``epsilon``) to share work across an epsilon sweep.
    """
    if grid_n < 1000:
        raise InvalidParameter("grid_n must be at least 1000")
    if epsilon < 0:
        raise InvalidParameter("epsilon must be non-negative")
    if profile is None:
        profile = inj_profile(S, t, midpoint_grid(I, grid_n), epsilon)
    frac = float(np.count_nonzero(profile < epsilon)) / grid_n
    return MWFractionReport(
        t=float(t),
        epsilon=float(epsilon),
        interval=(float(I[0]), float(I[1])),
        grid_n=int(grid_n),
        fraction=frac,
        bound=constants.C4 * epsilon**constants.alpha,
        constants_used=constants.as_tuple(),
    )


def mw_sweep(
    S: TranslationSurface,
    t: float,
    eps_list: Sequence[float],
    I: tuple[float, float] = (0.0, 1.0),
    grid_n: int = 1000,
    constants: NondivConstants = NondivConstants(),
) -> list[MWFractionReport]:
    """``mw_fraction`` for several epsilons from one shared profile."""
    prof = inj_profile(S, t, midpoint_grid(I, grid_n), max(eps_list))
    return [mw_fraction(S, t, e, I, grid_n, constants, profile=prof) for e in eps_list]


def fitted_alpha(reports: Sequence[MWFractionReport]) -> float:
    """Least-squares slope of ``log fraction`` against ``log epsilon`` (zero fractions dropped)."""
    pts = [(math.log(r.epsilon), math.log(r.fraction)) for r in reports if r.fraction > 0 and r.epsilon > 0]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def main_nondiv_threshold(S: TranslationSurface, eta: float, constants: NondivConstants = NondivConstants()) -> float:
    """``|log(1 / (eta inj(S)))| + C3``."""
    return abs(math.log(1.0 / (eta * injectivity_radius(S)))) + constants.C3


def verify_main_nondiv(
    S: TranslationSurface,
    t: float,
    epsilon: float,
    beta: float,
    I: tuple[float, float] = (0.0, 1.0),
    grid_n: int = 1000,
    constants: NondivConstants = NondivConstants(),
) -> tuple[bool, MWFractionReport]:
    """Check the fraction bound at a time past the threshold.

    Raises
    ------
    PreconditionUnmet
        If ``t`` is below ``main_nondiv_threshold(S, beta)``.
    """
    thr = main_nondiv_threshold(S, beta, constants)
    if t < thr:
        raise PreconditionUnmet(f"t={t} below threshold {thr:.6f}")
    rep = mw_fraction(S, t, epsilon, I, grid_n, constants)
    return rep.fraction <= rep.bound, rep


# ---------------------------------------------------------------- polynomial sublevel sets


@dataclass(frozen=True)
class MCEstimate:
    measure: float
    stderr: float
    samples: int
    scale: float

    def to_json(self) -> dict:
        return asdict(self)


def _poly_values(x: np.ndarray, a1: float, a2: float, a3: float, c: float, D: float, t: float) -> np.ndarray:
    eD = math.exp(D * t)
    return a1 / eD + a2 * (x - c) - a3 * eD * (x - c) ** 2


def polynomial_bound_mc(
    a1: float,
    a2: float,
    a3: float,
    c: float,
    C: float,
    D: float,
    t: float,
    eta: float,
    samples: int = 100_000,
    rng: np.random.Generator | int = 0,
) -> MCEstimate:
    """Monte Carlo measure of ``{x in [0, 1] : |a1 e^{-Dt} + a2 (x-c) - a3 e^{Dt} (x-c)^2| <= C e^{(1-D)t}}``.

    ``scale`` is the reference size ``eta**-4 e^{(1-D)t/2}``.

    Raises
    ------
    InvalidParameter
        If ``max |a_i| < 10 eta**2`` or fewer than 10**5 samples are requested.
    """
    if max(abs(a1), abs(a2), abs(a3)) < 10.0 * eta**2:
        raise InvalidParameter("coefficients too small relative to eta**2")
    if samples < 100_000:
        raise InvalidParameter("at least 10**5 samples required")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x = gen.random(samples)
    hit = np.abs(_poly_values(x, a1, a2, a3, c, D, t)) <= C * math.exp((1.0 - D) * t)
    p = float(np.count_nonzero(hit)) / samples
    return MCEstimate(p, math.sqrt(p * (1 - p) / samples), samples, eta**-4 * math.exp((1.0 - D) * t / 2.0))


def interval_measure(center: float, radius: float) -> float:
    """Length of ``[center - radius, center + radius]`` inside ``[0, 1]``."""
    return max(0.0, min(1.0, center + radius) - max(0.0, center - radius))
