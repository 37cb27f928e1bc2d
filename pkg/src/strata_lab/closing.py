"""Near-returns of smeared geodesic pushes, Veech elements and the closing dichotomy.

Grid points of ``E_t x`` are compared pairwise in period coordinates. A pair
``(z, y) = (h1 x, h2 x)`` whose Delaunay triangulations are combinatorially
isomorphic gives a displacement ``v`` with ``y = exp_z(v)``. Its standard
part is ``(G - I) [omega]`` for some ``G`` in GL(2, R); when the balanced
remainder ``w`` vanishes, ``h2^-1 G h1`` is an affine symmetry of ``x``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import product as iproduct
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .delaunay import (
    WorkingTriangulation,
    canonical_form,
    delaunay,
    equivalence_witness,
    rooted_walk_vectors,
    rootings,
    translation_equivalent,
)
from .errors import (
    BudgetExceeded,
    ChartError,
    DegenerateForm,
    InvalidParameter,
    NonPeriodicDirection,
    NumericalDegeneracy,
    PreconditionUnmet,
)
from .nondivergence import stat_tol
from .periods import (
    PeriodChart,
    TangentVector,
    agy_norms,
    default_cutoff,
    period_chart,
    split_batch,
)
from .saddle import cylinder_decomposition, enumerate_arrays, injectivity_radius, rational_lcm
from .sl2 import (
    IDENTITY,
    Mat2,
    a_t,
    as_mat2,
    classify,
    sample_E_t,
    translation_length,
    u_s,
)
from .surface import TAU_GEOM, TranslationSurface, apply_matrix, validate

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ClosingConstants:
    """Tunable constants of the near-return scan and the dichotomy driver.

    Attributes
    ----------
    C1 : float
        Chart constant; displacements must have AGY norm below
        ``chart_radius = 1 / ((C1 + 1)^2 C1)``.
    c0 : float
        ``r_proxy = min(c0 inj, 1 / (2 C1))``.
    tau_bal : float
        Allowed residual relative to ``|w|``.
    residual_floor : float
        Absolute residual slack for numerically exact returns.
    nu, kappa4, K_sheet, K_bad : float
        Margulis exponent, sheet-growth rate and its constant, and the
        fraction constant above which option 2 is attempted.
    id_tol : float
        Candidates within this distance of ``+-I`` are orbit reparametrisations.
    alpha, C4 : float
        Exponent and constant of the measure deficit bound.
    """

    C1: float = 2.0
    c0: float = 0.5
    tau_bal: float = 0.1
    residual_floor: float = 10 * TAU_GEOM
    nu: float = 0.5
    kappa4: float = 4.0
    K_sheet: float = 1.0
    K_bad: float = 0.1
    id_tol: float = 1e-6
    alpha: float = 0.5
    C4: float = 10.0 / 0.1**0.5
    D0: float = 0.0
    flow_multiplier: float = 8.0
    n_s: int = 16
    driver_grid: tuple[int, int, int] = (3, 3, 16)
    max_pairs: int = 200_000

    def __post_init__(self) -> None:
        if not self.C1 > 1:
            raise InvalidParameter("C1 must exceed 1")
        if not 0 < self.nu < 1:
            raise InvalidParameter("nu must lie in (0, 1)")
        if self.kappa4 < 4:
            raise InvalidParameter("kappa4 must be at least 4")

    @property
    def chart_radius(self) -> float:
        """``1 / C2`` with ``C2 = (C1 + 1)^2 C1``: the ball on which exp is bi-Lipschitz."""
        return 1.0 / ((self.C1 + 1.0) ** 2 * self.C1)

    @property
    def D_default(self) -> float:
        return 6.0 * self.kappa4 + 100.0


# ---------------------------------------------------------------- basic quantities


def r_proxy(z: TranslationSurface, C1: float = 2.0, c0: float = 0.5) -> float:
    """Computable under-approximation ``min(c0 inj(z), 1 / (2 C1))`` of the return radius."""
    return min(c0 * injectivity_radius(z), 1.0 / (2.0 * C1))


def flowed_delaunay(S: TranslationSurface, A: Mat2 | Sequence[float], t: float = 0.0, dt: float = 0.25) -> TranslationSurface:
    """Delaunay triangulation of ``a_t A S`` computed by small geodesic steps.

    Each step applies ``a_dt`` to a Delaunay triangulation and re-flips, so
    triangles stay well shaped even for large ``t``.
    """
    W = WorkingTriangulation.from_surface(delaunay(apply_matrix(as_mat2(A), S)))
    W.make_delaunay()
    n = max(1, math.ceil(abs(t) / dt))
    step = t / n
    ex, emx = math.exp(step), math.exp(-step)
    for _ in range(n if t else 0):
        W.V = [[(ex * x, emx * y) for x, y in tri] for tri in W.V]
        W.make_delaunay()
    return W.to_surface(S.label)


@dataclass(frozen=True)
class NearReturn:
    """A balanced near-return ``y = exp_z(v)`` with ``z = h1 x``, ``y = h2 x``.

    ``gamma`` is the affine-symmetry candidate ``h2^-1 G h1`` of ``x``.
    """

    i1: int
    i2: int
    h1: Mat2
    h2: Mat2
    w: TangentVector
    w_norm: float
    residual: float
    v_norm: float
    L_cut: float
    r_proxy: float
    gamma: Mat2
    G: Mat2

    def admissible(self, tau_bal: float, floor: float) -> bool:
        return 0.0 < self.w_norm < self.r_proxy and self.residual <= tau_bal * self.w_norm + floor

    def to_json(self) -> dict:
        return {
            "i1": self.i1,
            "i2": self.i2,
            "h1": list(self.h1.as_tuple()),
            "h2": list(self.h2.as_tuple()),
            "w": self.w.to_json(),
            "w_norm": self.w_norm,
            "residual": self.residual,
            "v_norm": self.v_norm,
            "L_cut": self.L_cut,
            "r_proxy": self.r_proxy,
            "gamma": list(self.gamma.as_tuple()),
        }


@dataclass
class ReturnScan:
    """Result of :func:`near_returns`; iterates over the accepted returns."""

    returns: list[NearReturn]
    grid_size: int
    candidate_pairs: int = 0
    isomorphisms_tested: int = 0
    chart_failures: int = 0
    trivial_skipped: int = 0
    collisions: list[tuple[int, int]] = field(default_factory=list)
    surfaces: list[TranslationSurface] = field(default_factory=list, repr=False)
    r_values: dict[int, float] = field(default_factory=dict, repr=False)

    def __iter__(self) -> Iterator[NearReturn]:
        return iter(self.returns)

    def __len__(self) -> int:
        return len(self.returns)

    def by_base(self) -> dict[int, list[NearReturn]]:
        out: dict[int, list[NearReturn]] = {}
        for r in self.returns:
            out.setdefault(r.i1, []).append(r)
        return out

    def summary(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "returns": len(self.returns),
            "candidate_pairs": self.candidate_pairs,
            "isomorphisms_tested": self.isomorphisms_tested,
            "chart_failures": self.chart_failures,
            "trivial_skipped": self.trivial_skipped,
            "collisions": len(self.collisions),
        }


def _edge_table(T: TranslationSurface) -> np.ndarray:
    return np.asarray(T.polygons, dtype=float)


def _sorted_log_lengths(T: TranslationSurface) -> np.ndarray:
    v = _edge_table(T).reshape(-1, 2)
    return np.sort(np.log(np.hypot(v[:, 0], v[:, 1])))


def _near_pm_identity(M: Mat2, tol: float) -> bool:
    a, b, c, d = M.as_tuple()
    scale_ = max(1.0, abs(a), abs(b), abs(c), abs(d))
    return max(abs(a - 1), abs(b), abs(c), abs(d - 1)) <= tol * scale_ or max(
        abs(a + 1), abs(b), abs(c), abs(d + 1)
    ) <= tol * scale_


def _unit_det(M: np.ndarray) -> Mat2 | None:
    det = float(np.linalg.det(M))
    if det <= 0:
        return None
    k = 1.0 / math.sqrt(det)
    return Mat2._unchecked(*(float(x) * k for x in M.reshape(-1)))


def near_returns(
    x: TranslationSurface,
    t: float,
    beta: float,
    grid_spec: Sequence[int] | None = None,
    tol_bal: float | None = None,
    constants: ClosingConstants = ClosingConstants(),
    surfaces: Sequence[TranslationSurface] | None = None,
) -> ReturnScan:
    """Scan the ``E_t x`` grid for balanced near-returns.

    Parameters
    ----------
    x : TranslationSurface
    t, beta : float
        Flow time and smearing radius (``e^{-0.01 t} < beta < 1``).
    grid_spec : (n_s, n_tau, n_r), optional
        Grid sizes for :func:`sample_E_t`.
    tol_bal : float, optional
        Overrides ``constants.tau_bal``.
    surfaces : sequence, optional
        Precomputed Delaunay triangulations of the grid points.

    Returns
    -------
    ReturnScan
        Accepted returns (deduplicated per base point by ``w`` within
        ``TAU_GEOM``) and counters for skipped pairs and chart failures.
    """
    tau_bal = constants.tau_bal if tol_bal is None else tol_bal
    sample = sample_E_t(t, beta, grid_spec)
    n = len(sample)
    if surfaces is None:
        surfaces = [flowed_delaunay(x, h) for h in sample.elements]
    surfaces = list(surfaces)
    scan = ReturnScan([], n, surfaces=surfaces)
    radius = constants.chart_radius
    # every rooting of every grid surface, bucketed by combinatorial code
    base_walk: list[tuple] = []
    entries: dict[tuple, list[tuple[int, np.ndarray]]] = {}
    for i, T in enumerate(surfaces):
        for root in rootings(T):
            code, index, vecs = rooted_walk_vectors(T, root)
            if root == (0, 0):
                base_walk.append((code, index, vecs))
            entries.setdefault(code, []).append((i, vecs))
    trees = {}
    for code, lst in entries.items():
        feats = np.array([np.log(np.hypot(v[:, 0], v[:, 1])) for _, v in lst])
        trees[code] = (cKDTree(feats), lst)
    log_r = math.log(1.0 / (1.0 - radius))
    for i in range(n):
        code, index, zv = base_walk[i]
        tree, lst = trees[code]
        zlen = np.hypot(zv[:, 0], zv[:, 1])
        hits = sorted(tree.query_ball_point(np.log(zlen), log_r, p=np.inf))
        cands = []
        for k in hits:
            j, yv = lst[k]
            if j == i and np.array_equal(yv, zv):
                continue
            rel = float(np.max(np.hypot(*(yv - zv).T) / zlen))
            if rel >= radius:
                continue
            if rel <= TAU_GEOM:
                if j != i and translation_equivalent(surfaces[i], surfaces[j]):
                    scan.collisions.append((i, j))
                continue
            cands.append((j, yv))
        scan.candidate_pairs += len(cands)
        if scan.candidate_pairs > constants.max_pairs:
            raise BudgetExceeded(f"more than {constants.max_pairs} candidate pairs", partial=scan)
        if not cands:
            continue
        try:
            chart = period_chart(surfaces[i])
            if chart.base is not surfaces[i]:
                raise ChartError("grid surface is not Delaunay")
            L = default_cutoff(chart)
            pos = [index[b] for b in chart.basis]
            V = np.array([yv[pos, 0] + 1j * yv[pos, 1] for _, yv in cands]) - chart.periods
            W, M = split_batch(chart, V)
            norms = agy_norms(chart, np.vstack([V, W]), L)
        except (ChartError, DegenerateForm, NumericalDegeneracy, BudgetExceeded):
            scan.chart_failures += 1
            continue
        scan.isomorphisms_tested += len(cands)
        r_i = None
        kept: list[np.ndarray] = []
        for c, (j, _) in enumerate(cands):
            v_norm, w_norm = float(norms[c]), float(norms[len(cands) + c])
            if not v_norm < radius:
                continue
            G = np.eye(2) + M[c]
            Gu = _unit_det(G)
            if Gu is None:
                continue
            gamma = sample.elements[j].inverse() @ Gu @ sample.elements[i]
            if _near_pm_identity(gamma, constants.id_tol):
                scan.trivial_skipped += 1
                continue
            if r_i is None:
                r_i = r_proxy(surfaces[i], constants.C1, constants.c0)
                scan.r_values[i] = r_i
            nr = NearReturn(
                i1=i,
                i2=j,
                h1=sample.elements[i],
                h2=sample.elements[j],
                w=TangentVector.of(chart, W[c]),
                w_norm=w_norm,
                residual=abs(float(np.linalg.det(G)) - 1.0),
                v_norm=v_norm,
                L_cut=L,
                r_proxy=r_i,
                gamma=gamma,
                G=Gu,
            )
            if not nr.admissible(tau_bal, constants.residual_floor):
                continue
            if any(np.max(np.abs(W[c] - q)) <= TAU_GEOM for q in kept):
                continue
            kept.append(W[c])
            scan.returns.append(nr)
    return scan


def margulis_f(z: TranslationSurface | float, returns: Iterable[NearReturn], nu: float = 0.5, C1: float = 2.0) -> float:
    """``sum |w|^-nu`` over the returns at ``z``, or ``r_proxy(z)^-nu`` when there are none.

    ``z`` may be given directly as its ``r_proxy`` value.
    """
    if not 0 < nu < 1:
        raise InvalidParameter("nu must lie in (0, 1)")
    ws = [r.w_norm for r in returns]
    if ws:
        return math.fsum(w**-nu for w in ws)
    r = z if isinstance(z, (int, float)) else r_proxy(z, C1)
    return float(r) ** -nu


def sheet_count_check(returns: Sequence | int, t: float, kappa4: float = 4.0, K_sheet: float = 1.0) -> bool:
    """``#returns <= K_sheet e^{6 kappa4 t}``."""
    if kappa4 < 4:
        raise InvalidParameter("kappa4 must be at least 4")
    n = returns if isinstance(returns, int) else len(returns)
    return n <= K_sheet * math.exp(6.0 * kappa4 * t)


# ---------------------------------------------------------------- Veech elements


@dataclass
class MembershipCertificate:
    """Transcript of a Veech-group membership test."""

    matrix: Mat2
    member: bool
    tol: float
    max_vector_error: float | None
    surface_form: dict
    image_form: dict

    def to_json(self) -> dict:
        return {
            "matrix": list(self.matrix.as_tuple()),
            "member": self.member,
            "tol": self.tol,
            "max_vector_error": self.max_vector_error,
            "surface_canonical": self.surface_form,
            "image_canonical": self.image_form,
        }


def veech_contains(S: TranslationSurface, M: Mat2 | Sequence[float], tol: float = TAU_GEOM) -> bool:
    """``M`` is the derivative of an affine automorphism of ``S``."""
    A = as_mat2(M)
    return translation_equivalent(apply_matrix(A, S), S, tol)


def membership_certificate(S: TranslationSurface, M: Mat2 | Sequence[float], tol: float = TAU_GEOM) -> MembershipCertificate:
    A = as_mat2(M)
    image = apply_matrix(A, S)
    wit = equivalence_witness(image, S, tol)
    return MembershipCertificate(
        matrix=A,
        member=wit is not None,
        tol=tol,
        max_vector_error=None if wit is None else wit.max_vector_error,
        surface_form=canonical_form(S),
        image_form=canonical_form(image),
    )


def find_parabolic(
    S: TranslationSurface, direction: Sequence[float], tol: float = TAU_GEOM, max_den: int = 1000
) -> Mat2 | None:
    """Multitwist generator in a completely periodic direction, or ``None``.

    The full-twist shears ``circumference / height`` of the cylinders must
    be commensurable; with ``T`` their least common multiple the candidate is
    ``I + T d n^T`` (``d`` the unit direction, ``n`` its normal), normalised
    to a non-negative lower-left entry and positive upper-right entry in the
    horizontal case. The candidate is returned only if membership verifies.
    """
    dx, dy = (float(c) for c in direction)
    nrm = math.hypot(dx, dy)
    if nrm == 0:
        raise InvalidParameter("direction must be non-zero")
    try:
        cyls = cylinder_decomposition(S, (dx, dy))
    except (NonPeriodicDirection, NumericalDegeneracy):
        return None
    T = rational_lcm([c.twist for c in cyls], max_den=max_den)
    if T is None:
        return None
    d = (dx / nrm, dy / nrm)
    n = (-d[1], d[0])
    P = Mat2._unchecked(1 + T * d[0] * n[0], T * d[0] * n[1], T * d[1] * n[0], 1 + T * d[1] * n[1])
    a, b, c, dd = P.as_tuple()
    if c < -1e-12 or (abs(c) <= 1e-12 and b < 0):
        P = P.inverse()
    P = snap_integers(P)
    return P if veech_contains(S, P, tol) else None


def snap_integers(M: Mat2, tol: float = 1e-9) -> Mat2:
    """Round entries lying within ``tol`` (relative) of an integer."""
    vals = [float(round(x)) if abs(x - round(x)) <= tol * max(1.0, abs(x)) else x for x in M.as_tuple()]
    return Mat2._unchecked(*vals)


def _words(gens: Sequence[Mat2], max_len: int) -> Iterator[tuple[Mat2, tuple[int, ...]]]:
    for L in range(1, max_len + 1):
        for w in iproduct(range(len(gens)), repeat=L):
            if any(w[k] == (w[k + 1] ^ 1) for k in range(L - 1)):
                continue  # free reduction: generator next to its inverse
            M = IDENTITY
            for g in w:
                M = M @ gens[g]
            yield M, w


@dataclass
class HyperbolicCertificate:
    gamma: Mat2
    trace: float
    translation_length: float
    word: tuple[int, ...]
    parabolics: list[tuple[tuple[float, float], Mat2]]
    membership: MembershipCertificate

    def to_json(self) -> dict:
        return {
            "gamma": list(self.gamma.as_tuple()),
            "trace": self.trace,
            "translation_length": self.translation_length,
            "word": list(self.word),
            "parabolics": [{"direction": list(d), "matrix": list(P.as_tuple())} for d, P in self.parabolics],
            "membership": self.membership.to_json(),
        }


def find_hyperbolic_certificate(
    S: TranslationSurface, directions: Sequence[Sequence[float]], max_len: int = 4, tol: float = TAU_GEOM
) -> HyperbolicCertificate | None:
    """Search products of direction parabolics for a verified hyperbolic element."""
    paras: list[tuple[tuple[float, float], Mat2]] = []
    for d in directions:
        dd = (float(d[0]), float(d[1]))
        if any(abs(dd[0] * e[1] - dd[1] * e[0]) <= 1e-9 * math.hypot(*dd) * math.hypot(*e) for e, _ in paras):
            continue
        P = find_parabolic(S, dd, tol)
        if P is not None:
            paras.append((dd, P))
    if len(paras) < 2:
        return None
    gens: list[Mat2] = []
    for _, P in paras:
        gens.extend([P, P.inverse()])
    for M, word in _words(gens, max_len):
        if abs(M.trace) <= 2 + 1e-9:
            continue
        M = snap_integers(M)
        cert = membership_certificate(S, M, tol)
        if cert.member:
            return HyperbolicCertificate(M, M.trace, translation_length(M), word, paras, cert)
    return None


def find_hyperbolic(
    S: TranslationSurface, directions: Sequence[Sequence[float]], max_len: int = 4, tol: float = TAU_GEOM
) -> Mat2 | None:
    """First verified hyperbolic product (length ``<= max_len``) of direction parabolics."""
    cert = find_hyperbolic_certificate(S, directions, max_len, tol)
    return None if cert is None else cert.gamma


def short_directions(S: TranslationSurface, count: int = 6) -> list[tuple[float, float]]:
    """Distinct directions of the shortest saddle connections of ``S``."""
    L = 2.0 * injectivity_radius(S)
    out: list[tuple[float, float]] = []
    for _ in range(6):
        res = enumerate_arrays(S, L)
        for k in np.argsort(res.lengths, kind="stable"):
            d = tuple(float(c) for c in res.hol[k])
            if d[1] < 0 or (d[1] == 0 and d[0] < 0):
                d = (-d[0], -d[1])
            if not any(abs(d[0] * e[1] - d[1] * e[0]) <= 1e-9 * math.hypot(*d) * math.hypot(*e) for e in out):
                out.append(d)
            if len(out) >= count:
                return out
        L *= 1.5
    return out


# ---------------------------------------------------------------- dichotomy


def kronecker_samples(n: int) -> np.ndarray:
    """``frac(k * golden)`` for ``k = 1..n``: a deterministic low-discrepancy set in [0, 1)."""
    return np.mod(np.arange(1, n + 1) * GOLDEN, 1.0)


@dataclass
class DichotomyReport:
    t: float
    D: float
    beta: float
    branch: str
    option1: dict | None = None
    option2: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema": "dichotomy/1",
            "t": self.t,
            "D": self.D,
            "beta": self.beta,
            "branch": self.branch,
            "option1": self.option1,
            "option2": self.option2,
            "diagnostics": self.diagnostics,
        }


def default_t_prime(x: TranslationSurface) -> float:
    return max(0.0, math.log(1.0 / injectivity_radius(x)))


def dichotomy_driver(
    x: TranslationSurface,
    t: float,
    D: float | None = None,
    constants: ClosingConstants = ClosingConstants(),
    t_prime: float | None = None,
) -> DichotomyReport:
    """Decide which alternative of the closing dichotomy the samples support.

    Raises
    ------
    PreconditionUnmet
        ``D < D0 + 1``, ``t < t'`` or ``x`` not in H(2).
    """
    if D is None:
        D = constants.D_default
    if D < constants.D0 + 1:
        raise PreconditionUnmet(f"D={D} below D0 + 1 = {constants.D0 + 1}")
    rep = validate(x)
    if not rep.in_H2:
        raise PreconditionUnmet("surface is not in H(2)")
    tp = default_t_prime(x) if t_prime is None else t_prime
    if t < tp:
        raise PreconditionUnmet(f"t={t} below t'={tp:.6f}")
    beta = math.exp(-t / (6.0 * constants.kappa4 + 100.0))
    T = constants.flow_multiplier * t
    s_vals = kronecker_samples(constants.n_s)
    sample = sample_E_t(t, beta, constants.driver_grid)
    exp_Dt = math.exp(D * t) if D * t < 700 else math.inf
    per_s = []
    offending: list[int] = []
    all_returns: list[tuple[int, NearReturn]] = []
    max_f = 0.0
    for k, s in enumerate(s_vals):
        y = flowed_delaunay(x, u_s(float(s)), T)
        inj = injectivity_radius(y)
        surfaces = [flowed_delaunay(y, h) for h in sample.elements]
        try:
            scan = near_returns(y, t, beta, constants.driver_grid, constants=constants, surfaces=surfaces)
        except BudgetExceeded:
            return DichotomyReport(t, D, beta, "inconclusive", diagnostics={"reason": "near-return budget", "s_index": k})
        by_base = scan.by_base()
        fvals = [
            margulis_f(r_proxy(surfaces[i], constants.C1, constants.c0) if i not in scan.r_values else scan.r_values[i], by_base.get(i, ()), constants.nu)
            for i in range(len(surfaces))
        ]
        f_max = max(fvals)
        max_f = max(max_f, f_max)
        ok_a = inj >= beta
        ok_b = not scan.collisions
        ok_c = f_max <= exp_Dt
        per_s.append(
            {
                "s": float(s),
                "inj": inj,
                "inj_ok": ok_a,
                "injective_ok": ok_b,
                "max_f_t": f_max,
                "f_ok": ok_c,
                "returns": len(scan),
                "sheet_ok": sheet_count_check(len(scan), t, constants.kappa4, constants.K_sheet),
                "scan": scan.summary(),
            }
        )
        if not (ok_a and ok_b and ok_c):
            offending.append(k)
            all_returns.extend((k, r) for r in scan)
    n = len(s_vals)
    good = (n - len(offending)) / n
    failing = 1.0 - good
    inj_ok_fraction = sum(p["inj_ok"] for p in per_s) / n
    option1 = {
        "good_set_measure": good,
        "inj_ok_fraction": inj_ok_fraction,
        "injective_ok": all(p["injective_ok"] for p in per_s),
        "max_f_t": max_f,
        "f_bound": exp_Dt,
        "deficit_bound": constants.C4 * beta**constants.alpha,
        "stat_tol": stat_tol(good, n),
    }
    diagnostics = {
        "samples": per_s,
        "flow_time": T,
        "t_prime": tp,
        "grid_spec": list(constants.driver_grid),
        "trigger": constants.K_bad * beta**constants.alpha,
        "offending": [float(s_vals[k]) for k in offending],
    }
    if failing > constants.K_bad * beta**constants.alpha:
        opt2 = _certify_option2(x, t, D, beta, all_returns, constants)
        if opt2 is not None:
            return DichotomyReport(t, D, beta, "option2", option1=option1, option2=opt2, diagnostics=diagnostics)
    if failing <= option1["deficit_bound"] + option1["stat_tol"]:
        return DichotomyReport(t, D, beta, "option1", option1=option1, diagnostics=diagnostics)
    return DichotomyReport(t, D, beta, "inconclusive", option1=option1, diagnostics=diagnostics)


def _certify_option2(x, t, D, beta, returns, constants: ClosingConstants) -> dict | None:
    evidence = None
    if not returns:
        scan = near_returns(x, t, beta, constants.driver_grid, constants=constants)
        returns = [(-1, r) for r in scan]
    if returns:
        evidence = min(returns, key=lambda kr: (kr[1].w_norm, kr[1].i1, kr[1].i2))[1]
    cert = None
    # candidates found at the base point itself can be certified directly
    for k, r in returns:
        if k == -1 and classify(r.gamma) == "hyperbolic":
            c = membership_certificate(x, snap_integers(r.gamma, 1e-6))
            if c.member:
                g = c.matrix
                cert = HyperbolicCertificate(g, g.trace, translation_length(g), (), [], c)
                break
    if cert is None:
        dirs = [(1.0, 0.0), (0.0, 1.0)] + short_directions(x)
        cert = find_hyperbolic_certificate(x, dirs)
    if cert is None:
        return None
    ell = cert.translation_length
    bound = math.exp(D * t) if D * t < 700 else math.inf
    if not (classify(cert.gamma) == "hyperbolic" and math.log(ell) <= bound):
        return None
    return {
        "near_return": None if evidence is None else evidence.to_json(),
        "gamma": list(cert.gamma.as_tuple()),
        "trace": cert.trace,
        "translation_length": ell,
        "log_translation_length": math.log(ell),
        "certificate": cert.to_json(),
        "periodic_point_distance": 0.0,
    }
