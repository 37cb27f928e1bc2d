"""Period coordinates, tangent vectors and the AGY norm.

A chart is a triangulated surface together with an integer table giving the
relative-homology class of every half-edge in a fixed basis. Tangent vectors
are complex coordinate vectors in that basis; the AGY norm, the exponential
map and the symplectic structure are all computed from the table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import _kernel
from .delaunay import WorkingTriangulation, canonical_id, delaunay, delaunay_with_payload, is_delaunay
from .errors import BudgetExceeded, ChartError, ChartMismatch, DegenerateForm, ExpDomainError, InvalidParameter
from .saddle import DEFAULT_BUDGET, COLLINEAR_TOL, Mesh, SaddleArrays, SaddleConnection, enumerate_arrays
from .sl2 import Mat2, as_mat2
from .surface import TAU_GEOM, TranslationSurface, apply_matrix

C1_DEFAULT = 2.0


def c2_from_c1(c1: float) -> float:
    return (c1 + 1.0) ** 2 * c1


@dataclass(eq=False)
class PeriodChart:
    """Local period coordinates at a triangulated surface.

    Attributes
    ----------
    base : TranslationSurface
        Triangulated surface (Delaunay when built by :func:`period_chart`).
    basis : tuple of (int, int)
        Half-edges of the triangulation on which the chart was first built.
    periods : ndarray of complex, shape (h,)
        Holonomy of each basis class.
    coords : ndarray of int64, shape (F, 3, h)
        Class of every half-edge of ``base`` in the basis.
    """

    base: TranslationSurface
    basis: tuple[tuple[int, int], ...]
    periods: np.ndarray
    coords: np.ndarray
    _enum_cache: dict = field(default_factory=dict, repr=False)
    _forms: Any = field(default=None, repr=False)
    _frame: Any = field(default=None, repr=False)

    @property
    def h(self) -> int:
        return int(self.periods.shape[0])

    @property
    def chart_id(self) -> str:
        return canonical_id(self.base)

    def edge_values(self, v: np.ndarray) -> np.ndarray:
        """Values of a cohomology class on every half-edge, shape ``(F, 3)``."""
        return self.coords @ np.asarray(v, dtype=complex)

    def saddles(self, L: float, budget: int = DEFAULT_BUDGET) -> SaddleArrays:
        """Saddle connections of ``base`` up to ``L`` with basis coordinates (cached)."""
        key = float(L)
        res = self._enum_cache.get(key)
        if res is None:
            res = enumerate_arrays(self.base, key, coords=self.coords, budget=budget)
            self._enum_cache[key] = res
        return res

    def injectivity_radius(self) -> float:
        hol = self.coords.reshape(-1, self.h) @ self.periods
        return float(np.min(np.abs(hol))) if is_delaunay(self.base) else _inj_of(self.base)

    def to_json(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "basis": [list(b) for b in self.basis],
            "periods": [[z.real, z.imag] for z in self.periods],
        }


def _inj_of(S: TranslationSurface) -> float:
    from .saddle import injectivity_radius

    return injectivity_radius(S)


@dataclass(frozen=True)
class TangentVector:
    """Serializable tangent vector tied to a chart id."""

    coords: tuple[complex, ...]
    chart_id: str

    def to_json(self) -> dict:
        return {"chart_id": self.chart_id, "coords": [[z.real, z.imag] for z in self.coords]}

    @classmethod
    def of(cls, chart: PeriodChart, v: Sequence[complex]) -> "TangentVector":
        return cls(tuple(complex(z) for z in v), chart.chart_id)


def _basis_from_dual_tree(T: TranslationSurface) -> tuple[list[tuple[int, int]], np.ndarray]:
    """Pick basis edges and solve for the class of every half-edge.

    The dual graph's maximum-length spanning tree is removed; the remaining
    (shortest) edges form a basis of relative homology, and tree edges are
    resolved leaf-first from the triangle relations ``e0 + e1 + e2 = 0``.
    """
    F = len(T.polygons)
    edges = []
    for (t, k), (u, m) in T.gluings:
        x, y = T.polygons[t][k]
        edges.append((-math.hypot(x, y), (t, k), (u, m)))
    edges.sort()
    parent = list(range(F))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = []
    basis = []
    for _, a, b in edges:
        ra, rb = find(a[0]), find(b[0])
        if ra != rb:
            parent[ra] = rb
            tree.append((a, b))
        else:
            basis.append(a)
    # basis ordered shortest first for readability
    basis.sort(key=lambda he: (math.hypot(*T.polygons[he[0]][he[1]]), he))
    h = len(basis)
    coords = np.zeros((F, 3, h), dtype=np.int64)
    known = np.zeros((F, 3), dtype=bool)
    for i, (t, k) in enumerate(basis):
        u, m = T.partner(t, k)
        coords[t, k, i] = 1
        coords[u, m, i] = -1
        known[t, k] = known[u, m] = True
    adj: dict[int, list[tuple[int, int, int, int]]] = {t: [] for t in range(F)}
    for (t, k), (u, m) in tree:
        adj[t].append((k, u, m, 0))
        adj[u].append((m, t, k, 0))
    # iterative post-order from triangle 0
    order = []
    par_edge: dict[int, tuple[int, int] | None] = {0: None}
    stack = [0]
    while stack:
        t = stack.pop()
        order.append(t)
        for k, u, m, _ in adj[t]:
            if u not in par_edge:
                par_edge[u] = (u, m)
                stack.append(u)
    if len(order) != F:
        raise ChartError("dual tree does not span")
    for t in reversed(order[1:]):
        _, k = par_edge[t]  # type: ignore[misc]
        others = [j for j in range(3) if j != k]
        if not all(known[t, j] for j in others):
            raise ChartError("tree resolution out of order")
        val = -(coords[t, others[0]] + coords[t, others[1]])
        coords[t, k] = val
        u, m = T.partner(t, k)
        coords[u, m] = -val
        known[t, k] = known[u, m] = True
    return basis, coords


def period_chart(S: TranslationSurface, tol: float = TAU_GEOM) -> PeriodChart:
    """Build a chart on the Delaunay triangulation of ``S``.

    Raises
    ------
    ChartError
        If the resolved coordinates fail to reproduce the edge vectors.
    """
    T = S if S.is_triangulated and is_delaunay(S) else delaunay(S)
    basis, coords = _basis_from_dual_tree(T)
    periods = np.array([complex(*T.polygons[t][k]) for t, k in basis], dtype=complex)
    return _checked_chart(T, tuple(basis), periods, coords, tol)


def _checked_chart(T, basis, periods, coords, tol) -> PeriodChart:
    vec = np.asarray(T.polygons, dtype=float)
    rebuilt = coords @ periods
    err = max(np.max(np.abs(rebuilt.real - vec[:, :, 0])), np.max(np.abs(rebuilt.imag - vec[:, :, 1])))
    scale_ = max(1.0, float(np.max(np.abs(vec))))
    if not err <= 1e3 * tol * scale_:
        raise ChartError(f"chart periods reproduce edges only to {err:.3e}")
    return PeriodChart(T, tuple(basis), periods, coords)


def chart_on(T: TranslationSurface, coords: np.ndarray, basis: Sequence[tuple[int, int]] = ()) -> PeriodChart:
    """Chart on a given triangulation whose half-edge classes are already known."""
    h = coords.shape[2]
    # recover periods by least squares over all half-edges
    vec = np.asarray(T.polygons, dtype=float)
    A = coords.reshape(-1, h).astype(float)
    z = vec[:, :, 0].reshape(-1) + 1j * vec[:, :, 1].reshape(-1)
    periods, *_ = np.linalg.lstsq(A, z, rcond=None)
    if np.linalg.matrix_rank(A) < h:
        raise ChartError("half-edge classes do not span the basis")
    return _checked_chart(T, tuple(basis), periods, coords, TAU_GEOM)


def base_change(old: PeriodChart, new: PeriodChart, old_coords_on_new: np.ndarray) -> np.ndarray:
    """Integer matrix ``M`` with ``new_basis_i = sum_j M[i, j] old_basis_j``.

    ``old_coords_on_new`` is the old chart's class table transported onto
    the new triangulation (e.g. through flips).
    """
    rows = [old_coords_on_new[t, k] for t, k in new.basis]
    return np.array(rows, dtype=np.int64)


def saddle_coordinates(chart: PeriodChart, sc: SaddleConnection) -> np.ndarray:
    """Basis coordinates of a connection, replayed from its crossing sequence."""
    F = chart.coords.shape[0]
    t0, k0 = sc.start_corner
    if not (0 <= t0 < F and 0 <= k0 < 3):
        raise ChartMismatch("start corner not in chart")
    C = chart.coords
    if not sc.crossing_sequence:
        return C[t0, k0].copy()
    seq = sc.crossing_sequence
    if seq[0] != (t0, (k0 + 1) % 3):
        raise ChartMismatch("crossing sequence does not leave the start corner")
    c_r = C[t0, k0].copy()
    c_l = -C[t0, (k0 + 2) % 3]
    mesh = Mesh.of(chart.base)
    prev = seq[0]
    for t, e in seq[1:]:
        u, j = int(mesh.pt[prev]), int(mesh.pk[prev])
        if t != u:
            raise ChartMismatch("crossing sequence is not a path in the chart triangulation")
        if e == (j + 1) % 3:
            c_l = c_r + C[u, e]
        elif e == (j + 2) % 3:
            c_r = c_l - C[u, e]
        else:
            raise ChartMismatch("crossing sequence re-crosses its entry edge")
        prev = (t, e)
    u, j = int(mesh.pt[prev]), int(mesh.pk[prev])
    return c_r + C[u, (j + 1) % 3]


def evaluate_on_saddle(chart: PeriodChart, v: Sequence[complex], sc: SaddleConnection) -> complex:
    """``v(sc)``: the integer combination of ``v`` given by the class of ``sc``."""
    c = saddle_coordinates(chart, sc)
    return complex(c @ np.asarray(v, dtype=complex))


def default_cutoff(chart: PeriodChart) -> float:
    return max(4.0, 8.0 * chart.injectivity_radius())


def agy_norms(chart: PeriodChart, V: np.ndarray, L_cut: float | None = None) -> np.ndarray:
    """AGY norms of the rows of ``V`` (shape ``(n, h)``), truncated at ``L_cut``."""
    V = np.atleast_2d(np.asarray(V, dtype=complex))
    if L_cut is None:
        L_cut = default_cutoff(chart)
    inj = chart.injectivity_radius()
    if L_cut < 2.0 * inj * (1 - 1e-12):
        raise InvalidParameter(f"L_cut={L_cut} below 2 * inj = {2 * inj}")
    res = chart.saddles(L_cut)
    hol = res.hol[:, 0] + 1j * res.hol[:, 1]
    vals = res.chain.astype(float) @ V.T  # (N, n)
    return np.max(np.abs(vals) / np.abs(hol)[:, None], axis=0)


def agy_norm(chart: PeriodChart, v: Sequence[complex], L_cut: float | None = None, return_cut: bool = False):
    """Truncated AGY norm ``max |v(s) / Hol(s)|`` over ``|Hol(s)| <= L_cut``.

    Parameters
    ----------
    chart : PeriodChart
    v : complex sequence of length ``h``
    L_cut : float, optional
        Defaults to ``max(4, 8 inj(base))``; must be at least ``2 inj``.
    return_cut : bool
        Also return the cutoff used.
    """
    L = default_cutoff(chart) if L_cut is None else float(L_cut)
    val = float(agy_norms(chart, np.asarray(v, dtype=complex)[None, :], L)[0])
    return (val, L) if return_cut else val


def stabilization_cutoff(chart: PeriodChart, v: Sequence[complex], L0: float | None = None, rtol: float = 1e-12, max_doublings: int = 6):
    """Smallest doubled cutoff ``L*`` with ``norm(L*) == norm(2 L*)``; ``None`` if not reached."""
    L = default_cutoff(chart) if L0 is None else L0
    prev = agy_norm(chart, v, L)
    for _ in range(max_doublings):
        nxt = agy_norm(chart, v, 2 * L)
        if abs(nxt - prev) <= rtol * max(1.0, prev):
            return L, prev
        L *= 2
        prev = nxt
    return None, prev


# ---------------------------------------------------------------- exp map


def _edges_from_periods(coords: np.ndarray, P: np.ndarray) -> np.ndarray:
    z = coords @ P
    return np.stack([z.real, z.imag], axis=-1)


def _positive(vec: np.ndarray, rel: float = 1e-12) -> bool:
    cr = vec[:, 0, 0] * vec[:, 1, 1] - vec[:, 0, 1] * vec[:, 1, 0]
    sc = np.maximum(np.sum(vec[:, 0] ** 2, axis=1), np.sum(vec[:, 1] ** 2, axis=1))
    return bool(np.all(cr > rel * sc))


def _walk(chart: PeriodChart, v: np.ndarray, taus: Sequence[float], min_step: float = 2.0**-20):
    """Follow ``P + tau v`` through increasing ``taus``.

    Yields ``(tau, W, coords)`` where ``W`` is a Delaunay working
    triangulation at ``P + tau v`` and ``coords`` its class table. Steps are
    halved when triangles would degenerate, and the triangulation is
    re-flipped after each accepted step with the class table riding along.
    """
    W = WorkingTriangulation.from_surface(chart.base, payload=chart.coords)
    P0 = chart.periods
    coords = chart.coords
    tau = 0.0
    step = 1.0
    for target in taus:
        if target < tau:
            raise InvalidParameter("path parameters must increase")
        while tau < target:
            nxt = min(target, tau + step)
            vec = _edges_from_periods(coords, P0 + nxt * v)
            if not _positive(vec):
                step /= 2
                if step < min_step:
                    raise ExpDomainError(f"triangles degenerate near tau={tau:.6f}")
                continue
            for t in range(len(W.V)):
                W.V[t] = [(float(vec[t, k, 0]), float(vec[t, k, 1])) for k in range(3)]
            if W.make_delaunay():
                coords = W.payload_array()
            tau = nxt
            step = min(1.0, step * 2)
        yield tau, W, coords


def exp_chart(chart: PeriodChart, v: Sequence[complex]) -> PeriodChart:
    """Chart at ``exp(v)`` in the same basis.

    The straight path ``P + tau v`` is followed with adaptive steps and
    Delaunay flips, so large displacements stay well conditioned.

    Raises
    ------
    ExpDomainError
        If triangles degenerate even for tiny steps.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape != chart.periods.shape or not np.all(np.isfinite(v)):
        raise InvalidParameter("tangent vector has wrong shape or non-finite entries")
    if not np.any(v):
        return chart
    for _, W, coords in _walk(chart, v, [1.0]):
        pass
    T = W.to_surface(chart.base.label)
    return _checked_chart(T, chart.basis, chart.periods + v, coords, TAU_GEOM)


def exp_map(chart: PeriodChart, v: Sequence[complex]) -> TranslationSurface:
    """Surface whose periods are ``chart.periods + v``."""
    return exp_chart(chart, v).base


def _partner_arrays(W: WorkingTriangulation) -> tuple[np.ndarray, np.ndarray]:
    P = np.asarray(W.P, dtype=np.int64)
    return np.ascontiguousarray(P[:, :, 0]), np.ascontiguousarray(P[:, :, 1])


def norms_along_path(
    chart: PeriodChart, v: Sequence[complex], W: np.ndarray, taus: Sequence[float], L_cut: float
) -> np.ndarray:
    """AGY norms of the rows of ``W`` at ``P + tau v`` for increasing ``taus``.

    The cutoff ``L_cut`` is held fixed along the path. Returns an array of
    shape ``(len(taus), n)``.
    """
    v = np.asarray(v, dtype=complex)
    Wv = np.atleast_2d(np.asarray(W, dtype=complex))
    out = np.empty((len(taus), Wv.shape[0]))
    F = len(chart.base.polygons)
    starts = np.array([(t, k) for t in range(F) for k in range(3)], dtype=np.int64)
    for i, (_, tri, coords) in enumerate(_walk(chart, v, taus)):
        vec = np.ascontiguousarray(np.asarray(tri.V, dtype=np.float64))
        pt, pk = _partner_arrays(tri)
        hol, _, _, chain, _, _, _, complete = _kernel.enumerate_kernel(
            vec, pt, pk, np.ascontiguousarray(coords, dtype=np.int64), starts, float(L_cut), DEFAULT_BUDGET, COLLINEAR_TOL
        )
        if not complete:
            raise BudgetExceeded("wedge budget exhausted along path")
        z = hol[:, 0] + 1j * hol[:, 1]
        vals = chain.astype(float) @ Wv.T
        out[i] = np.max(np.abs(vals) / np.abs(z)[:, None], axis=0)
    return out


def path_length(chart: PeriodChart, v: Sequence[complex], L_cut: float, n: int = 100) -> float:
    """Riemann-sum AGY length of the straight path from ``P`` to ``P + v``."""
    taus = (np.arange(n) + 0.5) / n
    norms = norms_along_path(chart, v, np.asarray(v)[None, :], taus, L_cut)[:, 0]
    return float(np.mean(norms))


# ---------------------------------------------------------------- splittings


def stable_unstable_split(v: Sequence[complex]) -> tuple[np.ndarray, np.ndarray]:
    """``(real part, i * imaginary part)``."""
    v = np.asarray(v, dtype=complex)
    return v.real.astype(complex), 1j * v.imag


def _triangle_forms(chart: PeriodChart):
    if chart._forms is None:
        vec = np.asarray(chart.base.polygons, dtype=float)
        M = vec[:, :2, :]  # rows e0, e1
        det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
        inv = np.empty_like(M)
        inv[:, 0, 0] = M[:, 1, 1] / det
        inv[:, 0, 1] = -M[:, 0, 1] / det
        inv[:, 1, 0] = -M[:, 1, 0] / det
        inv[:, 1, 1] = M[:, 0, 0] / det
        chart._forms = (inv, 0.5 * det)
    return chart._forms


def _one_forms(chart: PeriodChart, v: np.ndarray) -> np.ndarray:
    """Constant 1-form ``(alpha_x, alpha_y)`` on each triangle representing ``v``."""
    inv, _ = _triangle_forms(chart)
    vals = chart.coords[:, :2, :] @ np.asarray(v, dtype=complex)  # (F, 2)
    return np.einsum("fij,fj->fi", inv, vals)


def wedge(chart: PeriodChart, v: Sequence[complex], w: Sequence[complex]) -> complex:
    """``int v ^ w`` (complex bilinear) via piecewise-constant representatives."""
    _, areas = _triangle_forms(chart)
    a = _one_forms(chart, np.asarray(v, dtype=complex))
    b = _one_forms(chart, np.asarray(w, dtype=complex))
    return complex(np.sum(areas * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])))


def symplectic_pairing(chart: PeriodChart, v: Sequence[complex], w: Sequence[complex]) -> complex:
    """``(i/2) int v ^ conj(w)``; equals the area for ``v = w = [omega]``."""
    return 0.5j * wedge(chart, v, np.conj(np.asarray(w, dtype=complex)))


def _standard_frame(chart: PeriodChart) -> tuple[np.ndarray, np.ndarray, float]:
    """``(Omega(e_k, Re[w]), Omega(e_k, Im[w]), Omega(Re[w], Im[w]))`` for basis vectors ``e_k``."""
    if chart._frame is None:
        inv, areas = _triangle_forms(chart)
        B = np.einsum("fij,fjk->fik", inv, chart.coords[:, :2, :].astype(float))  # (F, 2, h)
        re = B @ chart.periods.real
        im = B @ chart.periods.imag
        wR = np.einsum("f,fk->k", areas, B[:, 0, :] * re[:, 1, None] - B[:, 1, :] * re[:, 0, None])
        wI = np.einsum("f,fk->k", areas, B[:, 0, :] * im[:, 1, None] - B[:, 1, :] * im[:, 0, None])
        den = float(chart.periods.real @ wI)
        if abs(den) <= 1e-14:
            raise DegenerateForm("symplectic form vanishes on the standard plane")
        chart._frame = (wR, wI, den)
    return chart._frame


def split_batch(chart: PeriodChart, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Balanced parts and standard coefficients of the rows of ``V``.

    Returns ``(W, M)`` with ``W`` of shape ``(n, h)`` and ``M`` of shape
    ``(n, 2, 2)`` such that ``V = W + M . [omega]`` row by row.
    """
    V = np.atleast_2d(np.asarray(V, dtype=complex))
    wR, wI, den = _standard_frame(chart)
    M = np.empty((V.shape[0], 2, 2))
    W = np.empty(V.shape, dtype=complex)
    for row, part in enumerate((V.real, V.imag)):
        a = part @ wI / den
        b = -(part @ wR) / den
        M[:, row, 0] = a
        M[:, row, 1] = b
        bal = part - a[:, None] * chart.periods.real - b[:, None] * chart.periods.imag
        if row == 0:
            W.real = bal
        else:
            W.imag = bal
    return W, M


def standard_coefficients(chart: PeriodChart, v: Sequence[complex]) -> np.ndarray:
    """Matrix ``M`` in gl(2,R) with ``standard part of v = M . [omega]``.

    ``M`` acts on each period viewed as a real pair ``(x, y)``.
    """
    return split_batch(chart, np.asarray(v, dtype=complex)[None, :])[1][0]


def balanced_projection(chart: PeriodChart, v: Sequence[complex]) -> np.ndarray:
    """Component of ``v`` symplectically orthogonal to ``Re[omega]`` and ``Im[omega]``.

    Real and imaginary parts are projected separately (``u - a Re[omega] -
    b Im[omega]`` with ``a, b`` fixed by the two orthogonality conditions),
    so the projection is complex linear, idempotent, and kills ``[omega]``.
    """
    return split_batch(chart, np.asarray(v, dtype=complex)[None, :])[0][0]


def standard_projection(chart: PeriodChart, v: Sequence[complex]) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return v - balanced_projection(chart, v)


# ---------------------------------------------------------------- pushforward


def apply_to_coords(A: Mat2, v: Sequence[complex]) -> np.ndarray:
    a, b, c, d = A.as_tuple()
    v = np.asarray(v, dtype=complex)
    x, y = v.real, v.imag
    return (a * x + b * y) + 1j * (c * x + d * y)


def transport_chart(chart: PeriodChart, A: Mat2 | Sequence[float], redelaunay: bool = True) -> PeriodChart:
    """Chart at ``A . base`` in the same basis (triangulation re-flipped if asked)."""
    M = as_mat2(A)
    T = apply_matrix(M, chart.base)
    coords = chart.coords
    if redelaunay:
        T, coords = delaunay_with_payload(T, coords)
    return _checked_chart(T, chart.basis, apply_to_coords(M, chart.periods), coords, TAU_GEOM)


def pushforward(A: Mat2 | Sequence[float], chart: PeriodChart, v: Sequence[complex]) -> np.ndarray:
    """Coordinates of ``A_* v`` in the transported chart (see :func:`transport_chart`)."""
    return apply_to_coords(as_mat2(A), v)
