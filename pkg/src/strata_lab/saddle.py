"""Saddle connections, injectivity radius, length functions and cylinders."""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernel
from .delaunay import delaunay
from .errors import BudgetExceeded, InvalidParameter, MalformedSurface, NonPeriodicDirection, NumericalDegeneracy
from .sl2 import Mat2, as_mat2, singular_values
from .surface import TAU_GEOM, TranslationSurface, apply_matrix, area, corner_classes

DEFAULT_BUDGET = 10_000_000
COLLINEAR_TOL = 1e-12


@dataclass(frozen=True)
class SaddleConnection:
    """An oriented saddle connection on a triangulated surface.

    Attributes
    ----------
    holonomy : (float, float)
        Displacement vector.
    start_class, end_class : int
        Vertex classes of the endpoints.
    crossing_sequence : tuple of (int, int)
        Half-edges ``(triangle, edge)`` exited, in order; empty when the
        connection is itself a triangle edge.
    start_corner : (int, int)
        Triangle corner the connection leaves from.
    """

    holonomy: tuple[float, float]
    start_class: int
    end_class: int
    crossing_sequence: tuple[tuple[int, int], ...]
    start_corner: tuple[int, int]

    @property
    def length(self) -> float:
        return math.hypot(*self.holonomy)

    @property
    def complex(self) -> complex:
        return complex(*self.holonomy)

    def to_row(self) -> dict:
        return {
            "hol_x": self.holonomy[0],
            "hol_y": self.holonomy[1],
            "length": self.length,
            "start": self.start_class,
            "end": self.end_class,
        }


@dataclass
class Mesh:
    """Array form of a triangulated surface, as consumed by the kernel."""

    vec: np.ndarray
    pt: np.ndarray
    pk: np.ndarray
    vclass: np.ndarray

    @classmethod
    def of(cls, T: TranslationSurface) -> "Mesh":
        cached = _MESH_CACHE.get(T)
        if cached is not None:
            return cached
        if not T.is_triangulated:
            raise MalformedSurface("mesh needs a triangulated surface")
        F = len(T.polygons)
        vec = np.asarray(T.polygons, dtype=np.float64).reshape(F, 3, 2)
        pt = np.empty((F, 3), dtype=np.int64)
        pk = np.empty((F, 3), dtype=np.int64)
        for t in range(F):
            for k in range(3):
                pt[t, k], pk[t, k] = T.partner(t, k)
        cls_map = corner_classes(T)
        vclass = np.array([[cls_map[(t, k)] for k in range(3)] for t in range(F)], dtype=np.int64)
        mesh = cls(vec, pt, pk, vclass)
        _MESH_CACHE[T] = mesh
        return mesh


_MESH_CACHE: "weakref.WeakKeyDictionary[TranslationSurface, Mesh]" = weakref.WeakKeyDictionary()
_DELAUNAY_CACHE: "weakref.WeakKeyDictionary[TranslationSurface, TranslationSurface]" = weakref.WeakKeyDictionary()


def working_triangulation(S: TranslationSurface) -> TranslationSurface:
    """``S`` itself when triangulated, else its Delaunay triangulation."""
    if S.is_triangulated:
        return S
    D = _DELAUNAY_CACHE.get(S)
    if D is None:
        D = delaunay(S)
        _DELAUNAY_CACHE[S] = D
    return D


@dataclass
class SaddleArrays:
    """Raw enumeration output (array form, no Python objects per connection)."""

    surface: TranslationSurface
    L: float
    hol: np.ndarray
    start: np.ndarray
    end: np.ndarray
    chain: np.ndarray
    path_off: np.ndarray
    path_data: np.ndarray
    expansions: int
    complete: bool
    lengths: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.lengths = np.hypot(self.hol[:, 0], self.hol[:, 1]) if len(self.hol) else np.zeros(0)

    def __len__(self) -> int:
        return len(self.hol)

    def connection(self, i: int) -> SaddleConnection:
        mesh = Mesh.of(self.surface)
        a, b = self.path_off[i], self.path_off[i + 1]
        path = tuple((int(t), int(e)) for t, e in self.path_data[a:b])
        st = (int(self.start[i, 0]), int(self.start[i, 1]))
        en = (int(self.end[i, 0]), int(self.end[i, 1]))
        return SaddleConnection(
            holonomy=(float(self.hol[i, 0]), float(self.hol[i, 1])),
            start_class=int(mesh.vclass[st]),
            end_class=int(mesh.vclass[en]),
            crossing_sequence=path,
            start_corner=st,
        )

    def sorted_order(self) -> np.ndarray:
        ang = np.arctan2(self.hol[:, 1], self.hol[:, 0]) if len(self.hol) else np.zeros(0)
        return np.lexsort((self.start[:, 1], self.start[:, 0], ang, np.round(self.lengths, 12)))


def enumerate_arrays(
    S: TranslationSurface,
    L: float,
    coords: np.ndarray | None = None,
    budget: int = DEFAULT_BUDGET,
    starts: np.ndarray | None = None,
) -> SaddleArrays:
    """Kernel-level enumeration on ``working_triangulation(S)``.

    ``coords`` (shape ``(F, 3, h)``) attaches homology coordinates to each
    emitted connection. Raises :class:`BudgetExceeded` with the partial
    arrays when the wedge budget runs out.
    """
    if not L > 0:
        raise InvalidParameter("L must be positive")
    T = working_triangulation(S)
    mesh = Mesh.of(T)
    F = mesh.vec.shape[0]
    if coords is None:
        coords = np.zeros((F, 3, 0), dtype=np.int64)
    if starts is None:
        starts = np.array([(t, k) for t in range(F) for k in range(3)], dtype=np.int64)
    out = _kernel.enumerate_kernel(
        mesh.vec, mesh.pt, mesh.pk, np.ascontiguousarray(coords, dtype=np.int64), starts, float(L), int(budget), COLLINEAR_TOL
    )
    res = SaddleArrays(T, float(L), *out)
    if not res.complete:
        raise BudgetExceeded(f"wedge budget {budget} exhausted at L={L}", partial=res)
    return res


def enumerate_saddle_connections(
    S: TranslationSurface, L: float, budget: int = DEFAULT_BUDGET
) -> tuple[SaddleConnection, ...]:
    """All oriented saddle connections with ``|Hol| <= L``.

    Enumeration runs on ``S`` if it is triangulated (so crossing sequences
    refer to its triangles) and on its Delaunay triangulation otherwise.
    Results are sorted by length, then angle, then start corner.
    """
    res = enumerate_arrays(S, L, budget=budget)
    return tuple(res.connection(int(i)) for i in res.sorted_order())


def holonomy_multiset(S: TranslationSurface, L: float, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Holonomy vectors of length at most ``L`` sorted lexicographically."""
    res = enumerate_arrays(S, L, budget=budget)
    h = res.hol
    return h[np.lexsort((h[:, 1], h[:, 0]))] if len(h) else h


def injectivity_radius(S: TranslationSurface) -> float:
    """Length of the shortest saddle connection.

    The shortest connection is always an edge of a Delaunay triangulation
    (the disk on it as diameter is empty), so the minimal Delaunay edge
    length is the answer.
    """
    D = S if S.is_triangulated and _is_cached_delaunay(S) else delaunay(S)
    r = float(_kernel.min_edge_length(Mesh.of(D).vec))
    if not r > 0:
        raise NumericalDegeneracy("zero-length edge")
    return r


def _is_cached_delaunay(S: TranslationSurface) -> bool:
    from .delaunay import is_delaunay

    return is_delaunay(S)


def injectivity_radius_along(
    S: TranslationSurface, A: Mat2 | Sequence[float], budget: int = DEFAULT_BUDGET, condition_at: float = math.exp(3.0)
) -> float:
    """``injectivity_radius(apply_matrix(A, S))``.

    For ``sigma_max(A) <= condition_at`` the connections of ``S`` are pulled
    back: any connection of ``A S`` shorter than ``eps`` comes from one of
    ``S`` shorter than ``sigma_max(A) eps``, and a Delaunay edge of ``S``
    provides a witness ``eps``. Larger matrices are handled by re-Delaunaying
    ``A S`` to keep triangles well shaped.
    """
    M = as_mat2(A)
    smax, _ = singular_values(M)
    if smax > condition_at:
        return injectivity_radius(apply_matrix(M, S))
    D = working_triangulation(S) if not S.is_triangulated else S
    vec = Mesh.of(D).vec.reshape(-1, 2)
    img = vec @ M.as_array().T
    eps = float(np.min(np.hypot(img[:, 0], img[:, 1])))
    res = enumerate_arrays(D, smax * eps * (1 + 1e-12), budget=budget)
    img = res.hol @ M.as_array().T
    return float(np.min(np.hypot(img[:, 0], img[:, 1])))


def length_function(S: TranslationSurface | None, sc: SaddleConnection | Sequence[float], s: float | np.ndarray):
    """``|u_s Hol(sc)| = sqrt((x + s y)^2 + y^2)``; vectorised over ``s``."""
    x, y = sc.holonomy if isinstance(sc, SaddleConnection) else sc
    return np.sqrt((x + np.asarray(s) * y) ** 2 + y * y) if isinstance(s, np.ndarray) else math.hypot(x + s * y, y)


# ---------------------------------------------------------------- ray tracing


def _local_vertices(vec: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p0 = np.zeros(2)
    p1 = vec[t, 0].copy()
    p2 = p1 + vec[t, 1]
    return p0, p1, p2


def _exit_edge(P: list, p: np.ndarray, d: np.ndarray, skip: int, tol: float) -> tuple[int, float]:
    """Edge of the triangle (vertices ``P``) where the ray ``p + s d`` leaves it."""
    best_k = -1
    best_s = math.inf
    for k in range(3):
        if k == skip:
            continue
        a = P[k]
        b = P[(k + 1) % 3]
        e = b - a
        den = d[0] * e[1] - d[1] * e[0]
        if den <= tol * np.linalg.norm(e) * np.linalg.norm(d):
            # ray runs parallel to this edge or back into the triangle
            continue
        s = ((a[0] - p[0]) * e[1] - (a[1] - p[1]) * e[0]) / den
        if s < best_s:
            best_s = s
            best_k = k
    return best_k, max(best_s, 0.0)


@dataclass
class _TraceStep:
    tri: int
    enter: np.ndarray
    leave: np.ndarray
    length_before: float


class RayTracer:
    """Straight-line flow on a triangulated surface (local coordinates per triangle)."""

    def __init__(self, T: TranslationSurface, tol: float = 1e-9):
        self.T = T
        self.mesh = Mesh.of(T)
        self.tol = tol
        self.local = [_local_vertices(self.mesh.vec, t) for t in range(len(T.polygons))]

    def trace(self, tri: int, p: np.ndarray, d: np.ndarray, max_len: float, entered_via: int = -1):
        """Follow the ray from local point ``p`` of ``tri`` in unit direction ``d``.

        Yields :class:`_TraceStep` records; stops after ``max_len`` or when
        the ray hits a vertex (the final step then has ``leave`` at it and
        ``hit_vertex`` set on the tracer).
        """
        self.hit_vertex = None
        total = 0.0
        t = tri
        skip = entered_via
        pos = np.array(p, dtype=float)
        while total <= max_len:
            P = self.local[t]
            k, s = _exit_edge(P, pos, d, skip, self.tol)
            if k < 0:
                raise NumericalDegeneracy("ray tracer lost its triangle")
            q = pos + s * d
            a = P[k]
            b = P[(k + 1) % 3]
            scale_ = max(1.0, float(np.linalg.norm(b - a)))
            for vi, vp in ((k, a), ((k + 1) % 3, b)):
                if np.linalg.norm(q - vp) <= self.tol * scale_:
                    yield _TraceStep(t, pos, vp.copy(), total)
                    self.hit_vertex = (t, vi, total + s)
                    return
            yield _TraceStep(t, pos, q, total)
            total += s
            u = int(self.mesh.pt[t, k])
            j = int(self.mesh.pk[t, k])
            # edge k of t is edge j of u reversed: the point at fraction lam
            # from a toward b sits at fraction (1 - lam) from u's vertex j
            lam = float(np.dot(q - a, b - a) / np.dot(b - a, b - a))
            Pu = self.local[u]
            pos = Pu[j] + (1.0 - lam) * (Pu[(j + 1) % 3] - Pu[j])
            t = u
            skip = j


@dataclass(frozen=True)
class Cylinder:
    """A maximal flat cylinder in a periodic direction."""

    direction: tuple[float, float]
    circumference: float
    height: float
    core_squares_or_faces: tuple[int, ...]

    @property
    def modulus(self) -> float:
        return self.height / self.circumference

    @property
    def twist(self) -> float:
        """Full-twist shear ``circumference / height``."""
        return self.circumference / self.height

    def to_row(self) -> dict:
        return {
            "dir_x": self.direction[0],
            "dir_y": self.direction[1],
            "circumference": self.circumference,
            "height": self.height,
            "modulus": self.modulus,
        }


def _rotation_to_horizontal(direction: Sequence[float]) -> Mat2:
    dx, dy = direction
    n = math.hypot(dx, dy)
    if n == 0:
        raise InvalidParameter("direction must be non-zero")
    c, s = dx / n, dy / n
    return Mat2._unchecked(c, s, -s, c)


def horizontal_saddle_connections(T: TranslationSurface, max_len: float, tol: float = 1e-9):
    """Trace every eastward separatrix of a triangulated surface.

    Returns a list of ``(length, chords)`` where ``chords`` holds
    ``(triangle, y_local, x0, x1)`` segments; raises
    :class:`NonPeriodicDirection` if some separatrix does not reach a vertex.
    """
    tracer = RayTracer(T, tol)
    vec = tracer.mesh.vec
    d = np.array([1.0, 0.0])
    out = []
    for t in range(vec.shape[0]):
        for k in range(3):
            e = vec[t, k]
            f = -vec[t, (k + 2) % 3]
            ne, nf = np.linalg.norm(e), np.linalg.norm(f)
            cr_e = e[0] * d[1] - e[1] * d[0]  # d left of e  <=> cross(e, d) > 0
            cr_f = d[0] * f[1] - d[1] * f[0]  # d right of f <=> cross(d, f) > 0
            along = abs(e[1]) <= tol * ne and e[0] > 0
            if not along and not (cr_e > tol * ne and cr_f > tol * nf):
                continue
            P = tracer.local[t]
            if along:
                length = float(e[0])
                y = float(P[k][1])
                x0 = float(min(P[k][0], P[(k + 1) % 3][0]))
                u, m = int(tracer.mesh.pt[t, k]), int(tracer.mesh.pk[t, k])
                Pu = tracer.local[u]
                xu0 = float(min(Pu[m][0], Pu[(m + 1) % 3][0]))
                chords = [(t, y, x0, x0 + length), (u, float(Pu[m][1]), xu0, xu0 + length)]
                out.append((length, chords, (t, k)))
                continue
            chords = []
            steps = list(tracer.trace(t, P[k], d, max_len))
            if tracer.hit_vertex is None:
                raise NonPeriodicDirection(f"separatrix from corner {(t, k)} does not close within {max_len}")
            for st in steps:
                chords.append((st.tri, float(st.enter[1]), float(st.enter[0]), float(st.leave[0])))
            out.append((tracer.hit_vertex[2], chords, (t, k)))
    return out


def cylinder_decomposition(
    S: TranslationSurface, direction: Sequence[float], max_len: float | None = None, tol: float = 1e-9
) -> list[Cylinder]:
    """Cylinders of a completely periodic direction.

    The direction is rotated to horizontal; eastward separatrices are traced
    to their endpoints, then from the midpoint of each horizontal saddle
    connection a vertical ray measures the height of the cylinder above it,
    and the core leaf at half height gives its circumference.

    Raises
    ------
    NonPeriodicDirection
        A separatrix does not reach a singularity within ``max_len``.
    """
    R = _rotation_to_horizontal(direction)
    dvec = (direction[0] / math.hypot(*direction), direction[1] / math.hypot(*direction))
    T = delaunay(apply_matrix(R, S))
    A = area(T)
    if max_len is None:
        max_len = 200.0 * math.sqrt(A)
    saddles = horizontal_saddle_connections(T, max_len, tol)
    tracer = RayTracer(T, tol)
    chords_by_tri: dict[int, list[tuple[float, float, float]]] = {}
    for _, chords, _ in saddles:
        for t, y, x0, x1 in chords:
            chords_by_tri.setdefault(t, []).append((y, min(x0, x1), max(x0, x1)))
    up = np.array([0.0, 1.0])
    east = np.array([1.0, 0.0])
    found: dict[tuple, Cylinder] = {}
    for length, chords, _ in saddles:
        # point at a generic fraction of the connection avoids symmetric vertex hits
        for frac in (0.5, 0.381966, 0.618034, 0.2763932):
            target = frac * length
            acc = 0.0
            start = None
            for t, y, x0, x1 in chords:
                seg = abs(x1 - x0)
                if acc + seg >= target - 1e-15:
                    start = (t, np.array([x0 + (target - acc), y]))
                    break
                acc += seg
            if start is None:
                start = (chords[-1][0], np.array([chords[-1][3], chords[-1][1]]))
            try:
                height, mid = _vertical_height(tracer, chords_by_tri, start, max_len, tol)
            except NumericalDegeneracy:
                continue
            break
        else:
            raise NumericalDegeneracy("could not measure a cylinder height")
        circ, cycle = _core_leaf(tracer, mid, east, max_len, tol)
        key = _canonical_cycle(cycle)
        if key not in found:
            found[key] = Cylinder(dvec, circ, height, tuple(sorted({t for t, _ in cycle})))
    cyls = sorted(found.values(), key=lambda c: (-c.circumference, -c.height, c.core_squares_or_faces))
    total = sum(c.circumference * c.height for c in cyls)
    if abs(total - A) > 1e-6 * max(1.0, A):
        raise NumericalDegeneracy(f"cylinder areas sum to {total}, surface area {A}")
    return cyls


def _vertical_height(tracer: RayTracer, chords_by_tri, start, max_len: float, tol: float):
    t0, p0 = start
    up = np.array([0.0, 1.0])
    best = None
    travelled = []
    for st in tracer.trace(t0, p0, up, max_len):
        x = st.enter[0]
        y_lo = st.enter[1]
        y_hi = st.leave[1]
        hit = None
        for y, x0, x1 in chords_by_tri.get(st.tri, ()):
            if x0 - tol <= x <= x1 + tol and y_lo + tol < y <= y_hi + tol:
                dist = st.length_before + (y - y_lo)
                if st.length_before == 0.0 and y - p0[1] <= tol:
                    continue
                if hit is None or dist < hit:
                    hit = dist
        travelled.append(st)
        if hit is not None:
            best = hit
            break
    if tracer.hit_vertex is not None and best is None:
        raise NumericalDegeneracy("vertical ray hit a vertex")
    if best is None:
        raise NumericalDegeneracy("vertical ray found no boundary")
    half = 0.5 * best
    for st in travelled:
        seg = st.leave[1] - st.enter[1]
        if st.length_before + seg >= half:
            return best, (st.tri, np.array([st.enter[0], st.enter[1] + (half - st.length_before)]))
    st = travelled[-1]
    return best, (st.tri, st.leave.copy())


def _core_leaf(tracer: RayTracer, start, d: np.ndarray, max_len: float, tol: float):
    t0, p0 = start
    cycle = []
    for st in tracer.trace(t0, p0, d, max_len):
        if st.length_before > 0 and st.tri == t0 and abs(st.enter[1] - p0[1]) <= 1e3 * tol:
            lo, hi = sorted((st.enter[0], st.leave[0]))
            if lo - 1e3 * tol <= p0[0] <= hi + 1e3 * tol:
                return st.length_before + (p0[0] - st.enter[0]), cycle
        cycle.append((st.tri, round(float(st.enter[1]), 6)))
    raise NonPeriodicDirection("core leaf did not close")


def _canonical_cycle(cycle: list[tuple[int, float]]) -> tuple:
    tris = [t for t, _ in cycle]
    n = len(tris)
    rots = [tuple(tris[i:] + tris[:i]) for i in range(n)]
    return min(rots)


def growth_check(S: TranslationSurface, t: float, interval: tuple[float, float], n: int = 101, L: float = 2.0):
    """Samplewise check of ``sup_s |Re(a_t u_s Hol)| >= e^t |Re Hol|``.

    Returns the minimum of ``sup / (e^t |Re Hol|)`` over connections with
    non-zero real part (the bound holds iff it is ``>= 1``).
    """
    res = enumerate_arrays(S, L)
    s = np.linspace(interval[0], interval[1], n)
    worst = math.inf
    for x, y in res.hol:
        if abs(x) < 1e-12:
            continue
        sup = float(np.max(np.abs(math.exp(t) * (x + s * y))))
        worst = min(worst, sup / (math.exp(t) * abs(x)))
    return worst


def rational_lcm(values: Sequence[float], max_den: int = 1000, tol: float = 1e-7) -> float | None:
    """Smallest positive common multiple of positive reals if commensurable."""
    base = values[0]
    ratios = []
    for v in values:
        f = Fraction(v / base).limit_denominator(max_den)
        if abs(float(f) - v / base) > tol * max(1.0, v / base):
            return None
        ratios.append(f)
    m = 1
    for f in ratios:
        m = m * f.numerator // math.gcd(m, f.numerator)
    return base * m
