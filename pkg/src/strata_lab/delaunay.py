"""Triangulations, Delaunay flips, cell decompositions and canonical forms.

Working triangulations are mutable lists internal to this module; every
public function takes and returns immutable ``TranslationSurface`` values.
An optional integer payload rides along each half-edge through flips,
which is how period-chart coordinates follow a retriangulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import MalformedSurface, NumericalDegeneracy
from .surface import TAU_GEOM, TranslationSurface, Vec, area

FLIP_TOL = 1e-10
COCIRCULAR_TOL = 1e-7
MAX_FLIPS = 1_000_000


class WorkingTriangulation:
    """Mutable triangulation: edge vectors, partners and optional payloads.

    Triangle ``t`` has edges ``V[t][0..2]`` (counter-clockwise, summing to 0);
    ``P[t][k] = (u, m)`` is the partner half-edge; ``Y[t][k]`` is an integer
    vector carried along flips when payloads are enabled.
    """

    __slots__ = ("V", "P", "Y", "flips")

    def __init__(self, V: list[list[Vec]], P: list[list[tuple[int, int]]], Y: list[list[np.ndarray]] | None = None):
        self.V = V
        self.P = P
        self.Y = Y
        self.flips = 0

    @classmethod
    def from_surface(cls, S: TranslationSurface, payload: np.ndarray | None = None) -> "WorkingTriangulation":
        if not S.is_triangulated:
            raise MalformedSurface("surface is not triangulated")
        V = [list(tri) for tri in S.polygons]
        P = [[S.partner(t, k) for k in range(3)] for t in range(len(V))]
        Y = None
        if payload is not None:
            Y = [[np.array(payload[t, k]) for k in range(3)] for t in range(len(V))]
        return cls(V, P, Y)

    def to_surface(self, label: str | None = None) -> TranslationSurface:
        gl = []
        for t, row in enumerate(self.P):
            for k, h in enumerate(row):
                if (t, k) < h:
                    gl.append(((t, k), h))
        return TranslationSurface(tuple(tuple(tri) for tri in self.V), tuple(sorted(gl)), label)

    def payload_array(self) -> np.ndarray:
        assert self.Y is not None
        return np.array([[self.Y[t][k] for k in range(3)] for t in range(len(self.V))])

    # -- predicates

    def cot_sum(self, t: int, k: int) -> tuple[float, float]:
        """Cotangents of the two angles opposite half-edge ``(t, k)``, summed.

        Returns ``(sum, scale)`` where ``scale = 1 + |cot a| + |cot b|`` is
        used to make the tolerance relative.
        """
        u, m = self.P[t][k]
        s = 0.0
        sc = 1.0
        for tri, j in ((self.V[t], k), (self.V[u], m)):
            a = tri[(j + 2) % 3]
            b = tri[(j + 1) % 3]
            # vectors from the opposite vertex to the endpoints of edge j
            ax, ay = a
            bx, by = -b[0], -b[1]
            cr = ax * by - ay * bx
            cot = (ax * bx + ay * by) / abs(cr) if cr != 0 else math.inf
            s += cot
            sc += abs(cot)
        return s, sc

    def is_delaunay_edge(self, t: int, k: int, tol: float = FLIP_TOL) -> bool:
        s, sc = self.cot_sum(t, k)
        return not (s < -tol * sc)

    def is_cocircular_edge(self, t: int, k: int, tol: float = COCIRCULAR_TOL) -> bool:
        s, sc = self.cot_sum(t, k)
        return abs(s) <= tol * sc

    # -- flips

    def flip(self, t: int, k: int) -> None:
        """Flip the diagonal shared by ``t`` and its neighbour across edge ``k``."""
        u, m = self.P[t][k]
        if u == t:
            raise NumericalDegeneracy("cannot flip an edge glued to its own triangle")
        a1, a2 = (k + 1) % 3, (k + 2) % 3
        b1, b2 = (m + 1) % 3, (m + 2) % 3
        V, P = self.V, self.P
        e1, e2 = V[t][a1], V[t][a2]
        f1, f2 = V[u][b1], V[u][b2]
        d = (f2[0] + e1[0], f2[1] + e1[1])
        # outer half-edges: old label -> new label
        remap = {(t, a1): (t, 1), (t, a2): (u, 0), (u, b1): (u, 1), (u, b2): (t, 0)}
        old_partner = {h: P[h[0]][h[1]] for h in remap}
        if self.Y is not None:
            Y = self.Y
            y_e1, y_e2, y_f1, y_f2 = Y[t][a1], Y[t][a2], Y[u][b1], Y[u][b2]
            y_d = y_f2 + y_e1
            Y[t] = [y_f2, y_e1, -y_d]
            Y[u] = [y_e2, y_f1, y_d]
        V[t] = [f2, e1, (-d[0], -d[1])]
        V[u] = [e2, f1, d]
        new_p: dict[tuple[int, int], tuple[int, int]] = {}
        for old, new in remap.items():
            q = old_partner[old]
            q_new = remap.get(q, q)
            new_p[new] = q_new
        P[t] = [new_p[(t, 0)], new_p[(t, 1)], (u, 2)]
        P[u] = [new_p[(u, 0)], new_p[(u, 1)], (t, 2)]
        for (tt, kk), q in new_p.items():
            if q[0] not in (t, u):
                P[q[0]][q[1]] = (tt, kk)
        self.flips += 1

    def make_delaunay(self, tol: float = FLIP_TOL, max_flips: int = MAX_FLIPS) -> int:
        """Flip until every edge is locally Delaunay; returns the flip count."""
        stack = [(t, k) for t in range(len(self.V)) for k in range(3)]
        start = self.flips
        while stack:
            t, k = stack.pop()
            u, _ = self.P[t][k]
            if u == t or self.is_delaunay_edge(t, k, tol):
                continue
            self.flip(t, k)
            if self.flips - start > max_flips:
                raise NumericalDegeneracy("Delaunay flip guard exceeded")
            stack.extend(((t, 0), (t, 1), (u, 0), (u, 1)))
        return self.flips - start

    def min_area_ratio(self) -> float:
        worst = math.inf
        for tri in self.V:
            (ax, ay), (bx, by), _ = tri
            cr = ax * by - ay * bx
            scale_ = max(ax * ax + ay * ay, bx * bx + by * by)
            worst = min(worst, cr / scale_ if scale_ > 0 else -1.0)
        return worst


# ---------------------------------------------------------------- triangulate


def _ear_clip(edges: Sequence[Vec]) -> list[tuple[tuple, tuple, tuple]]:
    """Ear-clip one polygon.

    Returns triangles as triples of edge descriptors; a descriptor is
    ``("P", i, vec)`` for polygon edge ``i`` or ``("D", d, side, vec)`` for
    side ``0``/``1`` of diagonal ``d``.
    """
    n = len(edges)
    pts: list[Vec] = []
    x = y = 0.0
    for v in edges:
        pts.append((x, y))
        x += v[0]
        y += v[1]
    scale_ = max(math.hypot(*v) for v in edges)
    eps = 1e-12 * scale_ * scale_
    verts = list(range(n))
    after: list[tuple] = [("P", i, edges[i]) for i in range(n)]
    tris = []
    n_diag = 0

    def inside(p: Vec, a: Vec, b: Vec, c: Vec) -> bool:
        def orient(u: Vec, v: Vec, w: Vec) -> float:
            return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

        return orient(a, b, p) >= -eps and orient(b, c, p) >= -eps and orient(c, a, p) >= -eps

    while len(verts) > 3:
        m = len(verts)
        best = None
        for j in range(m):
            ia, ib, ic = verts[j - 1], verts[j], verts[(j + 1) % m]
            a, b, c = pts[ia], pts[ib], pts[ic]
            cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if cr <= eps:
                continue
            if any(inside(pts[w], a, b, c) for w in verts if w not in (ia, ib, ic) and pts[w] not in (a, b, c)):
                continue
            best = j
            break
        if best is None:
            raise MalformedSurface("ear clipping failed; polygon is not simple")
        j = best
        m = len(verts)
        d_ab = after[j - 1]
        d_bc = after[j]
        vab = d_ab[-1]
        vbc = d_bc[-1]
        vac = (vab[0] + vbc[0], vab[1] + vbc[1])
        tris.append((d_ab, d_bc, ("D", n_diag, 0, (-vac[0], -vac[1]))))
        new_desc = ("D", n_diag, 1, vac)
        n_diag += 1
        # remove vertex j; the edge after vertex j-1 becomes the diagonal
        after[j - 1] = new_desc
        del verts[j]
        del after[j]
        if j == 0:
            # after[-1] was replaced in place above, nothing else to shift
            pass
    tris.append(tuple(after))
    return tris


def triangulate(S: TranslationSurface) -> TranslationSurface:
    """Ear-clip every polygon; returns a triangulated surface."""
    if S.is_triangulated:
        return S
    V: list[list[Vec]] = []
    where: dict[tuple, tuple[int, int]] = {}
    for p, poly in enumerate(S.polygons):
        for tri in _ear_clip(poly):
            t = len(V)
            V.append([desc[-1] for desc in tri])
            for k, desc in enumerate(tri):
                key = (p, desc[1]) if desc[0] == "P" else (p, "D", desc[1], desc[2])
                where[key] = (t, k)
    gl = []
    for (p, e), (q, f) in S.gluings:
        gl.append((where[(p, e)], where[(q, f)]))
    for key, h in where.items():
        if len(key) == 4 and key[3] == 0:
            gl.append((h, where[(key[0], "D", key[2], 1)]))
    return TranslationSurface.from_data(V, gl, S.label)


def delaunay(S: TranslationSurface, tol: float = FLIP_TOL, max_flips: int = MAX_FLIPS) -> TranslationSurface:
    """Delaunay triangulation by edge flips (starting from an ear-clipping)."""
    W = WorkingTriangulation.from_surface(triangulate(S))
    W.make_delaunay(tol, max_flips)
    return W.to_surface(S.label)


def delaunay_with_payload(
    S: TranslationSurface, payload: np.ndarray, tol: float = FLIP_TOL, max_flips: int = MAX_FLIPS
) -> tuple[TranslationSurface, np.ndarray]:
    """Delaunay-flip a triangulated surface, transporting a half-edge payload."""
    W = WorkingTriangulation.from_surface(S, payload)
    W.make_delaunay(tol, max_flips)
    return W.to_surface(S.label), W.payload_array()


def is_delaunay(S: TranslationSurface, tol: float = FLIP_TOL) -> bool:
    W = WorkingTriangulation.from_surface(S)
    return all(W.is_delaunay_edge(t, k, tol) for t in range(len(W.V)) for k in range(3))


# ---------------------------------------------------------------- cells


def delaunay_cells(S: TranslationSurface, tol: float = COCIRCULAR_TOL) -> TranslationSurface:
    """Merge cocircular triangles of a Delaunay triangulation into cells."""
    D = S if S.is_triangulated and is_delaunay(S) else delaunay(S)
    W = WorkingTriangulation.from_surface(D)
    F = len(W.V)
    merged = [[False] * 3 for _ in range(F)]
    for t in range(F):
        for k in range(3):
            u, m = W.P[t][k]
            if (u, m) != (t, k) and W.is_cocircular_edge(t, k, tol):
                merged[t][k] = True
                merged[u][m] = True
    # trace boundary cycles
    cell_of: dict[tuple[int, int], tuple[int, int]] = {}
    polys: list[list[Vec]] = []
    for t in range(F):
        for k in range(3):
            if merged[t][k] or (t, k) in cell_of:
                continue
            c = len(polys)
            poly: list[Vec] = []
            h = (t, k)
            guard = 0
            while True:
                cell_of[h] = (c, len(poly))
                poly.append(W.V[h[0]][h[1]])
                nt, nk = h[0], (h[1] + 1) % 3
                while merged[nt][nk]:
                    u, m = W.P[nt][nk]
                    nt, nk = u, (m + 1) % 3
                    guard += 1
                    if guard > 10 * F:
                        raise NumericalDegeneracy("cell boundary walk did not close")
                h = (nt, nk)
                if h == (t, k):
                    break
            polys.append(poly)
    gl = []
    for h, (c, i) in cell_of.items():
        q = W.P[h[0]][h[1]]
        other = cell_of[q]
        if (c, i) < other:
            gl.append(((c, i), other))
    return TranslationSurface(tuple(tuple(p) for p in polys), tuple(sorted(gl)), S.label)


# ---------------------------------------------------------------- isomorphisms


def _rooted_walk(S: TranslationSurface, root: tuple[int, int]):
    """Breadth-first relabelling from a root half-edge.

    Returns ``(order, offset, code)`` where ``order`` lists polygons in
    discovery order, ``offset[p]`` is the local index of each polygon's
    entry edge, and ``code`` is the combinatorial serialization.
    """
    label = {root[0]: 0}
    offset = {root[0]: root[1]}
    order = [root[0]]
    code: list[int] = []
    i = 0
    while i < len(order):
        p = order[i]
        n = len(S.polygons[p])
        code.append(n)
        for j in range(n):
            e = (offset[p] + j) % n
            q, f = S.partner(p, e)
            if q not in label:
                label[q] = len(order)
                offset[q] = f
                order.append(q)
            code.append(label[q])
            code.append((f - offset[q]) % len(S.polygons[q]))
        i += 1
    return order, offset, tuple(code)


def _walk_vectors(S: TranslationSurface, order: list[int], offset: dict[int, int]) -> np.ndarray:
    out = []
    for p in order:
        n = len(S.polygons[p])
        for j in range(n):
            out.append(S.polygons[p][(offset[p] + j) % n])
    return np.asarray(out, dtype=float)


def rooted_walk_vectors(S: TranslationSurface, root: tuple[int, int]):
    """``(code, index, vectors)`` of the walk rooted at ``root``.

    ``index[(p, e)]`` is the position of half-edge ``(p, e)`` in ``vectors``;
    two rootings with equal codes define an isomorphism matching positions.
    """
    order, offset, code = _rooted_walk(S, root)
    index = {}
    pos = 0
    for p in order:
        n = len(S.polygons[p])
        for j in range(n):
            index[(p, (offset[p] + j) % n)] = pos
            pos += 1
    return code, index, _walk_vectors(S, order, offset)


def rootings(S: TranslationSurface) -> Iterator[tuple[int, int]]:
    for p, poly in enumerate(S.polygons):
        for e in range(len(poly)):
            yield (p, e)


@dataclass(frozen=True)
class Isomorphism:
    """A combinatorial identification of half-edges ``A -> B``."""

    half_edge_map: dict[tuple[int, int], tuple[int, int]]
    max_vector_error: float


def isomorphisms(
    A: TranslationSurface, B: TranslationSurface, tol: float | None = None, first_only: bool = False
) -> list[Isomorphism]:
    """All rooted combinatorial isomorphisms from ``A`` to ``B``.

    ``A`` is rooted at its first half-edge; every rooting of ``B`` whose
    breadth-first serialization matches is returned. With ``tol`` set, only
    maps whose edge vectors agree to ``tol`` are kept.
    """
    if len(A.polygons) != len(B.polygons) or sorted(map(len, A.polygons)) != sorted(map(len, B.polygons)):
        return []
    order_a, off_a, code_a = _rooted_walk(A, (0, 0))
    vec_a = _walk_vectors(A, order_a, off_a)
    n0 = len(A.polygons[0])
    out = []
    for root in rootings(B):
        if len(B.polygons[root[0]]) != n0:
            continue
        order_b, off_b, code_b = _rooted_walk(B, root)
        if code_b != code_a:
            continue
        vec_b = _walk_vectors(B, order_b, off_b)
        err = float(np.max(np.abs(vec_a - vec_b))) if vec_a.size else 0.0
        if tol is not None and err > tol:
            continue
        hmap = {}
        for pa, pb in zip(order_a, order_b):
            n = len(A.polygons[pa])
            for j in range(n):
                hmap[(pa, (off_a[pa] + j) % n)] = (pb, (off_b[pb] + j) % n)
        out.append(Isomorphism(hmap, err))
        if first_only:
            break
    return out


def _serialization(S: TranslationSurface, root: tuple[int, int], quantum: float):
    order, off, code = _rooted_walk(S, root)
    vecs = _walk_vectors(S, order, off)
    q = tuple(int(x) for x in np.rint(vecs.reshape(-1) / quantum))
    return code, q


def canonical_form(S: TranslationSurface, quantum: float = 1e-6) -> dict:
    """Lexicographically minimal rooted serialization of the Delaunay cells.

    Vector entries are rounded to multiples of ``quantum``; the result is
    JSON-ready and used for chart ids and membership transcripts.
    """
    C = delaunay_cells(S)
    best = None
    for root in rootings(C):
        key = _serialization(C, root, quantum)
        if best is None or key < best:
            best = key
    assert best is not None
    return {"quantum": quantum, "combinatorics": list(best[0]), "vectors": list(best[1])}


def canonical_id(S: TranslationSurface, quantum: float = 1e-6) -> str:
    import hashlib
    import json

    blob = json.dumps(canonical_form(S, quantum), separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def translation_equivalent(S1: TranslationSurface, S2: TranslationSurface, tol: float = TAU_GEOM) -> bool:
    """Decide whether two surfaces differ only by cut-and-paste.

    Both surfaces are reduced to their Delaunay cell complexes; the first is
    rooted once and every rooting of the second is tried, comparing the
    breadth-first combinatorics exactly and the edge vectors to ``tol``.
    """
    a1, a2 = area(S1), area(S2)
    if abs(a1 - a2) > tol * max(1.0, a1) * 10:
        return False
    C1 = delaunay_cells(S1)
    C2 = delaunay_cells(S2)
    return bool(isomorphisms(C1, C2, tol=tol * max(1.0, math.sqrt(a1)), first_only=True))


def equivalence_witness(S1: TranslationSurface, S2: TranslationSurface, tol: float = TAU_GEOM) -> Isomorphism | None:
    C1 = delaunay_cells(S1)
    C2 = delaunay_cells(S2)
    found = isomorphisms(C1, C2, tol=tol * max(1.0, math.sqrt(area(S1))), first_only=True)
    return found[0] if found else None


def combinatorial_signature(S: TranslationSurface) -> tuple[int, ...]:
    """Minimal rooted combinatorial code of a triangulation (vectors ignored)."""
    return min(_rooted_walk(S, root)[2] for root in rootings(S))
