"""Translation surfaces as polygons with translation gluings.

A surface is a tuple of polygons, each a cyclic list of edge vectors whose
first vertex sits at the origin, together with a perfect matching on the
directed edges ``(polygon, edge)``. Everything here is immutable; transforms
return new surfaces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DisconnectedSurface, InvalidParameter, MalformedSurface
from .sl2 import Mat2, as_mat2

TAU_GEOM = 1e-9

Vec = tuple[float, float]
HalfEdge = tuple[int, int]


def _cross(u: Vec, v: Vec) -> float:
    return u[0] * v[1] - u[1] * v[0]


def _dot(u: Vec, v: Vec) -> float:
    return u[0] * v[0] + u[1] * v[1]


@dataclass(frozen=True, eq=False)
class TranslationSurface:
    """Polygons glued by translations.

    Attributes
    ----------
    polygons : tuple of tuple of (float, float)
        Edge vectors of each polygon in counter-clockwise order.
    gluings : tuple of ((p, e), (q, f))
        Each unordered pair of glued directed edges listed once, sorted.
    label : str or None
        Optional display name.
    """

    polygons: tuple[tuple[Vec, ...], ...]
    gluings: tuple[tuple[HalfEdge, HalfEdge], ...]
    label: str | None = None

    @classmethod
    def from_data(
        cls,
        polygons: Iterable[Iterable[Sequence[float]]],
        gluings: Iterable[Sequence[Sequence[int]]] | Mapping[HalfEdge, HalfEdge],
        label: str | None = None,
    ) -> "TranslationSurface":
        """Normalise raw polygon and gluing data and check the matching."""
        polys = tuple(tuple((float(v[0]), float(v[1])) for v in poly) for poly in polygons)
        if not polys or any(len(p) < 3 for p in polys):
            raise MalformedSurface("every polygon needs at least three edges")
        items = gluings.items() if isinstance(gluings, Mapping) else gluings
        seen: dict[HalfEdge, HalfEdge] = {}
        for pair in items:
            a, b = pair
            ha = (int(a[0]), int(a[1]))
            hb = (int(b[0]), int(b[1]))
            for h, other in ((ha, hb), (hb, ha)):
                if not (0 <= h[0] < len(polys) and 0 <= h[1] < len(polys[h[0]])):
                    raise MalformedSurface(f"gluing refers to missing edge {h}")
                if h in seen and seen[h] != other:
                    raise MalformedSurface(f"edge {h} glued twice")
                seen[h] = other
            if ha == hb:
                raise MalformedSurface(f"edge {ha} glued to itself")
        total = sum(len(p) for p in polys)
        if len(seen) != total:
            raise MalformedSurface("gluings are not a perfect matching on directed edges")
        pairs = sorted({tuple(sorted((h, k))) for h, k in seen.items()})
        return cls(polys, tuple(pairs), label)  # type: ignore[arg-type]

    @cached_property
    def partner_map(self) -> dict[HalfEdge, HalfEdge]:
        out: dict[HalfEdge, HalfEdge] = {}
        for a, b in self.gluings:
            out[a] = b
            out[b] = a
        return out

    def partner(self, p: int, e: int) -> HalfEdge:
        return self.partner_map[(p, e)]

    def edge(self, p: int, e: int) -> Vec:
        return self.polygons[p][e]

    @property
    def is_triangulated(self) -> bool:
        return all(len(p) == 3 for p in self.polygons)

    @property
    def n_edges(self) -> int:
        return sum(len(p) for p in self.polygons) // 2

    def half_edges(self) -> list[HalfEdge]:
        return [(p, e) for p, poly in enumerate(self.polygons) for e in range(len(poly))]

    def vertices(self, p: int) -> list[Vec]:
        """Vertex positions of polygon ``p`` with the first vertex at the origin."""
        x = y = 0.0
        out = []
        for vx, vy in self.polygons[p]:
            out.append((x, y))
            x += vx
            y += vy
        return out

    def with_label(self, label: str | None) -> "TranslationSurface":
        return TranslationSurface(self.polygons, self.gluings, label)

    def map_vectors(self, fn) -> "TranslationSurface":
        polys = tuple(tuple(fn(v) for v in poly) for poly in self.polygons)
        return TranslationSurface(polys, self.gluings, self.label)

    def edgewise_equal(self, other: "TranslationSurface", tol: float = TAU_GEOM) -> bool:
        if self.gluings != other.gluings or len(self.polygons) != len(other.polygons):
            return False
        for p, q in zip(self.polygons, other.polygons):
            if len(p) != len(q):
                return False
            for u, v in zip(p, q):
                if abs(u[0] - v[0]) > tol or abs(u[1] - v[1]) > tol:
                    return False
        return True

    def to_json(self) -> dict[str, Any]:
        return {
            "polygons": [[list(v) for v in poly] for poly in self.polygons],
            "gluings": [[list(a), list(b)] for a, b in self.gluings],
            "label": self.label,
        }

    def __repr__(self) -> str:
        name = f" {self.label!r}" if self.label else ""
        return f"<TranslationSurface{name}: {len(self.polygons)} polygons, {self.n_edges} edges>"


@dataclass(frozen=True)
class StratumReport:
    """Combinatorial invariants of a surface.

    ``vertex_classes`` lists ``(class_id, angle / pi)`` pairs, so a 6 pi cone
    point appears as ``(k, 6)``.
    """

    genus: int
    vertex_classes: tuple[tuple[int, int], ...]
    area: float
    in_H2: bool
    n_vertices: int
    n_edges: int
    n_faces: int

    @property
    def cone_angles(self) -> list[float]:
        return [k * math.pi for _, k in self.vertex_classes]

    @property
    def marked_points(self) -> int:
        return sum(1 for _, k in self.vertex_classes if k == 2)

    def to_json(self) -> dict[str, Any]:
        return {
            "genus": self.genus,
            "vertex_classes": [[c, k] for c, k in self.vertex_classes],
            "cone_angles_over_pi": [k for _, k in self.vertex_classes],
            "area": self.area,
            "in_H2": self.in_H2,
            "euler": [self.n_vertices, self.n_edges, self.n_faces],
        }


# ---------------------------------------------------------------- geometry


def polygon_area(edges: Sequence[Vec]) -> float:
    x = y = 0.0
    twice = 0.0
    for vx, vy in edges:
        twice += x * vy - y * vx
        x += vx
        y += vy
    return 0.5 * twice


def area(S: TranslationSurface) -> float:
    """Total area by the shoelace formula."""
    return math.fsum(polygon_area(p) for p in S.polygons)


def normalize_area(S: TranslationSurface) -> TranslationSurface:
    """Scale every edge by ``area(S)^(-1/2)``."""
    A = area(S)
    if A <= 0:
        raise MalformedSurface("area must be positive")
    k = 1.0 / math.sqrt(A)
    if abs(k - 1.0) < 1e-15:
        return S
    return S.map_vectors(lambda v: (v[0] * k, v[1] * k))


def scale(S: TranslationSurface, lam: float) -> TranslationSurface:
    if lam <= 0:
        raise InvalidParameter("scale factor must be positive")
    return S.map_vectors(lambda v: (v[0] * lam, v[1] * lam))


def apply_matrix(A: Mat2 | Sequence[float], S: TranslationSurface, tol: float = TAU_GEOM) -> TranslationSurface:
    """Replace every edge vector ``v`` by ``A v``; gluings are unchanged."""
    M = as_mat2(A, tol=tol)
    a, b, c, d = M.as_tuple()
    return S.map_vectors(lambda v: (a * v[0] + b * v[1], c * v[0] + d * v[1]))


def _segments_intersect(p1: Vec, p2: Vec, q1: Vec, q2: Vec, eps: float) -> bool:
    def orient(a: Vec, b: Vec, c: Vec) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True

    def on_seg(a: Vec, b: Vec, c: Vec, o: float) -> bool:
        return abs(o) <= eps and min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps and min(
            a[1], b[1]
        ) - eps <= c[1] <= max(a[1], b[1]) + eps

    return on_seg(q1, q2, p1, d1) or on_seg(q1, q2, p2, d2) or on_seg(p1, p2, q1, d3) or on_seg(p1, p2, q2, d4)


def _check_simple(edges: Sequence[Vec], tol: float) -> bool:
    n = len(edges)
    pts = []
    x = y = 0.0
    for v in edges:
        pts.append((x, y))
        x += v[0]
        y += v[1]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n], tol):
                return False
    return True


def _check_connected(S: TranslationSurface) -> None:
    n = len(S.polygons)
    seen = {0}
    stack = [0]
    while stack:
        p = stack.pop()
        for e in range(len(S.polygons[p])):
            q = S.partner(p, e)[0]
            if q not in seen:
                seen.add(q)
                stack.append(q)
    if len(seen) != n:
        raise DisconnectedSurface(f"only {len(seen)} of {n} polygons are connected")


def corner_classes(S: TranslationSurface) -> dict[HalfEdge, int]:
    """Label each corner ``(p, i)`` (start of edge ``i``) with its vertex class."""
    parent: dict[HalfEdge, HalfEdge] = {h: h for h in S.half_edges()}

    def find(h: HalfEdge) -> HalfEdge:
        while parent[h] != h:
            parent[h] = parent[parent[h]]
            h = parent[h]
        return h

    for (p, i), (q, j) in S.partner_map.items():
        # start of (p, i) is the end of (q, j), i.e. the start of (q, j + 1)
        a = find((p, i))
        b = find((q, (j + 1) % len(S.polygons[q])))
        if a != b:
            parent[max(a, b)] = min(a, b)
    roots: dict[HalfEdge, int] = {}
    out: dict[HalfEdge, int] = {}
    for h in S.half_edges():
        r = find(h)
        if r not in roots:
            roots[r] = len(roots)
        out[h] = roots[r]
    return out


def corner_angle(S: TranslationSurface, p: int, i: int) -> float:
    poly = S.polygons[p]
    u = poly[i - 1]
    v = poly[i]
    return math.pi - math.atan2(_cross(u, v), _dot(u, v))


def validate(S: TranslationSurface, tol: float = TAU_GEOM) -> StratumReport:
    """Check structural invariants and compute genus and cone angles.

    Raises
    ------
    MalformedSurface
        Open polygons, mismatched gluing vectors, non-simple or clockwise
        polygons, or cone angles that are not multiples of ``2 pi``.
    DisconnectedSurface
        The gluing graph on polygons is disconnected.
    """
    scale_ = max(1.0, max(math.hypot(*v) for poly in S.polygons for v in poly))
    for k, poly in enumerate(S.polygons):
        sx = math.fsum(v[0] for v in poly)
        sy = math.fsum(v[1] for v in poly)
        if abs(sx) > tol * scale_ or abs(sy) > tol * scale_:
            raise MalformedSurface(f"polygon {k} does not close up")
        if polygon_area(poly) <= 0:
            raise MalformedSurface(f"polygon {k} is not positively oriented")
        if not _check_simple(poly, tol * scale_):
            raise MalformedSurface(f"polygon {k} is not simple")
    for a, b in S.gluings:
        u = S.edge(*a)
        v = S.edge(*b)
        if abs(u[0] + v[0]) > tol * scale_ or abs(u[1] + v[1]) > tol * scale_:
            raise MalformedSurface(f"gluing {a}<->{b} does not pair opposite vectors")
    _check_connected(S)
    classes = corner_classes(S)
    totals: dict[int, float] = {}
    for (p, i), c in classes.items():
        totals[c] = totals.get(c, 0.0) + corner_angle(S, p, i)
    vertex_classes = []
    for c in sorted(totals):
        k = totals[c] / math.pi
        kk = int(round(k))
        if abs(k - kk) > 1e-6 or kk % 2 or kk <= 0:
            raise MalformedSurface(f"vertex class {c} has cone angle {k:.9f} pi")
        vertex_classes.append((c, kk))
    V = len(totals)
    E = S.n_edges
    F = len(S.polygons)
    chi = V - E + F
    if chi % 2:
        raise MalformedSurface("odd Euler characteristic")
    genus = (2 - chi) // 2
    cones = [k for _, k in vertex_classes if k != 2]
    in_h2 = genus == 2 and cones == [6] and len(vertex_classes) == 1
    return StratumReport(genus, tuple(vertex_classes), area(S), in_h2, V, E, F)


# ---------------------------------------------------------------- builders


def build_lshape(a: float, b: float) -> TranslationSurface:
    """L-shaped table: an ``a x 1`` rectangle with a ``1 x (b-1)`` square on top.

    The bottom and left sides are split at the inner corner so each side is
    glued by translation to exactly one opposite side.
    """
    if not (a > 1 and b > 1):
        raise InvalidParameter("build_lshape needs a > 1 and b > 1")
    a = float(a)
    b = float(b)
    edges = [
        (1.0, 0.0),  # 0 bottom, left piece
        (a - 1.0, 0.0),  # 1 bottom, right piece
        (0.0, 1.0),  # 2 right side of the long arm
        (1.0 - a, 0.0),  # 3 top of the long arm
        (0.0, b - 1.0),  # 4 right side of the tall arm
        (-1.0, 0.0),  # 5 top
        (0.0, 1.0 - b),  # 6 left side, upper piece
        (0.0, -1.0),  # 7 left side, lower piece
    ]
    gluings = [((0, 0), (0, 5)), ((0, 1), (0, 3)), ((0, 2), (0, 7)), ((0, 4), (0, 6))]
    return TranslationSurface.from_data([edges], gluings, label=f"L({a:g},{b:g})")


def build_regular_octagon(side: float = 1.0) -> TranslationSurface:
    """Regular octagon with opposite sides identified."""
    edges = [(side * math.cos(k * math.pi / 4), side * math.sin(k * math.pi / 4)) for k in range(8)]
    # snap the exact axis-aligned entries
    edges = [(0.0 if abs(x) < 1e-15 else x, 0.0 if abs(y) < 1e-15 else y) for x, y in edges]
    gluings = [((0, k), (0, k + 4)) for k in range(4)]
    return TranslationSurface.from_data([edges], gluings, label="octagon")


def perm_from_cycles(cycles: str | Sequence[Sequence[int]], n: int | None = None) -> list[int]:
    """Convert 1-based cycle notation to a 0-based image list.

    ``"(1 2)(3 4)"``, ``"12"`` (single-digit labels) and ``[[1, 2]]`` are accepted.
    """
    if isinstance(cycles, str):
        text = cycles.strip()
        parsed: list[list[int]] = []
        if "(" in text:
            for chunk in text.replace(")", "").split("(")[1:]:
                tokens = chunk.replace(",", " ").split()
                if len(tokens) == 1 and len(tokens[0]) > 1:
                    tokens = list(tokens[0])
                parsed.append([int(tok) for tok in tokens])
        elif text:
            parsed = [[int(ch) for ch in text]] if " " not in text else [[int(x) for x in text.split()]]
        cycles = parsed
    cyc = [list(map(int, c)) for c in cycles]
    size = max([n or 0] + [x for c in cyc for x in c])
    perm = list(range(size))
    for c in cyc:
        for k, x in enumerate(c):
            perm[x - 1] = c[(k + 1) % len(c)] - 1
    if sorted(perm) != list(range(size)):
        raise InvalidParameter(f"not a permutation: {cycles!r}")
    return perm


def build_origami(h_perm: Sequence[int], v_perm: Sequence[int], label: str | None = None) -> TranslationSurface:
    """Square-tiled surface from 0-based permutations.

    Square ``i`` has its right edge glued to the left edge of ``h_perm[i]``
    and its top edge glued to the bottom edge of ``v_perm[i]``.
    """
    h = [int(x) for x in h_perm]
    v = [int(x) for x in v_perm]
    n = len(h)
    if len(v) != n or sorted(h) != list(range(n)) or sorted(v) != list(range(n)):
        raise InvalidParameter("h_perm and v_perm must be permutations of the same size")
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in (h[i], v[i], h.index(i), v.index(i)):
            if j not in seen:
                seen.add(j)
                stack.append(j)
    if len(seen) != n:
        raise DisconnectedSurface("permutations do not act transitively")
    square = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
    gluings = []
    for i in range(n):
        gluings.append(((i, 1), (h[i], 3)))
        gluings.append(((i, 2), (v[i], 0)))
    return TranslationSurface.from_data([square] * n, gluings, label=label or f"origami{n}")


def build_torus(periods: Sequence[Sequence[float]] = ((1.0, 0.0), (0.0, 1.0))) -> TranslationSurface:
    """Flat torus from a parallelogram with one marked vertex."""
    (ux, uy), (vx, vy) = periods
    if ux * vy - uy * vx <= 0:
        raise InvalidParameter("torus periods must be positively oriented")
    edges = [(ux, uy), (vx, vy), (-ux, -uy), (-vx, -vy)]
    return TranslationSurface.from_data([edges], [((0, 0), (0, 2)), ((0, 1), (0, 3))], label="torus")


def three_square_origami() -> TranslationSurface:
    """The L-shaped 3-square origami with ``h = (1 2)``, ``v = (1 3)``."""
    return build_origami(perm_from_cycles("(1 2)", 3), perm_from_cycles("(1 3)", 3), label="origami3")


# ---------------------------------------------------------------- I/O


def surface_from_json(obj: Mapping[str, Any] | str) -> TranslationSurface:
    """Parse the surface JSON format or one of the builder shorthands."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "lshape" in obj:
        spec = obj["lshape"]
        return build_lshape(spec["a"], spec["b"])
    if "octagon" in obj:
        return build_regular_octagon(float((obj["octagon"] or {}).get("side", 1.0)))
    if "origami" in obj:
        spec = obj["origami"]
        return build_origami(spec["h"], spec["v"])
    if "torus" in obj:
        spec = obj["torus"] or {}
        return build_torus(spec.get("periods", ((1.0, 0.0), (0.0, 1.0))))
    return TranslationSurface.from_data(obj["polygons"], obj["gluings"], obj.get("label"))


def surface_from_spec(spec: str) -> TranslationSurface:
    """Builder shorthand used by the command line.

    ``octagon``, ``torus``, ``lshape:a,b`` and ``origami:<h>,<v>`` where each
    permutation is in cycle notation (``12`` means the cycle (1 2)).
    """
    name, _, args = spec.partition(":")
    name = name.strip().lower()
    if name == "octagon":
        return build_regular_octagon()
    if name == "torus":
        return build_torus()
    if name == "lshape":
        a, b = (float(x) for x in args.split(","))
        return build_lshape(a, b)
    if name == "origami":
        hs, vs = args.split(",")
        h = perm_from_cycles(hs if "(" in hs else f"({' '.join(hs)})")
        v = perm_from_cycles(vs if "(" in vs else f"({' '.join(vs)})")
        n = max(len(h), len(v))
        h = perm_from_cycles(hs if "(" in hs else f"({' '.join(hs)})", n)
        v = perm_from_cycles(vs if "(" in vs else f"({' '.join(vs)})", n)
        return build_origami(h, v, label=f"origami:{args}")
    raise InvalidParameter(f"unknown surface builder {spec!r}")


def edge_array(S: TranslationSurface) -> np.ndarray:
    """Edge vectors of a triangulated surface as an ``(F, 3, 2)`` array."""
    if not S.is_triangulated:
        raise MalformedSurface("edge_array needs a triangulated surface")
    return np.asarray(S.polygons, dtype=float)
