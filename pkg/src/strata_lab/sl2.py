"""SL(2,R) algebra: norms, KAK, flows, the smeared set E_t, classification.

Matrices are small immutable value objects; everything here is pure Python
arithmetic except the batched helpers that return numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import ClassificationError, InvalidMatrix, InvalidParameter

DET_TOL = 1e-12
PARABOLIC_TOL = 1e-9


@dataclass(frozen=True)
class Mat2:
    """A real 2x2 matrix of determinant one, stored row-major.

    The determinant is checked at construction with a tolerance that scales
    with the squared Frobenius norm, since products of large matrices lose
    relative, not absolute, precision.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        scale = max(1.0, self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d)
        if not all(math.isfinite(x) for x in (self.a, self.b, self.c, self.d)):
            raise InvalidMatrix("non-finite matrix entry")
        if abs(self.det - 1.0) > DET_TOL * scale * 1e3:
            raise InvalidMatrix(f"determinant {self.det!r} is not 1")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Mat2":
        (a, b), (c, d) = rows
        return cls(float(a), float(b), float(c), float(d))

    @classmethod
    def from_tuple(cls, vals: Sequence[float]) -> "Mat2":
        a, b, c, d = vals
        return cls(float(a), float(b), float(c), float(d))

    @classmethod
    def checked(cls, a: float, b: float, c: float, d: float, tol: float = 1e-9) -> "Mat2":
        """Build from raw entries, rejecting determinants off by more than ``tol``."""
        det = a * d - b * c
        if not math.isfinite(det) or abs(det - 1.0) > tol:
            raise InvalidMatrix(f"determinant {det!r} differs from 1 by more than {tol}")
        return cls._unchecked(a, b, c, d)

    @classmethod
    def _unchecked(cls, a: float, b: float, c: float, d: float) -> "Mat2":
        obj = object.__new__(cls)
        object.__setattr__(obj, "a", float(a))
        object.__setattr__(obj, "b", float(b))
        object.__setattr__(obj, "c", float(c))
        object.__setattr__(obj, "d", float(d))
        return obj

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> float:
        return self.a + self.d

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2._unchecked(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "Mat2":
        return Mat2._unchecked(self.d, -self.b, -self.c, self.a)

    def transpose(self) -> "Mat2":
        return Mat2._unchecked(self.a, self.c, self.b, self.d)

    def __neg__(self) -> "Mat2":
        return Mat2._unchecked(-self.a, -self.b, -self.c, -self.d)

    def apply(self, v: Sequence[float]) -> tuple[float, float]:
        x, y = v
        return (self.a * x + self.b * y, self.c * x + self.d * y)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def max_abs_diff(self, other: "Mat2") -> float:
        return max(abs(x - y) for x, y in zip(self.as_tuple(), other.as_tuple()))

    def is_identity(self, tol: float = PARABOLIC_TOL) -> bool:
        return self.max_abs_diff(IDENTITY) <= tol

    def rounded(self) -> "Mat2":
        """Nearest integer matrix, used to report lattice elements cleanly."""
        return Mat2.checked(*(float(round(x)) for x in self.as_tuple()))


IDENTITY = Mat2(1.0, 0.0, 0.0, 1.0)
MINUS_IDENTITY = Mat2(-1.0, 0.0, 0.0, -1.0)


def as_mat2(m: Mat2 | Sequence[float] | Sequence[Sequence[float]], tol: float = 1e-9) -> Mat2:
    """Coerce a matrix-like value, checking the determinant against ``tol``."""
    if isinstance(m, Mat2):
        return m
    arr = np.asarray(m, dtype=float).reshape(-1)
    if arr.size != 4:
        raise InvalidMatrix("expected four entries")
    return Mat2.checked(*arr.tolist(), tol=tol)


def frobenius_norm(m: Mat2) -> float:
    """Frobenius norm ``sqrt(a^2 + b^2 + c^2 + d^2)``."""
    return math.sqrt(m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d)


def singular_values(m: Mat2) -> tuple[float, float]:
    """Return ``(sigma_max, sigma_min)``; for det 1 their product is 1.

    Uses ``sigma_max + sigma_min = sqrt(||M||^2 + 2 det)`` and
    ``sigma_max - sigma_min = sqrt(||M||^2 - 2 det)``, which avoids the
    cancellation of the quadratic formula for large norms.
    """
    n2 = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d
    det = m.det
    s_plus = math.sqrt(max(n2 + 2.0 * det, 0.0))
    s_minus = math.sqrt(max(n2 - 2.0 * det, 0.0))
    smax = 0.5 * (s_plus + s_minus)
    smin = abs(det) / smax if smax > 0 else 0.0
    return smax, smin


def sigma_max(m: Mat2) -> float:
    return singular_values(m)[0]


def sigma_min(m: Mat2) -> float:
    return singular_values(m)[1]


def rotation(theta: float) -> Mat2:
    c, s = math.cos(theta), math.sin(theta)
    return Mat2._unchecked(c, -s, s, c)


def kak_decompose(m: Mat2) -> tuple[Mat2, Mat2, Mat2]:
    """Cartan decomposition ``M = K1 A K2`` with ``A = diag(sigma, 1/sigma)``.

    Returns
    -------
    (K1, A, K2)
        Rotations ``K1``, ``K2`` and the diagonal factor with ``sigma >= 1``.
    """
    u, s, vt = np.linalg.svd(m.as_array())
    # Force both orthogonal factors into SO(2); det M = 1 keeps A positive.
    if np.linalg.det(u) < 0:
        u[:, 1] *= -1.0
        vt[1, :] *= -1.0
    smax, _ = singular_values(m)
    k1 = Mat2._unchecked(u[0, 0], u[0, 1], u[1, 0], u[1, 1])
    k2 = Mat2._unchecked(vt[0, 0], vt[0, 1], vt[1, 0], vt[1, 1])
    a = Mat2._unchecked(smax, 0.0, 0.0, 1.0 / smax)
    return k1, a, k2


FlowKind = Literal["geodesic", "horocycle", "horocycle_transpose"]


def flow(kind: FlowKind, param: float) -> Mat2:
    """One-parameter subgroups: ``a_t``, ``u_s`` and the transpose horocycle."""
    if kind == "geodesic":
        return Mat2._unchecked(math.exp(param), 0.0, 0.0, math.exp(-param))
    if kind == "horocycle":
        return Mat2._unchecked(1.0, param, 0.0, 1.0)
    if kind == "horocycle_transpose":
        return Mat2._unchecked(1.0, 0.0, param, 1.0)
    raise InvalidParameter(f"unknown flow kind {kind!r}")


def a_t(t: float) -> Mat2:
    return flow("geodesic", t)


def u_s(s: float) -> Mat2:
    return flow("horocycle", s)


def classify(m: Mat2, tol: float = PARABOLIC_TOL) -> str:
    """Conjugacy type from ``|trace|``: elliptic, parabolic, hyperbolic or identity."""
    if m.is_identity(tol) or (-m).is_identity(tol):
        return "identity"
    tr = abs(m.trace)
    if tr < 2.0 - tol:
        return "elliptic"
    if tr <= 2.0 + tol:
        return "parabolic"
    return "hyperbolic"


def translation_length(m: Mat2) -> float:
    """Hyperbolic translation length ``2 arccosh(|tr| / 2)``."""
    if classify(m) != "hyperbolic":
        raise ClassificationError("translation length requires a hyperbolic element")
    return 2.0 * math.acosh(abs(m.trace) / 2.0)


def teich_distance_upper_bound(m: Mat2) -> float:
    """``log sigma_max(M)``, the dilatation bound on ``d_T(x, M x)``."""
    return math.log(sigma_max(m))


def conjugate_by_horocycle(entries: Sequence[float], tau: float) -> tuple[float, float, float, float]:
    """Closed form of ``u_tau M u_{-tau}`` for ``M = [[a1, a2], [a3, a4]]``."""
    a1, a2, a3, a4 = entries
    return (a1 + a3 * tau, a2 + (a4 - a1) * tau - a3 * tau * tau, a3, a4 - a3 * tau)


@dataclass(frozen=True)
class EtFactor:
    """Factors ``(s, tau, r)`` of one element ``u^T_s a_tau a_t u_r``."""

    s: float
    tau: float
    r: float


@dataclass(frozen=True)
class EtSample:
    """Tensor grid over the smeared set ``E_t``.

    Attributes
    ----------
    t, beta : float
        Flow time and smearing radius.
    elements : tuple of Mat2
        Grid elements in index order ``(i_s, i_tau, i_r)`` (``r`` fastest).
    factors : tuple of EtFactor
        The factorisation of each element, aligned with ``elements``.
    grid_spec : tuple of int
        Number of grid points along ``s``, ``tau`` and ``r``.
    """

    t: float
    beta: float
    elements: tuple[Mat2, ...]
    factors: tuple[EtFactor, ...]
    grid_spec: tuple[int, int, int]
    steps: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))

    def __len__(self) -> int:
        return len(self.elements)

    def rebuild(self, k: int) -> Mat2:
        f = self.factors[k]
        return et_element(self.t, f.s, f.tau, f.r)


def default_grid(t: float) -> tuple[int, int, int]:
    return (9, 9, max(64, math.ceil(math.exp(t))))


def _axis(n: int, lo: float, hi: float) -> list[float]:
    if n == 1:
        return [lo if lo == hi else 0.5 * (lo + hi)] if lo != -hi else [0.0]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def et_element(t: float, s: float, tau: float, r: float) -> Mat2:
    return flow("horocycle_transpose", s) @ a_t(tau + t) @ u_s(r)


def sample_E_t(t: float, beta: float, steps: Sequence[int] | None = None) -> EtSample:
    """Uniform grid on ``E_t = B_beta a_t {u_r : r in [0, 1]}``.

    Parameters
    ----------
    t : float
        Flow time, ``t >= 0``.
    beta : float
        Smearing radius with ``exp(-0.01 t) < beta < 1``.
    steps : (n_s, n_tau, n_r), optional
        Grid sizes (inclusive endpoints); defaults to ``(9, 9, max(64, ceil(e^t)))``.
        A single point along the ``s`` or ``tau`` axis sits at 0.
    """
    if not (math.exp(-0.01 * t) < beta < 1.0):
        raise InvalidParameter(f"beta={beta} must satisfy exp(-0.01 t) < beta < 1")
    n_s, n_tau, n_r = tuple(int(k) for k in (steps or default_grid(t)))
    if min(n_s, n_tau, n_r) < 1:
        raise InvalidParameter("grid steps must be >= 1")
    s_axis = _axis(n_s, -beta, beta)
    tau_axis = _axis(n_tau, -beta, beta)
    r_axis = [0.0] if n_r == 1 else [k / (n_r - 1) for k in range(n_r)]
    elements: list[Mat2] = []
    factors: list[EtFactor] = []
    for s in s_axis:
        for tau in tau_axis:
            for r in r_axis:
                factors.append(EtFactor(s, tau, r))
                elements.append(et_element(t, s, tau, r))

    def step(axis: list[float]) -> float:
        return axis[1] - axis[0] if len(axis) > 1 else 0.0

    return EtSample(
        t=float(t),
        beta=float(beta),
        elements=tuple(elements),
        factors=tuple(factors),
        grid_spec=(n_s, n_tau, n_r),
        steps=(step(s_axis), step(tau_axis), step(r_axis)),
    )


def haar_volume_E_t(t: float, beta: float, samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte-Carlo Haar volume of ``E_t`` (left Haar measure, unit normalisation).

    Conjugating ``a_t`` past the horocycle segment gives
    ``E_t = B_beta {u_x : 0 <= x <= e^{2t}} a_t``; in the coordinates
    ``u^T_s a_tau u_x`` the Haar density is ``e^{-2 tau}``, which is averaged
    over uniform samples of ``tau``.

    Returns
    -------
    (volume, standard_error)
    """
    if samples <= 1:
        raise InvalidParameter("samples must be > 1")
    tau = rng.uniform(-beta, beta, samples)
    jac = np.exp(-2.0 * tau)
    box = (2.0 * beta) ** 2 * math.exp(2.0 * t)
    return float(box * jac.mean()), float(box * jac.std(ddof=1) / math.sqrt(samples))


def random_sl2(rng: np.random.Generator, bound: float = 5.0) -> Mat2:
    """Random SL(2,R) element with entries in ``[-bound, bound]`` (rejection)."""
    while True:
        a, b, c = rng.uniform(-bound, bound, 3)
        if abs(a) < 1e-3:
            continue
        d = (1.0 + b * c) / a
        if abs(d) <= bound:
            return Mat2.checked(a, b, c, d)


def product(ms: Iterable[Mat2]) -> Mat2:
    out = IDENTITY
    for m in ms:
        out = out @ m
    return out
