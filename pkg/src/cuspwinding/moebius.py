"""Isometries of the Poincare disc in SU(1,1) form and their boundary action.

A map is stored as the pair ``(a, b)`` with ``|a|^2 - |b|^2 = 1`` and acts by
``z -> (a z + b) / (conj(b) z + conj(a))``.  Boundary points are angles in
``[0, 2 pi)``.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
NORM_TOL = 1e-12
PARABOLIC_TOL = 1e-10
EPS = float(np.finfo(float).eps)


class GeometryError(ValueError):
    """Raised for degenerate or malformed disc isometries."""


class Kind(str, enum.Enum):
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"
    ELLIPTIC = "elliptic"


@dataclass(frozen=True)
class DiscIsometry:
    """Orientation preserving disc isometry ``z -> (a z + b)/(conj(b) z + conj(a))``."""

    a: complex
    b: complex
    name: str = ""

    def __post_init__(self):
        a, b = complex(self.a), complex(self.b)
        if not (cmath.isfinite(a) and cmath.isfinite(b)):
            raise GeometryError(f"non-finite coefficients in {self.name or 'isometry'}")
        det = abs(a) ** 2 - abs(b) ** 2
        # the determinant of a float pair is only known to about eps |a|^2
        if abs(det - 1.0) > NORM_TOL * max(1.0, abs(a) ** 2):
            raise GeometryError(
                f"{self.name or 'isometry'}: |a|^2-|b|^2 = {det!r} is not 1 within {NORM_TOL}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b.conjugate(), self.a.conjugate()]])

    @property
    def is_identity(self) -> bool:
        # a = -1 is the same Moebius map as a = 1
        return abs(self.b) == 0.0 and abs(abs(self.a.real) - 1.0) <= NORM_TOL and abs(self.a.imag) <= NORM_TOL

    def __call__(self, theta):
        return apply_boundary(self, theta)

    def renamed(self, name: str) -> "DiscIsometry":
        return DiscIsometry(self.a, self.b, name)


@dataclass(frozen=True)
class BoundaryArc:
    """Counterclockwise arc ``[start, start + length]`` of the unit circle."""

    start: float
    length: float

    def __post_init__(self):
        if not (0.0 < self.length <= TWO_PI):
            raise GeometryError(f"arc length {self.length!r} outside (0, 2pi]")
        object.__setattr__(self, "start", float(self.start) % TWO_PI)
        object.__setattr__(self, "length", float(self.length))

    @property
    def end(self) -> float:
        return (self.start + self.length) % TWO_PI

    @property
    def midpoint(self) -> float:
        return (self.start + 0.5 * self.length) % TWO_PI

    def contains(self, theta, tol: float = 0.0):
        """Membership ``(theta - start) mod 2pi < length`` with optional slack."""
        d = np.mod(np.asarray(theta, dtype=float) - self.start, TWO_PI)
        inside = d < self.length + tol
        if tol > 0.0:
            inside |= d > TWO_PI - tol
        return inside

    def contains_arc(self, other: "BoundaryArc", tol: float = 0.0) -> bool:
        d = (other.start - self.start) % TWO_PI
        if d > TWO_PI - tol:
            d -= TWO_PI
        return d >= -tol and d + other.length <= self.length + tol

    def complement(self) -> "BoundaryArc":
        return BoundaryArc(self.end, TWO_PI - self.length)

    def gap(self, other: "BoundaryArc") -> float:
        """Angular distance between two arcs, zero if they meet."""
        d1 = (other.start - self.start) % TWO_PI
        d2 = (self.start - other.start) % TWO_PI
        if d1 <= self.length or d2 <= other.length:
            return 0.0
        return min(d1 - self.length, d2 - other.length)


def intersect_arcs(first: BoundaryArc, second: BoundaryArc) -> BoundaryArc | None:
    """Intersection of two arcs, assumed connected; ``None`` when empty or a point."""
    pieces = []
    d = (second.start - first.start) % TWO_PI
    if d < first.length:
        pieces.append((second.start, min(second.length, first.length - d)))
        back = second.length - (TWO_PI - d)
        if back > 0.0:
            pieces.append((first.start, min(back, first.length)))
    else:
        e = (first.start - second.start) % TWO_PI
        if e < second.length:
            pieces.append((first.start, min(first.length, second.length - e)))
    pieces = [p for p in pieces if p[1] > 0.0]
    if not pieces:
        return None
    if len(pieces) > 1:
        raise GeometryError("arc intersection is disconnected")
    return BoundaryArc(*pieces[0])


def rotation(phi: float, name: str = "") -> DiscIsometry:
    """Rotation of the disc by angle ``phi``."""
    return DiscIsometry(cmath.exp(0.5j * phi), 0.0, name)


def identity() -> DiscIsometry:
    return DiscIsometry(1.0, 0.0, "id")


def _normalized(a: complex, b: complex, name: str = "") -> DiscIsometry:
    det = abs(a) ** 2 - abs(b) ** 2
    if det <= 0.0:
        raise GeometryError("composition left the isometry group")
    # rescaling by a determinant that is pure rounding noise would only add error
    if abs(det - 1.0) > 64.0 * EPS * max(1.0, abs(a) ** 2):
        r = math.sqrt(det)
        a, b = a / r, b / r
    return DiscIsometry(a, b, name)


def compose(g: DiscIsometry, h: DiscIsometry) -> DiscIsometry:
    """Return ``g o h`` (``h`` applied first), renormalized."""
    a = g.a * h.a + g.b * h.b.conjugate()
    b = g.a * h.b + g.b * h.a.conjugate()
    return _normalized(a, b)


def inverse(g: DiscIsometry) -> DiscIsometry:
    name = g.name[:-3] if g.name.endswith("^-1") else (g.name + "^-1" if g.name else "")
    return DiscIsometry(g.a.conjugate(), -g.b, name)


def power(g: DiscIsometry, n: int) -> DiscIsometry:
    """Integer power by repeated squaring."""
    if n < 0:
        return power(inverse(g), -n)
    result = identity()
    base = g
    while n:
        if n & 1:
            result = compose(base, result)
        n >>= 1
        if n:
            base = compose(base, base)
    return result


def conjugate(g: DiscIsometry, k: DiscIsometry) -> DiscIsometry:
    """Return ``k g k^-1`` keeping the name of ``g``."""
    return compose(compose(k, g), inverse(k)).renamed(g.name)


def apply_boundary(g: DiscIsometry, theta):
    """Boundary action on angles; scalar in, scalar out."""
    z = np.exp(1j * np.asarray(theta, dtype=float))
    w = (g.a * z + g.b) * np.conj(np.conj(g.b) * z + np.conj(g.a))
    out = np.mod(np.angle(w), TWO_PI)
    return float(out) if out.ndim == 0 else out


def boundary_derivative(g: DiscIsometry, theta):
    """``|g'(e^{i theta})| = 1/|conj(b) e^{i theta} + conj(a)|^2``."""
    z = np.exp(1j * np.asarray(theta, dtype=float))
    out = 1.0 / np.abs(np.conj(g.b) * z + np.conj(g.a)) ** 2
    return float(out) if out.ndim == 0 else out


def log_boundary_derivative(g: DiscIsometry, theta):
    z = np.exp(1j * np.asarray(theta, dtype=float))
    out = -2.0 * np.log(np.abs(np.conj(g.b) * z + np.conj(g.a)))
    return float(out) if out.ndim == 0 else out


def _arg(z: complex) -> float:
    # cmath.phase raises on some subnormal inputs
    return math.atan2(z.imag, z.real)


def classify(g: DiscIsometry) -> Kind:
    if g.is_identity:
        raise GeometryError(f"degenerate generator {g.name!r} (identity)")
    tr = abs(2.0 * g.a.real)
    if abs(tr - 2.0) <= PARABOLIC_TOL:
        return Kind.PARABOLIC
    return Kind.HYPERBOLIC if tr > 2.0 else Kind.ELLIPTIC


def fixed_boundary_points(g: DiscIsometry) -> list[float]:
    """Boundary fixed points: one angle for parabolic maps, two for hyperbolic."""
    kind = classify(g)
    if kind is Kind.ELLIPTIC:
        raise GeometryError(f"no boundary fixed point for elliptic {g.name!r}")
    # roots of conj(b) z^2 + (conj(a) - a) z - b = 0
    cb = g.b.conjugate()
    mid = -2j * g.a.imag
    if kind is Kind.PARABOLIC:
        z = -mid / (2.0 * cb)
        return [_arg(z) % TWO_PI]
    disc = cmath.sqrt(mid * mid + 4.0 * cb * g.b)
    roots = [(-mid + disc) / (2.0 * cb), (-mid - disc) / (2.0 * cb)]
    return sorted(_arg(z) % TWO_PI for z in roots)


def isometric_arc(g: DiscIsometry) -> BoundaryArc:
    """Arc where ``|g'| >= 1``."""
    if abs(g.b) == 0.0:
        raise GeometryError("isometric arc undefined (derivative == 1)")
    center = math.pi - _arg(g.a) + _arg(g.b)
    half = math.acos(min(1.0, abs(g.b) / abs(g.a)))
    return BoundaryArc(center - half, 2.0 * half)


def parabolic_power(g: DiscIsometry, p) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of ``g**p`` for real ``p`` (array allowed), ``g`` parabolic.

    Uses the exact unipotent form ``a = 1 + i p t, b = -i p t xi`` where ``xi``
    is the fixed point, so the result stays on the group for huge ``p``.
    """
    if classify(g) is not Kind.PARABOLIC:
        raise GeometryError(f"{g.name!r} is not parabolic")
    a, b = g.a, g.b
    if a.real < 0.0:
        a, b = -a, -b
    t = a.imag
    xi = 1j * b / t
    xi /= abs(xi)
    p = np.asarray(p, dtype=float)
    return 1.0 + 1j * p * t, -1j * p * t * xi


def coeff_apply(a, b, theta):
    """Vectorized boundary action for coefficient arrays."""
    z = np.exp(1j * np.asarray(theta, dtype=float))
    return np.mod(np.angle((a * z + b) * np.conj(np.conj(b) * z + np.conj(a))), TWO_PI)


def coeff_log_denominator(a, b, theta):
    """``2 log|conj(b) e^{i theta} + conj(a)|``, i.e. minus the log derivative."""
    z = np.exp(1j * np.asarray(theta, dtype=float))
    return 2.0 * np.log(np.abs(np.conj(b) * z + np.conj(a)))


def log_denominator_range(a, b, start, length):
    """Extrema of ``2 log|conj(b) e^{i y} + conj(a)|`` over arcs ``[start, start+length]``.

    Candidates are the endpoints and the two critical angles; inputs broadcast.
    """
    a, b = np.asarray(a), np.asarray(b)
    start, length = np.asarray(start, dtype=float), np.asarray(length, dtype=float)
    ends = [start, start + length]
    vals = [coeff_log_denominator(a, b, y) for y in ends]
    lo = np.minimum(*vals)
    hi = np.maximum(*vals)
    # |.|^2 = |a|^2 + |b|^2 + 2|a||b| cos(y + arg a - arg b)
    crit = np.angle(b) - np.angle(a)
    # the critical values are |a| + |b| and |a| - |b| = 1/(|a| + |b|); the latter
    # cancels completely for long parabolic blocks if evaluated directly
    top = 2.0 * np.log(np.abs(a) + np.abs(b))
    for shift, v in ((0.0, top), (math.pi, -top)):
        y = crit + shift
        inside = np.mod(y - start, TWO_PI) <= length
        lo = np.where(inside, np.minimum(lo, v), lo)
        hi = np.where(inside, np.maximum(hi, v), hi)
    return lo, hi
