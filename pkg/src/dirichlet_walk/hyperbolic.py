"""Upper half-plane primitives with overflow-safe isometries.

Points are complex numbers ``x + iy`` with ``y > 0``; the basepoint is ``i``.
Isometries are elements of PSL(2, R) stored as a unit-scale matrix together
with a power-of-two exponent so that products along long walks never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BASEPOINT = 1j
LN2 = math.log(2.0)

# det(m) is about 4**-s and is computed from O(1) products, so its relative
# error grows like eps * 4**s; beyond this exponent only the norm is fixed
_DET_FIX_MAX_EXPONENT = 4


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class HPoint:
    re: float
    im: float

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise GeometryError("non-finite coordinates")
        if not self.im > 0.0:
            raise GeometryError("imaginary part must be positive")
        if self.im < 1e-300 or self.im > 1e300 or abs(self.re) > 1e300:
            raise GeometryError("point too close to the numeric boundary")

    @classmethod
    def from_complex(cls, z) -> "HPoint":
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    def __complex__(self):
        return self.z


def as_complex(p):
    """Accept HPoint, complex scalars or complex arrays."""
    if isinstance(p, HPoint):
        return p.z
    return p


class ScaledIsometry:
    """Element of PSL(2, R) represented as ``2**exponent * m``.

    ``m`` has Frobenius norm in [1, 2). Instances are immutable.
    """

    __slots__ = ("_m", "_s")

    def __init__(self, m, exponent: int = 0, *, normalize: bool = True):
        m = np.array(m, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(m)):
            raise GeometryError("non-finite matrix entries")
        if normalize:
            m, exponent = _renormalize(m, int(exponent))
        m.setflags(write=False)
        self._m = m
        self._s = int(exponent)

    @classmethod
    def identity(cls) -> "ScaledIsometry":
        return cls(np.eye(2))

    @classmethod
    def from_matrix(cls, g) -> "ScaledIsometry":
        g = np.asarray(g, dtype=float)
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        if not det > 0:
            raise GeometryError("matrix must have positive determinant")
        return cls(g / math.sqrt(det))

    @classmethod
    def translator(cls, p) -> "ScaledIsometry":
        """The affine map z -> y z + x taking the basepoint to ``p``."""
        z = complex(as_complex(p))
        r = math.sqrt(z.imag)
        return cls([[r, z.real / r], [0.0, 1.0 / r]])

    @property
    def m(self) -> np.ndarray:
        return self._m

    @property
    def exponent(self) -> int:
        return self._s

    def matrix(self) -> np.ndarray:
        """The represented matrix; overflows for very long products."""
        return np.ldexp(self._m, self._s)

    def det(self) -> float:
        m = self._m
        return math.ldexp(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0], 2 * self._s)

    def __matmul__(self, other: "ScaledIsometry") -> "ScaledIsometry":
        return ScaledIsometry(self._m @ other._m, self._s + other._s)

    def inverse(self) -> "ScaledIsometry":
        a, b, c, d = self._m.ravel()
        return ScaledIsometry([[d, -b], [-c, a]], self._s, normalize=False)

    def __call__(self, p):
        return apply(self, p)

    def __repr__(self):
        return f"ScaledIsometry(m={self._m.tolist()}, exponent={self._s})"


def _renormalize(m: np.ndarray, s: int):
    norm = math.sqrt(float(np.sum(m * m)))
    if norm == 0.0:
        raise GeometryError("degenerate matrix")
    _, e = math.frexp(norm)
    m = np.ldexp(m, -(e - 1))
    s += e - 1
    if abs(s) <= _DET_FIX_MAX_EXPONENT:
        det = math.ldexp(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0], 2 * s)
        if not det > 0:
            raise GeometryError("orientation lost in composition")
        m = m / math.sqrt(det)
        norm = math.sqrt(float(np.sum(m * m)))
        _, e = math.frexp(norm)
        m = np.ldexp(m, -(e - 1))
        s += e - 1
    return m, s


def dist(p, q):
    """Hyperbolic distance; vectorised over complex arrays.

    Uses ``2 asinh(|p - q| / (2 sqrt(im p im q)))`` which equals the arcosh
    form, keeps full precision at short range and cannot overflow for finite
    inputs.
    """
    p = as_complex(p)
    q = as_complex(q)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        dp = np.subtract(p, q)
        num = np.hypot(np.real(dp), np.imag(dp))
        den = 2.0 * np.sqrt(np.imag(p) * np.imag(q))
        out = 2.0 * np.arcsinh(num / den)
    if not np.all(np.isfinite(out)):
        raise GeometryError("numeric overflow in distance")
    return out if np.ndim(out) else float(out)


def mobius(g, z):
    """Apply a plain 2x2 real matrix (or stack of them) to points."""
    g = np.asarray(g)
    a, b = g[..., 0, 0], g[..., 0, 1]
    c, d = g[..., 1, 0], g[..., 1, 1]
    return (a * z + b) / (c * z + d)


def apply(g: ScaledIsometry, p):
    """Image of ``p`` under ``g``.

    The imaginary part is taken from ``Im(g z) = Im z / |c z + d|^2`` (unit
    determinant) rather than from the complex quotient, which would cancel
    catastrophically once the image is close to the real axis.
    """
    z = as_complex(p)
    a, b, c, d = g.m.ravel()
    den = c * z + d
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        re = np.real((a * z + b) * np.conj(den)) / (np.abs(den) ** 2)
        if abs(g.exponent) <= _DET_FIX_MAX_EXPONENT:
            im = (a * d - b * c) * np.imag(z) / np.abs(den) ** 2
        else:
            # det(2^s m) = 1 is maintained but no longer resolvable from m
            im = np.ldexp(np.imag(z) / np.abs(den) ** 2, -2 * g.exponent)
    out = re + 1j * im
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))) or np.any(im <= 0.0):
        raise GeometryError("orientation/overflow failure")
    if isinstance(p, HPoint):
        return HPoint.from_complex(out)
    return out if np.ndim(out) else complex(out)


def _dist_to_base_parts(a, b, c, d, s):
    q = np.hypot(a - d, b + c)
    with np.errstate(divide="ignore", over="ignore"):
        x = np.ldexp(0.5 * q, s)
        small = 2.0 * np.arcsinh(x)
        large = 2.0 * (np.log(0.5 * q) + s * LN2 + LN2)
    return np.where(s < 480, small, large)


def dist_to_base(g: ScaledIsometry) -> float:
    """d(i, g i) computed from the scaled matrix without forming it."""
    a, b, c, d = g.m.ravel()
    return float(_dist_to_base_parts(a, b, c, d, g.exponent))


def gromov_product(x, y, o, distance=dist) -> float:
    """<x, y>_o = (d(x,o) + d(y,o) - d(x,y)) / 2, clamped at zero."""
    val = 0.5 * (distance(x, o) + distance(y, o) - distance(x, y))
    if np.ndim(val):
        return np.maximum(val, 0.0)
    return max(float(val), 0.0)


def polar_point(r, theta):
    """Point at hyperbolic distance ``r`` from ``i`` in disk direction ``theta``.

    Image of ``i e^r`` under the rotation about ``i`` by ``theta``, written
    out so that no digits are lost as ``tanh(r / 2)`` approaches 1.
    """
    r = np.asarray(r, dtype=float)
    phi = 0.5 * np.asarray(theta, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    ep, em = np.exp(r), np.exp(-r)
    den = c * c * em + s * s * ep
    return s * c * (em - ep) / den + 1j / den


def to_disk(z):
    """Cayley transform to the Poincare disk (basepoint goes to 0)."""
    z = as_complex(z)
    return (z - 1j) / (z + 1j)


def boundary_angle(g: ScaledIsometry, p=BASEPOINT) -> float:
    """Disk-model angle of ``g p``, computed from the unit-scale matrix only."""
    h = g @ ScaledIsometry.translator(p)
    return float(_angle_parts(*h.m.ravel()))


def _angle_parts(a, b, c, d):
    # conjugate into SU(1,1); the image of 0 is beta / conj(alpha)
    alpha = 0.5 * ((a + d) + 1j * (b - c))
    beta = 0.5 * ((a - d) - 1j * (b + c))
    return np.angle(beta / np.conj(alpha))


def disk_area(radius) -> float:
    return 2.0 * math.pi * (math.cosh(radius) - 1.0)


def radial_quantile(u, radius):
    """Inverse of the radial CDF (cosh r - 1) / (cosh R - 1)."""
    return np.arccosh(1.0 + np.asarray(u) * (math.cosh(radius) - 1.0))


def sample_hyperbolic_disk(center, radius: float, stream, index=0, attempt=0):
    """Uniform sample(s) from the hyperbolic disk B(center, radius).

    ``stream`` is an :class:`~dirichlet_walk.streams.IncrementStream`; the
    draw is a pure function of ``(stream.seed, index, attempt)``. ``index``
    may be an array, in which case an array of points is returned.
    """
    if not 0.0 <= radius <= 20.0:
        raise GeometryError("radius out of range [0, 20]")
    u = stream.uniforms(index, attempt, 2)
    r = radial_quantile(u[..., 0], radius)
    theta = 2.0 * math.pi * u[..., 1]
    local = polar_point(r, theta)
    c = as_complex(center)
    out = np.real(c) + np.imag(c) * local
    if np.ndim(out) == 0:
        return HPoint.from_complex(out) if isinstance(center, HPoint) else complex(out)
    return out
