"""Model manifolds with exact geometric primitives.

The catalog covers flat space, constant-curvature hyperbolic space (curvature
-k^2), the hyperbolic upper half-plane in its own chart, and rotationally
symmetric surfaces ds^2 = dr^2 + p(r)^2 dtheta^2 given by a profile p.

Coordinate charts:
  * Euclidean(d):   points are length-d vectors.
  * Hyperbolic(d,k): points are length-d vectors in geodesic normal
    coordinates at the basepoint (r = |v|, direction v/|v|); pairwise
    distances come from the hyperbolic law of cosines.
  * HalfPlane:      points are (x, y) with y > 0; basepoint (0, 1).
  * RotSymSurface:  points are (r, theta) with r >= 0; only radial distances
    are exact (radial rays are geodesics), general pairs get a flagged
    upper bound.

All objects are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma

__all__ = [
    "GeometryError",
    "ProfileFunction",
    "builtin_profile",
    "ModelManifold",
    "Euclidean",
    "Hyperbolic",
    "HalfPlane",
    "RotSymSurface",
    "DistanceBound",
    "VolumeGrowthEstimate",
    "unit_sphere_area",
    "space_from_json",
]

# Quadrature tolerances for ball volumes (closed-form checks demand these).
_QUAD_EPSABS = 1e-10
_QUAD_EPSREL = 1e-8


class GeometryError(ValueError):
    """Invalid coordinates or an operation outside a chart's domain."""


def unit_sphere_area(dim: int) -> float:
    """Surface area of the unit sphere S^{dim-1} in R^dim."""
    if dim < 1:
        raise GeometryError(f"dimension must be >= 1, got {dim}")
    if dim == 1:
        return 2.0  # S^0 = two points
    return 2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0)


@dataclass(frozen=True)
class ProfileFunction:
    """Warping profile of a rotationally symmetric surface.

    p, p_prime, p_double_prime must accept floats or numpy arrays.  Smoothness
    at the pole requires p(0) = 0 and p'(0) = 1; the Gauss curvature at radius
    r is -p''(r)/p(r).  The optional `drift` and `inv_p_sq` callables are
    numerically stable forms of p'/(2p) and 1/p^2 used by the SDE engine
    (the generic quotients overflow for rapidly growing profiles).
    """

    label: str
    p: Callable[[np.ndarray], np.ndarray]
    p_prime: Callable[[np.ndarray], np.ndarray]
    p_double_prime: Callable[[np.ndarray], np.ndarray]
    drift: Callable[[np.ndarray], np.ndarray] | None = None
    inv_p_sq: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        eps = 1e-7
        p0 = float(self.p(eps))
        dp0 = float(self.p_prime(eps))
        if abs(p0) > 10 * eps or abs(dp0 - 1.0) > 1e-4:
            raise GeometryError(
                f"profile {self.label!r} violates p(0)=0, p'(0)=1 "
                f"(p({eps})={p0:.3g}, p'({eps})={dp0:.3g})"
            )

    def gauss_curvature(self, r):
        return -self.p_double_prime(r) / self.p(r)

    def sde_drift(self, r):
        """Radial SDE drift p'(r)/(2 p(r))."""
        if self.drift is not None:
            return self.drift(r)
        return self.p_prime(r) / (2.0 * self.p(r))

    def angular_clock_integrand(self, r):
        """1/p(r)^2, underflowing to 0 for huge p instead of overflowing."""
        if self.inv_p_sq is not None:
            return self.inv_p_sq(r)
        with np.errstate(over="ignore"):
            return 1.0 / self.p(r) ** 2


def builtin_profile(label: str, k: float = 1.0) -> ProfileFunction:
    """Built-in profiles: 'euclid', 'hyperbolic' (curvature -k^2), 'kaimanovich'."""
    if label == "euclid":
        return ProfileFunction(
            label="euclid",
            p=lambda r: np.asarray(r, dtype=float),
            p_prime=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            p_double_prime=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            drift=lambda r: 1.0 / (2.0 * r),
            inv_p_sq=lambda r: 1.0 / np.asarray(r, dtype=float) ** 2,
        )
    if label == "hyperbolic":
        if k <= 0:
            raise GeometryError(f"hyperbolic profile needs k > 0, got {k}")
        return ProfileFunction(
            label=f"hyperbolic(k={k:g})",
            p=lambda r: np.sinh(k * np.asarray(r, dtype=float)) / k,
            p_prime=lambda r: np.cosh(k * np.asarray(r, dtype=float)),
            p_double_prime=lambda r: k * np.sinh(k * np.asarray(r, dtype=float)),
            # (k/2) coth(kr), stable at large r
            drift=lambda r: (k / 2.0)
            * (1.0 + 2.0 / np.expm1(np.minimum(2.0 * k * np.asarray(r, dtype=float), 700.0))),
            inv_p_sq=lambda r: (k / np.sinh(np.minimum(k * np.asarray(r, dtype=float), 360.0))) ** 2,
        )
    if label == "kaimanovich":
        def _inv_p_sq(r):
            r = np.asarray(r, dtype=float)
            with np.errstate(over="ignore", divide="ignore"):
                return np.exp(-(r * r) - 2.0 * np.log(r))

        return ProfileFunction(
            label="kaimanovich",
            p=lambda r: np.asarray(r, dtype=float) * np.exp(0.5 * np.asarray(r, dtype=float) ** 2),
            p_prime=lambda r: (1.0 + np.asarray(r, dtype=float) ** 2)
            * np.exp(0.5 * np.asarray(r, dtype=float) ** 2),
            p_double_prime=lambda r: (3.0 * np.asarray(r, dtype=float) + np.asarray(r, dtype=float) ** 3)
            * np.exp(0.5 * np.asarray(r, dtype=float) ** 2),
            drift=lambda r: 0.5 * (np.asarray(r, dtype=float) + 1.0 / np.asarray(r, dtype=float)),
            inv_p_sq=_inv_p_sq,
        )
    raise GeometryError(f"unknown profile label {label!r}")


@dataclass(frozen=True)
class DistanceBound:
    value: float
    exact: bool


@dataclass(frozen=True)
class VolumeGrowthEstimate:
    """Fitted exponential volume growth rate v = slope of log vol(B_r)."""

    value: float
    residual: float
    finite: bool
    r_max: float
    first_overflow_radius: float | None = None


class ModelManifold:
    """Base class; concrete spaces implement the chart-specific pieces."""

    dim: int
    homogeneous: bool = True

    # -- chart ---------------------------------------------------------------
    @property
    def basepoint(self):
        raise NotImplementedError

    def validate_point(self, pt) -> np.ndarray:
        raise NotImplementedError

    def distance(self, a, b) -> float:
        """Exact Riemannian distance; GeometryError where no exact form exists."""
        bound = self.distance_bound(a, b)
        if not bound.exact:
            raise GeometryError(f"{self.label()} has no exact distance for this pair")
        return bound.value

    def distance_bound(self, a, b) -> DistanceBound:
        raise NotImplementedError

    def pairwise_distances(self, points) -> np.ndarray:
        pts = [self.validate_point(p) for p in points]
        n = len(pts)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = self.distance(pts[i], pts[j])
        return out

    # -- radial geometry -----------------------------------------------------
    def sphere_area(self, r: float) -> float:
        """Area of the geodesic sphere of radius r about the basepoint."""
        raise NotImplementedError

    def log_sphere_area(self, r: float) -> float:
        """log sphere_area(r), stable for large r."""
        a = self.sphere_area(r)
        if a <= 0:
            return -math.inf
        return math.log(a)

    def ball_volume(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        if r == 0:
            return 0.0
        val, _ = quad(self.sphere_area, 0.0, r, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=200)
        return val

    def volume_growth(self, r_max: float, samples: int = 200) -> VolumeGrowthEstimate:
        """Least-squares slope of log vol(B_r) over the top half of the radius grid.

        Non-finite volumes (profile overflow) are reported via the `finite`
        flag, never silently clipped.
        """
        if r_max <= 0 or samples < 4:
            raise GeometryError("need r_max > 0 and samples >= 4")
        r_grid = np.linspace(r_max / samples, r_max, samples)
        vols = np.array([self.ball_volume(r) for r in r_grid])
        bad = ~np.isfinite(vols)
        if bad.any():
            return VolumeGrowthEstimate(
                value=math.inf,
                residual=math.nan,
                finite=False,
                r_max=r_max,
                first_overflow_radius=float(r_grid[bad][0]),
            )
        top = r_grid >= r_max / 2
        x, y = r_grid[top], np.log(vols[top])
        design = np.vstack([x, np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
        return VolumeGrowthEstimate(value=float(coef[0]), residual=resid, finite=True, r_max=r_max)

    # -- misc ----------------------------------------------------------------
    def label(self) -> str:
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError


class Euclidean(ModelManifold):
    def __init__(self, dim: int):
        if not isinstance(dim, int) or dim < 1:
            raise GeometryError(f"Euclidean dimension must be a positive integer, got {dim}")
        self.dim = dim

    @property
    def basepoint(self):
        return np.zeros(self.dim)

    def validate_point(self, pt) -> np.ndarray:
        v = np.asarray(pt, dtype=float).reshape(-1)
        if v.shape != (self.dim,):
            raise GeometryError(f"expected a point in R^{self.dim}, got shape {v.shape}")
        return v

    def distance_bound(self, a, b) -> DistanceBound:
        a, b = self.validate_point(a), self.validate_point(b)
        return DistanceBound(float(np.linalg.norm(a - b)), True)

    def dist_to_many(self, points: np.ndarray, pt) -> np.ndarray:
        return np.linalg.norm(np.asarray(points, dtype=float) - self.validate_point(pt), axis=1)

    def sphere_area(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        return unit_sphere_area(self.dim) * r ** (self.dim - 1)

    def log_sphere_area(self, r: float) -> float:
        if r <= 0:
            return -math.inf
        return math.log(unit_sphere_area(self.dim)) + (self.dim - 1) * math.log(r)

    def ball_volume(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        return math.pi ** (self.dim / 2.0) / gamma(self.dim / 2.0 + 1.0) * r ** self.dim

    def label(self) -> str:
        return f"euclidean(dim={self.dim})"

    def to_json_dict(self) -> dict:
        return {"kind": "euclidean", "dim": self.dim}


def _hyperbolic_dist(k: float, r1, r2, cos_angle):
    """Hyperbolic law of cosines, curvature -k^2.

    cosh(k d) = cosh(k r1) cosh(k r2) - sinh(k r1) sinh(k r2) cos(angle)
    """
    arg = np.cosh(k * r1) * np.cosh(k * r2) - np.sinh(k * r1) * np.sinh(k * r2) * cos_angle
    return np.arccosh(np.maximum(arg, 1.0)) / k


class Hyperbolic(ModelManifold):
    """H^dim with curvature -k^2, chart = geodesic normal coordinates at o."""

    def __init__(self, dim: int, k: float = 1.0):
        if not isinstance(dim, int) or dim < 1:
            raise GeometryError(f"Hyperbolic dimension must be a positive integer, got {dim}")
        if k <= 0:
            raise GeometryError(f"curvature parameter k must be > 0, got {k}")
        self.dim = dim
        self.k = float(k)

    @property
    def basepoint(self):
        return np.zeros(self.dim)

    def validate_point(self, pt) -> np.ndarray:
        v = np.asarray(pt, dtype=float).reshape(-1)
        if v.shape != (self.dim,):
            raise GeometryError(f"expected normal coordinates in R^{self.dim}, got shape {v.shape}")
        return v

    def distance_bound(self, a, b) -> DistanceBound:
        a, b = self.validate_point(a), self.validate_point(b)
        r1, r2 = np.linalg.norm(a), np.linalg.norm(b)
        if r1 == 0 or r2 == 0:
            return DistanceBound(float(r1 + r2), True)
        cos_angle = float(np.clip(a @ b / (r1 * r2), -1.0, 1.0))
        return DistanceBound(float(_hyperbolic_dist(self.k, r1, r2, cos_angle)), True)

    def dist_to_many(self, points: np.ndarray, pt) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        p = self.validate_point(pt)
        r1 = np.linalg.norm(pts, axis=1)
        r2 = np.linalg.norm(p)
        if r2 == 0:
            return r1
        with np.errstate(invalid="ignore"):
            cosang = np.where(r1 > 0, pts @ p / np.maximum(r1 * r2, 1e-300), 1.0)
        return _hyperbolic_dist(self.k, r1, r2, np.clip(cosang, -1.0, 1.0))

    def sphere_area(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        return unit_sphere_area(self.dim) * (math.sinh(self.k * r) / self.k) ** (self.dim - 1)

    def log_sphere_area(self, r: float) -> float:
        if r <= 0:
            return -math.inf
        kr = self.k * r
        # log(sinh(kr)/k) without overflow
        log_p = kr + math.log1p(-math.exp(-2.0 * kr)) - math.log(2.0 * self.k)
        return math.log(unit_sphere_area(self.dim)) + (self.dim - 1) * log_p

    def ball_volume(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        k = self.k
        if self.dim == 1:
            return 2.0 * r
        if self.dim == 2:
            return 2.0 * math.pi * (math.cosh(k * r) - 1.0) / k ** 2
        if self.dim == 3:
            return 2.0 * math.pi * (math.sinh(k * r) * math.cosh(k * r) - k * r) / k ** 3
        return super().ball_volume(r)

    def label(self) -> str:
        return f"hyperbolic(dim={self.dim},k={self.k:g})"

    def to_json_dict(self) -> dict:
        return {"kind": "hyperbolic", "dim": self.dim, "k": self.k}


class HalfPlane(ModelManifold):
    """Upper half-plane {(x, y): y > 0}, ds^2 = y^-2 (dx^2 + dy^2), curvature -1."""

    dim = 2
    k = 1.0

    @property
    def basepoint(self):
        return np.array([0.0, 1.0])

    def validate_point(self, pt) -> np.ndarray:
        v = np.asarray(pt, dtype=float).reshape(-1)
        if v.shape != (2,):
            raise GeometryError(f"expected (x, y), got shape {v.shape}")
        if not v[1] > 0:
            raise GeometryError(f"half-plane needs y > 0, got y = {v[1]}")
        return v

    def distance_bound(self, a, b) -> DistanceBound:
        a, b = self.validate_point(a), self.validate_point(b)
        arg = 1.0 + ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) / (2.0 * a[1] * b[1])
        return DistanceBound(float(np.arccosh(max(arg, 1.0))), True)

    def dist_to_many(self, points: np.ndarray, pt) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        p = self.validate_point(pt)
        arg = 1.0 + ((pts[:, 0] - p[0]) ** 2 + (pts[:, 1] - p[1]) ** 2) / (2.0 * pts[:, 1] * p[1])
        return np.arccosh(np.maximum(arg, 1.0))

    def sphere_area(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        return 2.0 * math.pi * math.sinh(r)

    def log_sphere_area(self, r: float) -> float:
        if r <= 0:
            return -math.inf
        return math.log(2.0 * math.pi) + r + math.log1p(-math.exp(-2.0 * r)) - math.log(2.0)

    def ball_volume(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        return 2.0 * math.pi * (math.cosh(r) - 1.0)

    def label(self) -> str:
        return "halfplane"

    def to_json_dict(self) -> dict:
        return {"kind": "halfplane"}


class RotSymSurface(ModelManifold):
    """Surface ds^2 = dr^2 + p(r)^2 dtheta^2; chart (r, theta), pole r = 0.

    Radial rays are geodesics, so pole-to-point distances (and distances
    between points on a common ray) are exact; other pairs only get an upper
    bound from explicit comparison paths.
    """

    dim = 2
    homogeneous = False

    def __init__(self, profile: ProfileFunction):
        self.profile = profile

    @property
    def basepoint(self):
        return np.array([0.0, 0.0])

    def validate_point(self, pt) -> np.ndarray:
        v = np.asarray(pt, dtype=float).reshape(-1)
        if v.shape != (2,):
            raise GeometryError(f"expected (r, theta), got shape {v.shape}")
        if v[0] < 0:
            raise GeometryError(f"radius must be >= 0, got r = {v[0]}")
        return v

    def distance_bound(self, a, b) -> DistanceBound:
        a, b = self.validate_point(a), self.validate_point(b)
        r1, th1 = a
        r2, th2 = b
        if r1 == 0 or r2 == 0:
            return DistanceBound(float(r1 + r2), True)
        dth = abs(th1 - th2) % (2.0 * math.pi)
        dth = min(dth, 2.0 * math.pi - dth)
        if dth == 0.0:
            return DistanceBound(abs(r1 - r2), True)
        # comparison paths: radial + circular arc (either radius), or through the pole
        arc_lo = abs(r1 - r2) + float(self.profile.p(min(r1, r2))) * dth
        arc_hi = abs(r1 - r2) + float(self.profile.p(max(r1, r2))) * dth
        return DistanceBound(min(r1 + r2, arc_lo, arc_hi), False)

    def sphere_area(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        return 2.0 * math.pi * float(self.profile.p(r))

    def ball_volume(self, r: float) -> float:
        if r < 0:
            raise GeometryError(f"radius must be >= 0, got {r}")
        if r == 0:
            return 0.0
        with np.errstate(over="ignore"):
            val, _ = quad(
                lambda s: 2.0 * math.pi * float(self.profile.p(s)),
                0.0,
                r,
                epsabs=_QUAD_EPSABS,
                epsrel=_QUAD_EPSREL,
                limit=200,
            )
        return val

    def label(self) -> str:
        return f"rotsym({self.profile.label})"

    def to_json_dict(self) -> dict:
        label = self.profile.label
        if label.startswith("hyperbolic"):
            k = float(label.partition("k=")[2].rstrip(")")) if "k=" in label else 1.0
            return {"kind": "rotsym", "profile": "hyperbolic", "k": k}
        return {"kind": "rotsym", "profile": label}


def space_from_json(obj: dict) -> ModelManifold:
    """Inverse of ModelManifold.to_json_dict."""
    kind = obj.get("kind")
    if kind == "euclidean":
        return Euclidean(int(obj["dim"]))
    if kind == "hyperbolic":
        return Hyperbolic(int(obj["dim"]), float(obj.get("k", 1.0)))
    if kind == "halfplane":
        return HalfPlane()
    if kind == "rotsym":
        return RotSymSurface(builtin_profile(obj["profile"], float(obj.get("k", 1.0))))
    raise GeometryError(f"unknown space kind {kind!r}")
