"""The Gromov distance d_GS on finite pointed metric spaces, and the
Cauchy-chain gluing construction of limit spaces.

d_GS(X1, X2) is the infimum of eps in (0, 1/2) such that some admissible
metric c on the disjoint union X1 ⊔ X2 has c(o1, o2) < eps, every point of
the 1/eps-ball of o1 within eps of X2, and vice versa; 1/2 if none exists.
Strict inequalities are handled by a delta = 1e-9 margin; the bisection
reports its bracket so the strict/non-strict distinction stays below tol.

Feasibility at a given eps: the per-point covering requirements are
disjunctions ("some partner within eps").  For a fixed choice of partners
("bridges"), the remaining conjunctive system has a greatest element

    m(x, y) = min over bridges (xs, ys, b) of d1(x, xs) + b + d2(ys, y)

(the set of cross matrices satisfying the Lipschitz upper constraints and
bridge caps is closed under pointwise min and max), so the system is
feasible iff m clears the positivity floor and the lower triangle
constraints, and then m itself is a witness.  m shrinks as bridges are
added, so a partial assignment that already fails can be pruned: the
partner search is exact backtracking.  Candidate partners are pruned to the
window |d1(o1,x) - d2(o2,y)| <= 2(eps - delta), which is implied by any
feasible cross matrix, and capped at the k_nearest radially closest; only
the cap can lose solutions and results carry an `exact` flag.

An independent route through a dense two-phase simplex over the same
constraint system (`feasible_lp`) is kept as an oracle for the tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _lp
from .model_spaces import (
    Euclidean,
    GeometryError,
    HalfPlane,
    Hyperbolic,
    ModelManifold,
    RotSymSurface,
)

__all__ = [
    "MetricError",
    "GluingError",
    "FinitePointedSpace",
    "AdmissibleExtension",
    "FeasibilityResult",
    "feasible",
    "feasible_lp",
    "GromovDistanceResult",
    "gromov_distance",
    "certify_upper",
    "identity_cross",
    "ChainGlueResult",
    "chain_glue",
    "net_from_manifold",
    "DELTA",
]

DELTA = 1e-9  # margin standing in for the strict inequalities in the d_GS definition


class MetricError(ValueError):
    """Input matrix is not a metric, or a cross matrix is not admissible."""


class GluingError(ValueError):
    """Chain-gluing certificate violated."""


@dataclass(frozen=True)
class FinitePointedSpace:
    """n-point metric space, basepoint index 0, validated on construction."""

    dist: np.ndarray
    basepoint: int = 0

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        object.__setattr__(self, "dist", d)
        if self.basepoint != 0:
            raise MetricError("basepoint is normalized to index 0")
        self.validate()

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def validate(self, tol: float = 1e-12) -> None:
        d = self.dist
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise MetricError(f"distance matrix must be square, got {d.shape}")
        if not np.isfinite(d).all():
            raise MetricError("distance matrix has non-finite entries")
        if np.abs(np.diag(d)).max(initial=0.0) > tol:
            raise MetricError("diagonal must be zero")
        if np.abs(d - d.T).max(initial=0.0) > tol:
            raise MetricError("distance matrix must be symmetric")
        if d.shape[0] > 1:
            mask = ~np.eye(d.shape[0], dtype=bool)
            if d[mask].min() <= 0:
                i, j = np.argwhere((d <= 0) & mask)[0]
                raise MetricError(f"non-positive off-diagonal distance at ({i},{j})")
        # V[i,j,k] = d(i,j) - d(i,k) - d(k,j)
        viol = d[:, :, None] - d[:, None, :] - d.T[None, :, :]
        worst = viol.max()
        if worst > tol:
            i, j, k = np.unravel_index(np.argmax(viol), viol.shape)
            raise MetricError(
                f"triangle inequality violated by {worst:.3g} at (i={i}, j={j}, k={k}): "
                f"d({i},{j}) > d({i},{k}) + d({k},{j})"
            )

    def radii(self) -> np.ndarray:
        return self.dist[0]

    def ball(self, radius: float) -> "FinitePointedSpace":
        keep = np.where(self.radii() <= radius)[0]
        if keep[0] != 0:
            keep = np.concatenate([[0], keep])
        return FinitePointedSpace(self.dist[np.ix_(keep, keep)])

    def to_json_dict(self) -> dict:
        return {"n": self.n, "basepoint": 0, "dist": self.dist.tolist()}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FinitePointedSpace":
        d = np.asarray(obj["dist"], dtype=float)
        if "n" in obj and int(obj["n"]) != d.shape[0]:
            raise MetricError(f"n = {obj['n']} does not match matrix size {d.shape[0]}")
        return cls(d, basepoint=int(obj.get("basepoint", 0)))


@dataclass(frozen=True)
class AdmissibleExtension:
    """Candidate cross-distances c(x, y) for the disjoint union X1 ⊔ X2."""

    cross: np.ndarray

    def validate(self, d1: np.ndarray, d2: np.ndarray, tol: float = 1e-9) -> None:
        c = np.asarray(self.cross, dtype=float)
        n1, n2 = d1.shape[0], d2.shape[0]
        if c.shape != (n1, n2):
            raise MetricError(f"cross matrix shape {c.shape} != ({n1}, {n2})")
        if not (c > 0).all():
            raise MetricError("cross distances must be strictly positive")
        diff1 = np.abs(c[:, None, :] - c[None, :, :]) - d1[:, :, None]
        if diff1.max() > tol:
            raise MetricError(f"row Lipschitz constraint violated by {diff1.max():.3g}")
        low1 = d1[:, :, None] - (c[:, None, :] + c[None, :, :])
        if low1.max() > tol:
            raise MetricError(f"row lower constraint violated by {low1.max():.3g}")
        diff2 = np.abs(c[:, :, None] - c[:, None, :]) - d2[None, :, :]
        if diff2.max() > tol:
            raise MetricError(f"column Lipschitz constraint violated by {diff2.max():.3g}")
        low2 = d2[None, :, :] - (c[:, :, None] + c[:, None, :])
        if low2.max() > tol:
            raise MetricError(f"column lower constraint violated by {low2.max():.3g}")


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: np.ndarray | None
    exact: bool
    nodes: int
    eps: float


def _covering_sets(d1, d2, eps):
    ball_radius = 1.0 / eps
    covered1 = [i for i in range(d1.shape[0]) if d1[0, i] <= ball_radius]
    covered2 = [j for j in range(d2.shape[0]) if d2[0, j] <= ball_radius]
    return covered1, covered2


def _candidates(rho_self, rho_other, eps_margin, k_nearest):
    """Partner indices within the exact radial window, nearest first."""
    gaps = np.abs(rho_other - rho_self)
    idx = np.where(gaps <= 2.0 * eps_margin + 1e-15)[0]
    order = np.argsort(gaps[idx], kind="stable")
    idx = idx[order]
    truncated = idx.size > k_nearest
    return list(idx[:k_nearest]), truncated


def _assignment_check(m, d1, d2, delta, tol=1e-11):
    if (m < delta - 1e-15).any():
        return False
    if ((m[:, None, :] + m[None, :, :]) - d1[:, :, None] < -tol).any():
        return False
    if ((m[:, :, None] + m[:, None, :]) - d2[None, :, :] < -tol).any():
        return False
    return True


def feasible(
    a: FinitePointedSpace,
    b: FinitePointedSpace,
    eps: float,
    k_nearest: int = 4,
    max_nodes: int = 200000,
) -> FeasibilityResult:
    """Decide whether an admissible extension realizes the d_GS conditions at eps."""
    if not (0.0 < eps < 0.5):
        raise MetricError(f"eps must lie in (0, 1/2), got {eps}")
    d1, d2 = a.dist, b.dist
    cap = eps - DELTA
    if cap <= 0:
        return FeasibilityResult(False, None, True, 0, eps)
    covered1, covered2 = _covering_sets(d1, d2, eps)
    rho1, rho2 = d1[0], d2[0]

    # candidate partners per covered point (exact window, nearest-first)
    cands = []
    truncated_any = False
    for x in covered1:
        c, tr = _candidates(rho1[x], rho2, cap, k_nearest)
        truncated_any |= tr
        if not c:
            return FeasibilityResult(False, None, True, 0, eps)
        cands.append(("r", x, c))
    for y in covered2:
        c, tr = _candidates(rho2[y], rho1, cap, k_nearest)
        truncated_any |= tr
        if not c:
            return FeasibilityResult(False, None, True, 0, eps)
        cands.append(("c", y, c))
    cands.sort(key=lambda e: (len(e[2]), e[0], e[1]))  # most constrained first

    base = d1[:, [0]] + cap + d2[[0], :]
    nodes = 0

    def bridge(side, p, q):
        if side == "r":
            return d1[:, [p]] + cap + d2[[q], :]
        return d1[:, [q]] + cap + d2[[p], :]

    def covered_already(side, p, m):
        if side == "r":
            return m[p].min() <= cap + 1e-15
        return m[:, p].min() <= cap + 1e-15

    def search(i, m):
        nonlocal nodes
        nodes += 1
        if nodes > max_nodes:
            raise _SearchTruncated
        if not _assignment_check(m, d1, d2, DELTA):
            return None
        if i == len(cands):
            return m
        side, p, options = cands[i]
        if covered_already(side, p, m):
            return search(i + 1, m)
        for q in options:
            res = search(i + 1, np.minimum(m, bridge(side, p, q)))
            if res is not None:
                return res
        return None

    try:
        witness = search(0, base)
    except _SearchTruncated:
        return FeasibilityResult(False, None, False, nodes, eps)
    if witness is None:
        return FeasibilityResult(False, None, not truncated_any, nodes, eps)
    return FeasibilityResult(True, witness, True, nodes, eps)


class _SearchTruncated(Exception):
    pass


# ------------------------------------------------------------ LP oracle route


def lp_system(d1, d2, eps, bridges):
    """A_ub, b_ub, lb, ub for the assignment-resolved feasibility system."""
    n1, n2 = d1.shape[0], d2.shape[0]
    nv = n1 * n2
    cap = eps - DELTA

    def var(i, j):
        return i * n2 + j

    rows, rhs = [], []

    def add(coefs, bound):
        row = np.zeros(nv)
        for v, c in coefs:
            row[v] += c
        rows.append(row)
        rhs.append(bound)

    for j in range(n2):
        for i1 in range(n1):
            for i2 in range(i1 + 1, n1):
                add([(var(i1, j), 1.0), (var(i2, j), -1.0)], d1[i1, i2])
                add([(var(i2, j), 1.0), (var(i1, j), -1.0)], d1[i1, i2])
                add([(var(i1, j), -1.0), (var(i2, j), -1.0)], -d1[i1, i2])
    for i in range(n1):
        for j1 in range(n2):
            for j2 in range(j1 + 1, n2):
                add([(var(i, j1), 1.0), (var(i, j2), -1.0)], d2[j1, j2])
                add([(var(i, j2), 1.0), (var(i, j1), -1.0)], d2[j1, j2])
                add([(var(i, j1), -1.0), (var(i, j2), -1.0)], -d2[j1, j2])
    for (xs, ys) in bridges:
        add([(var(xs, ys), 1.0)], cap)

    lb = np.full(nv, DELTA)
    ub = (d1[:, [0]] + cap + d2[[0], :]).reshape(-1)
    return np.array(rows), np.array(rhs), lb, ub


def feasible_lp(
    a: FinitePointedSpace,
    b: FinitePointedSpace,
    eps: float,
    k_nearest: int = 4,
    max_assignments: int = 20000,
) -> FeasibilityResult:
    """Same decision as feasible(), via per-assignment simplex feasibility."""
    if not (0.0 < eps < 0.5):
        raise MetricError(f"eps must lie in (0, 1/2), got {eps}")
    d1, d2 = a.dist, b.dist
    cap = eps - DELTA
    if cap <= 0:
        return FeasibilityResult(False, None, True, 0, eps)
    covered1, covered2 = _covering_sets(d1, d2, eps)
    rho1, rho2 = d1[0], d2[0]
    option_lists = []
    truncated_any = False
    for x in covered1:
        c, tr = _candidates(rho1[x], rho2, cap, k_nearest)
        truncated_any |= tr
        if not c:
            return FeasibilityResult(False, None, True, 0, eps)
        option_lists.append([(x, y) for y in c])
    for y in covered2:
        c, tr = _candidates(rho2[y], rho1, cap, k_nearest)
        truncated_any |= tr
        if not c:
            return FeasibilityResult(False, None, True, 0, eps)
        option_lists.append([(x, y) for x in c])
    count = 0
    for combo in itertools.product(*option_lists) if option_lists else [()]:
        count += 1
        if count > max_assignments:
            return FeasibilityResult(False, None, False, count, eps)
        bridges = [(0, 0)] + list(combo)
        A, rhs, lb, ub = lp_system(d1, d2, eps, bridges)
        ok, x = _lp.simplex_feasibility(A, rhs, lb, ub)
        if ok:
            return FeasibilityResult(True, x.reshape(d1.shape[0], d2.shape[0]), True, count, eps)
    return FeasibilityResult(False, None, not truncated_any, count, eps)


# ----------------------------------------------------------------- bisection


@dataclass(frozen=True)
class GromovDistanceResult:
    value: float
    lo: float
    hi: float
    witness: np.ndarray | None
    exact: bool

    def bracket(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def gromov_distance(
    a: FinitePointedSpace, b: FinitePointedSpace, tol: float = 1e-3, k_nearest: int = 4
) -> GromovDistanceResult:
    """Bisection on eps over (0, 1/2); returns the upper end of the bracket."""
    if tol < 1e-6:
        raise MetricError(f"tol must be >= 1e-6, got {tol}")
    hi = 0.5 - 1e-9
    res = feasible(a, b, hi, k_nearest=k_nearest)
    if not res.feasible:
        return GromovDistanceResult(0.5, hi, 0.5, None, res.exact)
    lo, witness, exact = 0.0, res.witness, res.exact
    hi_val = hi
    while hi_val - lo > tol:
        mid = 0.5 * (lo + hi_val)
        r = feasible(a, b, mid, k_nearest=k_nearest)
        exact = exact and r.exact
        if r.feasible:
            hi_val, witness = mid, r.witness
        else:
            lo = mid
    return GromovDistanceResult(hi_val, lo, hi_val, witness, exact)


def certify_upper(
    a: FinitePointedSpace, b: FinitePointedSpace, cross: AdmissibleExtension, eps: float
) -> bool:
    """True iff `cross` witnesses d_GS(a, b) <= eps (non-strict conditions)."""
    cross.validate(a.dist, b.dist)
    c = cross.cross
    if c[0, 0] > eps:
        return False
    ball = 1.0 / eps
    for x in range(a.n):
        if a.dist[0, x] <= ball and c[x].min() > eps:
            return False
    for y in range(b.n):
        if b.dist[0, y] <= ball and c[:, y].min() > eps:
            return False
    return True


def identity_cross(space: FinitePointedSpace, delta: float = 1e-12) -> AdmissibleExtension:
    """Lift of the identity map: c = d + delta (strictly positive diagonal)."""
    return AdmissibleExtension(space.dist + delta)


# -------------------------------------------------------------- chain gluing


@dataclass(frozen=True)
class ChainGlueResult:
    glued: np.ndarray
    layer_offsets: list
    limit_ball: FinitePointedSpace
    resolution: float


def chain_glue(
    spaces: list,
    crosses: list,
    ball_radius: float | None = None,
) -> ChainGlueResult:
    """Glue a Cauchy chain along admissible crosses; extract the limit ball.

    Each cross must certify d_GS(X_n, X_{n+1}) <= 2^-n.  The glued metric is
    the all-pairs shortest path on the layered graph (complete within layers,
    cross edges between consecutive layers); its restriction to each layer
    recovers that layer's metric.  Finite limit points are represented by the
    last layer (tail equivalence classes truncated at depth N), whose ball is
    within resolution 2^-(N-1) of the true limit ball.
    """
    if len(spaces) < 2 or len(crosses) != len(spaces) - 1:
        raise GluingError("need k spaces and k-1 crosses, k >= 2")
    for n, (x1, x2, cr) in enumerate(zip(spaces[:-1], spaces[1:], crosses)):
        eps_n = 2.0 ** (-n)
        try:
            cr.validate(x1.dist, x2.dist)
        except MetricError as e:
            raise GluingError(f"cross {n} inadmissible: {e}") from e
        if not certify_upper(x1, x2, cr, eps_n):
            raise GluingError(f"cross {n} does not certify d_GS <= 2^-{n}")

    sizes = [s.n for s in spaces]
    offsets = list(np.cumsum([0] + sizes[:-1]))
    total = sum(sizes)
    big = np.full((total, total), np.inf)
    for s, off in zip(spaces, offsets):
        big[off : off + s.n, off : off + s.n] = s.dist
    for cr, off1, off2, s1, s2 in zip(crosses, offsets[:-1], offsets[1:], spaces[:-1], spaces[1:]):
        big[off1 : off1 + s1.n, off2 : off2 + s2.n] = cr.cross
        big[off2 : off2 + s2.n, off1 : off1 + s1.n] = cr.cross.T
    for k in range(total):
        np.minimum(big, big[:, [k]] + big[[k], :], out=big)

    for s, off in zip(spaces, offsets):
        if np.abs(big[off : off + s.n, off : off + s.n] - s.dist).max() > 1e-9:
            raise GluingError("glued metric fails to restrict to a layer metric")

    last = spaces[-1]
    off = offsets[-1]
    n_layers = len(spaces)
    block = big[off : off + last.n, off : off + last.n]
    if ball_radius is None:
        limit = FinitePointedSpace(block.copy())
    else:
        keep = np.where(block[0] <= ball_radius)[0]
        limit = FinitePointedSpace(block[np.ix_(keep, keep)].copy())
    return ChainGlueResult(
        glued=big,
        layer_offsets=offsets,
        limit_ball=limit,
        resolution=2.0 ** (-(n_layers - 2)),
    )


# ----------------------------------------------------------------------- nets


def net_from_manifold(
    space: ModelManifold, radius: float, mesh: float, seed: int, pool_size: int | None = None
) -> FinitePointedSpace:
    """Greedy farthest-point net of the radius-ball: mesh-dense w.r.t. a dense
    candidate pool and mesh-separated, with the basepoint first and exact
    pairwise distances."""
    if isinstance(space, RotSymSurface):
        raise GeometryError("rotationally symmetric surfaces have no exact pairwise distances")
    if not isinstance(space, (Euclidean, Hyperbolic, HalfPlane)):
        raise GeometryError(f"nets unsupported on {space!r}")
    if radius <= 0 or mesh <= 0:
        raise GeometryError("need radius > 0 and mesh > 0")
    rng = np.random.default_rng(seed)
    if pool_size is None:
        est = space.ball_volume(radius + mesh) / max(space.ball_volume(mesh / 2.0), 1e-12)
        pool_size = int(min(20000, max(500, 40 * est)))

    rs = _sample_radii(space, radius, pool_size, rng)
    if isinstance(space, HalfPlane):
        phi = rng.uniform(0.0, 2.0 * math.pi, pool_size)
        pool = _halfplane_from_polar(rs, phi)
        pool = np.vstack([[0.0, 1.0], pool])
    else:
        dirs = rng.standard_normal((pool_size, space.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pool = dirs * rs[:, None]
        pool = np.vstack([np.zeros(space.dim), pool])

    chosen = [0]
    dmin = space.dist_to_many(pool, pool[0])
    while True:
        i = int(np.argmax(dmin))
        if dmin[i] <= mesh:
            break
        chosen.append(i)
        dmin = np.minimum(dmin, space.dist_to_many(pool, pool[i]))
    pts = pool[chosen]
    n = len(chosen)
    dist = np.zeros((n, n))
    for i in range(n):
        d_row = space.dist_to_many(pts, pts[i])
        dist[i] = d_row
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    return FinitePointedSpace(dist)


def _sample_radii(space: ModelManifold, radius: float, size: int, rng) -> np.ndarray:
    grid = np.linspace(0.0, radius, 512)
    dens = np.array([space.sphere_area(r) for r in grid])
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp(rng.uniform(0.0, 1.0, size), cdf, grid)


def _halfplane_from_polar(r: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Geodesic polar coordinates about i mapped into half-plane coordinates
    through the Poincare disk (w = tanh(r/2) e^{i phi}, z = i (1+w)/(1-w))."""
    w = np.tanh(r / 2.0) * np.exp(1j * phi)
    z = 1j * (1.0 + w) / (1.0 - w)
    return np.column_stack([z.real, np.maximum(z.imag, 1e-300)])
