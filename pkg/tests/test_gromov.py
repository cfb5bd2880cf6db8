from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdl.gromov import (
    DELTA,
    AdmissibleExtension,
    FinitePointedSpace,
    GluingError,
    MetricError,
    certify_upper,
    chain_glue,
    feasible,
    feasible_lp,
    gromov_distance,
    identity_cross,
    net_from_manifold,
)
from rdl.model_spaces import Euclidean, GeometryError, HalfPlane, Hyperbolic, RotSymSurface, builtin_profile


def _space_from_points(pts) -> FinitePointedSpace:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    return FinitePointedSpace(d)


def _random_instance(rng, n1, n2, scale=1.0):
    a = _space_from_points(np.concatenate([[[0.0]], rng.uniform(-scale, scale, (n1 - 1, 1))])
                           if n1 > 1 else [[0.0]])
    b = _space_from_points(np.concatenate([[[0.0]], rng.uniform(-scale, scale, (n2 - 1, 1))])
                           if n2 > 1 else [[0.0]])
    return a, b


# -------------------------------------------------------------- validators


def test_space_validation_errors():
    with pytest.raises(MetricError):
        FinitePointedSpace(np.array([[0.0, 1.0], [1.0, 0.1]]))  # nonzero diagonal
    with pytest.raises(MetricError):
        FinitePointedSpace(np.array([[0.0, 1.0], [2.0, 0.0]]))  # asymmetric
    with pytest.raises(MetricError):
        FinitePointedSpace(np.array([[0.0, 5.0, 1.0], [5.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
    with pytest.raises(MetricError):
        FinitePointedSpace(np.zeros((2, 2)))  # zero off-diagonal


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 7))
def test_space_from_random_points_validates(seed, n):
    rng = np.random.default_rng(seed)
    sp = _space_from_points(rng.uniform(-3, 3, (n, 2)))
    assert sp.n == n
    sp.validate()


def test_admissible_extension_validator():
    a = _space_from_points([[0.0], [1.0]])
    b = _space_from_points([[0.0]])
    good = AdmissibleExtension(np.array([[0.3], [0.8]]))
    good.validate(a.dist, b.dist)
    with pytest.raises(MetricError):
        AdmissibleExtension(np.array([[0.3], [2.0]])).validate(a.dist, b.dist)  # Lipschitz
    with pytest.raises(MetricError):
        AdmissibleExtension(np.array([[0.2], [0.2]])).validate(a.dist, b.dist)  # lower sum
    with pytest.raises(MetricError):
        AdmissibleExtension(np.array([[0.0], [1.0]])).validate(a.dist, b.dist)  # positivity


# ------------------------------------------------------------- feasibility


def test_identical_spaces_feasible_at_tiny_eps():
    rng = np.random.default_rng(0)
    sp = _space_from_points(rng.uniform(-0.4, 0.4, (4, 1)))
    res = feasible(sp, sp, 1e-6)
    assert res.feasible and res.exact
    AdmissibleExtension(res.witness).validate(sp.dist, sp.dist)


def test_point_vs_unit_pair_is_half():
    point = _space_from_points([[0.0]])
    pair = _space_from_points([[0.0], [1.0]])
    # both pair points are covered and need a partner within eps - delta, but
    # c(x, y1) + c(x, y2) >= 1 forces 2 eps >= 1
    assert not feasible(point, pair, 0.49).feasible
    assert not feasible(pair, point, 0.49).feasible
    res = gromov_distance(point, pair, tol=1e-3)
    assert res.value == 0.5


def test_two_point_spaces_nearby_lengths():
    a = _space_from_points([[0.0], [1.0]])
    b = _space_from_points([[0.0], [1.2]])
    res = feasible(a, b, 0.11)
    assert res.feasible
    w = res.witness
    AdmissibleExtension(w).validate(a.dist, b.dist)
    assert w[0, 0] <= 0.11 and w[1, 1] <= 0.11  # points matched in order
    assert not feasible(a, b, 0.05).feasible  # |1 - 1.2|/2 = 0.1 is the scale


def test_witness_always_validates():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n1, n2 = rng.integers(1, 4), rng.integers(1, 4)
        a, b = _random_instance(rng, int(n1), int(n2))
        eps = float(rng.uniform(0.05, 0.45))
        res = feasible(a, b, eps)
        if res.feasible:
            AdmissibleExtension(res.witness).validate(a.dist, b.dist)
            assert certify_upper(a, b, AdmissibleExtension(res.witness), eps)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_feasible_properties_random(seed):
    rng = np.random.default_rng(seed)
    n1, n2 = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    a, b = _random_instance(rng, n1, n2, scale=float(rng.uniform(0.2, 1.5)))
    eps = float(rng.uniform(0.02, 0.48))
    res = feasible(a, b, eps)
    sym = feasible(b, a, eps)
    assert res.feasible == sym.feasible  # the conditions are symmetric
    if res.feasible:
        AdmissibleExtension(res.witness).validate(a.dist, b.dist)
        assert certify_upper(a, b, AdmissibleExtension(res.witness), eps)
        # still feasible at any larger eps
        assert feasible(a, b, min(eps + 0.01, 0.499)).feasible


def test_feasible_monotone_in_eps():
    rng = np.random.default_rng(8)
    a, b = _random_instance(rng, 3, 2)
    decisions = [feasible(a, b, e).feasible for e in (0.05, 0.15, 0.3, 0.45)]
    # once feasible, stays feasible
    first = decisions.index(True) if True in decisions else len(decisions)
    assert all(decisions[first:])


def test_feasible_agrees_with_lp_oracle_on_100_instances():
    rng = np.random.default_rng(123)
    sizes = [(1, 2), (2, 2), (2, 3), (3, 2), (1, 4), (1, 5), (1, 6), (2, 2)]
    checked = 0
    while checked < 100:
        n1, n2 = sizes[checked % len(sizes)]
        a, b = _random_instance(rng, n1, n2)
        eps = float(rng.uniform(0.05, 0.45))
        r1 = feasible(a, b, eps)
        r2 = feasible_lp(a, b, eps)
        assert r1.feasible == r2.feasible, (a.dist, b.dist, eps)
        if r2.feasible:
            AdmissibleExtension(r2.witness).validate(a.dist, b.dist, tol=1e-6)
        checked += 1


def _grid_feasible(a, b, eps, step):
    """Literal brute-force grid search over cross matrices."""
    d1, d2 = a.dist, b.dist
    n1, n2 = a.n, b.n
    cap = eps - DELTA
    ball = 1.0 / eps
    cov1 = [x for x in range(n1) if d1[0, x] <= ball]
    cov2 = [y for y in range(n2) if d2[0, y] <= ball]
    ubs = (d1[:, [0]] + cap + d2[[0], :]).reshape(-1)
    axes = [np.arange(DELTA, ub + step, step) for ub in ubs]

    rest = axes[1:]
    if rest:
        mesh = np.meshgrid(*rest, indexing="ij")
        tail = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        tail = np.zeros((1, 0))
    for v0 in axes[0]:
        combos = np.hstack([np.full((tail.shape[0], 1), v0), tail])
        C = combos.reshape(-1, n1, n2)
        ok = np.ones(C.shape[0], dtype=bool)
        for i1, i2 in itertools.combinations(range(n1), 2):
            ok &= np.abs(C[:, i1, :] - C[:, i2, :]).max(axis=1) <= d1[i1, i2] + 1e-12
            ok &= (C[:, i1, :] + C[:, i2, :]).min(axis=1) >= d1[i1, i2] - 1e-12
        for j1, j2 in itertools.combinations(range(n2), 2):
            ok &= np.abs(C[:, :, j1] - C[:, :, j2]).max(axis=1) <= d2[j1, j2] + 1e-12
            ok &= (C[:, :, j1] + C[:, :, j2]).min(axis=1) >= d2[j1, j2] - 1e-12
        ok &= C[:, 0, 0] <= cap
        for x in cov1:
            ok &= C[:, x, :].min(axis=1) <= cap
        for y in cov2:
            ok &= C[:, :, y].min(axis=1) <= cap
        if ok.any():
            return True
    return False


def test_feasible_agrees_with_literal_grid_search():
    rng = np.random.default_rng(7)
    cases = [(1, 2), (1, 3), (2, 2), (1, 4), (2, 2)]
    for idx, (n1, n2) in enumerate(cases):
        a, b = _random_instance(rng, n1, n2, scale=0.4)
        d_star = gromov_distance(a, b, tol=5e-3).value
        step = 1e-2 if n1 * n2 <= 3 else 2e-2
        for eps in (d_star - 0.07, d_star + 0.07):
            if not (0.02 < eps < 0.48):
                continue
            got = feasible(a, b, eps).feasible
            want = _grid_feasible(a, b, eps, step)
            assert got == want, (idx, eps, a.dist, b.dist)


# ----------------------------------------------------------- metric axioms


def _random_net(rng):
    kind = rng.integers(0, 2)
    n = int(rng.integers(3, 7))
    if kind == 0:
        pts = np.concatenate([np.zeros((1, 2)), rng.uniform(-0.8, 0.8, (n - 1, 2))])
        return _space_from_points(pts)
    sp = Hyperbolic(2, 1.0)
    pts = np.concatenate([np.zeros((1, 2)), rng.normal(0, 0.5, (n - 1, 2))])
    return FinitePointedSpace(sp.pairwise_distances(pts))


def test_gromov_distance_metric_axioms_on_random_nets():
    tol = 5e-3
    rng = np.random.default_rng(31)
    spaces = [_random_net(rng) for _ in range(3)]
    # identity of isometrics
    for sp in spaces:
        assert gromov_distance(sp, sp, tol=tol).value <= tol
    # symmetry within 2 tol
    for x, y in itertools.combinations(spaces, 2):
        dxy = gromov_distance(x, y, tol=tol).value
        dyx = gromov_distance(y, x, tol=tol).value
        assert abs(dxy - dyx) <= 2 * tol
    # triangle within 3 tol
    x, y, z = spaces
    dxy = gromov_distance(x, y, tol=tol).value
    dyz = gromov_distance(y, z, tol=tol).value
    dxz = gromov_distance(x, z, tol=tol).value
    assert dxz <= dxy + dyz + 3 * tol


def test_gromov_distance_reports_bracket():
    rng = np.random.default_rng(4)
    a, b = _random_instance(rng, 2, 3)
    res = gromov_distance(a, b, tol=1e-3)
    assert res.hi - res.lo <= 1e-3 or res.value == 0.5
    assert res.value == res.hi or res.value == 0.5
    with pytest.raises(MetricError):
        gromov_distance(a, b, tol=1e-8)


# ------------------------------------------------------------ chain gluing


def test_chain_glue_constant_sequence():
    rng = np.random.default_rng(2)
    sp = _space_from_points(np.concatenate([np.zeros((1, 2)), rng.uniform(-0.6, 0.6, (3, 2))]))
    n_layers = 4
    crosses = [identity_cross(sp) for _ in range(n_layers - 1)]
    res = chain_glue([sp] * n_layers, crosses)
    assert res.limit_ball.n == sp.n
    # limit ball isometric to the input within 2^{-N+2}
    d = gromov_distance(res.limit_ball, sp, tol=1e-3)
    assert d.value <= 2.0 ** (-(n_layers - 1) + 2)
    assert d.value <= 2e-3  # in fact identical up to the diagonal jitter


def test_chain_glue_rejects_bad_certificate():
    sp = _space_from_points([[0.0], [1.0]])
    far = _space_from_points([[0.0], [3.0]])
    # ambient cross on the line: admissible, but the point at 3 sits inside
    # the 1/eps = 2 ball and has no partner within eps = 1/2
    amb = AdmissibleExtension(np.abs(np.array([[0.0], [1.0]]) - np.array([[0.0, 3.0]])) + 1e-9)
    with pytest.raises(GluingError, match="certify"):
        chain_glue([sp, sp, far], [identity_cross(sp), amb])
    # inadmissible cross is rejected up front
    bad = AdmissibleExtension(np.array([[1e-9, 5.0], [1.0, 2.0]]))
    with pytest.raises(GluingError, match="inadmissible"):
        chain_glue([sp, sp, far], [identity_cross(sp), bad])


def test_chain_glue_restriction_and_layer_count():
    sp = _space_from_points([[0.0], [0.5], [1.0]])
    res = chain_glue([sp, sp, sp], [identity_cross(sp)] * 2)
    n = sp.n
    for off in res.layer_offsets:
        assert np.abs(res.glued[off:off + n, off:off + n] - sp.dist).max() <= 1e-9


def _net_with_coords(space, radius, mesh, seed):
    """Test-side farthest-point net that keeps the chart coordinates."""
    rng = np.random.default_rng(seed)
    pool_n = 4000
    rs = np.sqrt(rng.uniform(0, 1, pool_n)) * radius  # dense enough for tests
    if isinstance(space, Hyperbolic):
        dirs = rng.standard_normal((pool_n, space.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pool = np.vstack([np.zeros(space.dim), dirs * rs[:, None]])
    else:
        raise NotImplementedError
    chosen = [0]
    dmin = space.dist_to_many(pool, pool[0])
    while True:
        i = int(np.argmax(dmin))
        if dmin[i] <= mesh:
            break
        chosen.append(i)
        dmin = np.minimum(dmin, space.dist_to_many(pool, pool[i]))
    pts = pool[chosen]
    return pts, FinitePointedSpace(space.pairwise_distances(pts))


def test_chain_glue_h2_nets_approach_fine_net():
    h2 = Hyperbolic(2, 1.0)
    radius, seed = 1.4, 11
    layers, coords = [], []
    for n in range(3):
        pts, sp = _net_with_coords(h2, radius, 0.9 * 2.0 ** (-n), seed + n)
        coords.append(pts)
        layers.append(sp)
    crosses = []
    for n in range(2):
        cross = np.zeros((layers[n].n, layers[n + 1].n))
        for i, p in enumerate(coords[n]):
            cross[i] = h2.dist_to_many(coords[n + 1], p)
        crosses.append(AdmissibleExtension(cross + 1e-9))
    res = chain_glue(layers, crosses)
    # the limit ball (last layer) is close to an independently drawn fine net
    pts_fine, fine = _net_with_coords(h2, 1.0, 0.15, seed=99)
    limit_pts = coords[-1][layers[-1].radii() <= 1.0]
    assert res.limit_ball.n == layers[-1].n
    ball = FinitePointedSpace(h2.pairwise_distances(limit_pts))
    cross = np.zeros((ball.n, fine.n))
    for i, p in enumerate(limit_pts):
        cross[i] = h2.dist_to_many(pts_fine, p)
    eps_cert = 0.45
    assert certify_upper(ball, fine, AdmissibleExtension(cross + 1e-9), eps_cert)
    # packing lower bound: at least as many points as a 0.45-separated subset
    sep, dmin = [0], h2.dist_to_many(limit_pts, limit_pts[0])
    while dmin.max() > 0.45:
        i = int(np.argmax(dmin))
        sep.append(i)
        dmin = np.minimum(dmin, h2.dist_to_many(limit_pts, limit_pts[i]))
    assert ball.n >= len(sep)


# ------------------------------------------------------------------- nets


def test_net_euclidean_line():
    net = net_from_manifold(Euclidean(1), radius=1.0, mesh=0.5, seed=3)
    assert net.n <= 5
    assert net.radii().max() <= 1.0 + 1e-12


def test_net_h2_cardinality_within_packing_bounds():
    h2 = Hyperbolic(2, 1.0)
    net = net_from_manifold(h2, radius=2.0, mesh=0.25, seed=9)
    lower = h2.ball_volume(2.0) / h2.ball_volume(2 * 0.25)   # mesh-balls cover B_2
    upper = h2.ball_volume(2.0 + 0.125) / h2.ball_volume(0.125)  # separated packing
    assert lower <= net.n <= upper


def test_net_dense_and_separated():
    net = net_from_manifold(Hyperbolic(2, 1.0), radius=1.5, mesh=0.4, seed=1)
    d = net.dist
    off = d[~np.eye(net.n, dtype=bool)]
    assert off.min() > 0.4  # separation (> mesh by construction)


def test_net_rejects_rotsym():
    with pytest.raises(GeometryError):
        net_from_manifold(RotSymSurface(builtin_profile("kaimanovich")), 1.0, 0.5, 0)


def test_net_curvature_trend():
    # d_GS between H^2 nets at nearby curvatures: small, positive, increasing in |k - 1|
    nets = {
        k: net_from_manifold(Hyperbolic(2, k), radius=1.2, mesh=0.5, seed=5)
        for k in (1.0, 1.05, 1.3)
    }
    d_small = gromov_distance(nets[1.0], nets[1.05], tol=2e-3).value
    d_big = gromov_distance(nets[1.0], nets[1.3], tol=2e-3).value
    assert d_small <= d_big
    assert d_big > 2e-3


def test_halfplane_net_roundtrip_distances():
    # the disk -> half-plane map used for sampling preserves radial distance
    from rdl.gromov import _halfplane_from_polar

    hp = HalfPlane()
    pts = _halfplane_from_polar(np.array([0.5, 1.0, 2.0]), np.array([0.3, 2.0, 4.0]))
    for r, p in zip((0.5, 1.0, 2.0), pts):
        assert hp.distance((0.0, 1.0), p) == pytest.approx(r, abs=1e-9)
    net = net_from_manifold(hp, radius=1.0, mesh=0.5, seed=2)
    net.validate()


# ------------------------------------------------------------- json round


def test_space_json_round_trip():
    sp = _space_from_points([[0.0], [0.4], [1.1]])
    clone = FinitePointedSpace.from_json_dict(sp.to_json_dict())
    assert np.array_equal(clone.dist, sp.dist)
    with pytest.raises(MetricError):
        FinitePointedSpace.from_json_dict({"n": 5, "basepoint": 0, "dist": sp.dist.tolist()})
