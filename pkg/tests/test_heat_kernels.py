from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from rdl.heat_kernels import (
    KernelError,
    chapman_kolmogorov_residual,
    gaussian_bound_constant,
    kernel_for,
    log_q_hyperbolic,
    q_euclidean,
    q_hyperbolic,
    radial_fokker_planck,
    zero_two_defect,
)
from rdl.model_spaces import Euclidean, HalfPlane, Hyperbolic, RotSymSurface, builtin_profile


# ------------------------------------------------------------ closed forms


def test_q_euclidean_values():
    assert q_euclidean(1.0, 1, 0.0) == pytest.approx((2 * math.pi) ** -0.5, rel=1e-12)
    assert q_euclidean(2.0, 1, 0.0) == pytest.approx((4 * math.pi) ** -0.5, rel=1e-12)


def test_q_euclidean_normalization():
    val, _ = quad(lambda x: q_euclidean(1.0, 1, abs(x)), -40, 40)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_q_hyperbolic_h3_values():
    # closed form (2 pi t)^{-3/2} e^{-t/2 - d^2/2t} d / sinh d evaluated directly
    assert q_hyperbolic(1.0, 3, 1.0, 0.0) == pytest.approx(
        (2 * math.pi) ** -1.5 * math.exp(-0.5), rel=1e-10
    )
    d = 1.0
    direct = (2 * math.pi) ** -1.5 * math.exp(-0.5 - 0.5) * d / math.sinh(d)
    assert q_hyperbolic(1.0, 3, 1.0, d) == pytest.approx(direct, rel=1e-10)
    assert direct == pytest.approx(0.0198757, abs=5e-7)


def test_q_hyperbolic_rejects_bad_dims():
    with pytest.raises(KernelError):
        q_hyperbolic(1.0, 4, 1.0, 0.5)
    with pytest.raises(KernelError):
        q_hyperbolic(1.0, 1, 1.0, 0.5)
    with pytest.raises(KernelError):
        kernel_for(Euclidean(4))


def _radial_mass(space, t):
    ker = kernel_for(space)

    def f(r):
        la = space.log_sphere_area(r)
        return 0.0 if la == -math.inf else math.exp(float(ker.log_q(t, r)) + la)

    hi = 3 * t + 20 * math.sqrt(t) + 20
    hi = min(hi, 650.0 / max(getattr(space, "k", 1.0), 1.0))
    val, _ = quad(f, 0, hi, limit=300)
    return val


@pytest.mark.parametrize("t", [0.5, 1.0, 4.0])
@pytest.mark.parametrize("k", [1.0, 2.0])
def test_h2_stochastic_completeness(t, k):
    assert _radial_mass(Hyperbolic(2, k), t) == pytest.approx(1.0, abs=1e-8)


def test_h3_and_halfplane_normalization():
    assert _radial_mass(Hyperbolic(3, 1.0), 1.0) == pytest.approx(1.0, abs=1e-9)
    assert _radial_mass(Hyperbolic(3, 2.0), 0.5) == pytest.approx(1.0, abs=1e-9)
    assert _radial_mass(HalfPlane(), 1.0) == pytest.approx(1.0, abs=1e-9)


def test_kernel_positive_and_even_in_dist():
    ker = kernel_for(Hyperbolic(2, 1.0))
    for t in (0.3, 1.0, 5.0):
        vals = np.exp([float(ker.log_q(t, r)) for r in (0.0, 0.1, 1.0, 5.0)])
        assert (vals > 0).all()
        assert (np.diff(vals) < 0).all()  # radially decreasing


def test_halfplane_kernel_equals_h2():
    a = float(kernel_for(HalfPlane()).log_q(1.0, 0.7))
    b = float(log_q_hyperbolic(1.0, 2, 1.0, 0.7))
    assert a == pytest.approx(b, rel=1e-14)


def test_chapman_kolmogorov():
    for s, t in ((0.5, 0.5), (0.5, 1.0), (1.0, 0.5), (1.0, 1.0)):
        assert chapman_kolmogorov_residual(Hyperbolic(3, 1.0), s, t, 1.0) < 1e-4
        assert chapman_kolmogorov_residual(Hyperbolic(2, 1.0), s, t, 1.0) < 1e-4
        assert chapman_kolmogorov_residual(Euclidean(1), s, t, 0.7) < 1e-4


# --------------------------------------------------------- Gaussian bound


def test_gaussian_bound_euclidean_analytic_sup():
    # sup over t in [1,10], r of (2 pi t)^{-1/2} exp(-r^2(1/2t - 1/3t)) is at r=0, t=1
    res = gaussian_bound_constant(Euclidean(1), D=3.0, t_range=(1.0, 10.0), r_max=20.0)
    assert res.bounded
    assert res.constant == pytest.approx((2 * math.pi) ** -0.5, rel=1e-6)
    assert res.r_at == pytest.approx(0.0, abs=1e-9)
    assert res.t_at == pytest.approx(1.0, abs=1e-9)


def test_gaussian_bound_h2_finite_anchor():
    res = gaussian_bound_constant(Hyperbolic(2, 1.0), D=3.0, t_range=(1.0, 10.0), r_max=30.0)
    assert res.bounded and math.isfinite(res.constant)
    # regression anchor: the sup sits at t=1, r=0
    assert res.constant == pytest.approx(math.exp(float(log_q_hyperbolic(1.0, 2, 1.0, 0.0))), rel=1e-9)


def test_gaussian_bound_monotone_in_D():
    c_small = gaussian_bound_constant(Hyperbolic(2, 1.0), 2.01, (1.0, 5.0), 20.0).constant
    c_big = gaussian_bound_constant(Hyperbolic(2, 1.0), 4.0, (1.0, 5.0), 20.0).constant
    assert c_small >= c_big


def test_gaussian_bound_domain_checks():
    with pytest.raises(KernelError):
        gaussian_bound_constant(Euclidean(1), 2.0, (1.0, 2.0), 5.0)
    with pytest.raises(KernelError):
        gaussian_bound_constant(Euclidean(1), 3.0, (0.5, 2.0), 5.0)


# -------------------------------------------------------- zero-two defect


def _euclid_tv_oracle(t: float, tau: float) -> float:
    """Brute-force int |q(t+tau) - q(t)| for the 1-D Gaussian."""

    def f(x):
        a = math.exp(-x * x / (2 * (t + tau))) / math.sqrt(2 * math.pi * (t + tau))
        b = math.exp(-x * x / (2 * t)) / math.sqrt(2 * math.pi * t)
        return abs(a - b)

    val, _ = quad(f, -80, 80, limit=400)
    return val


def test_zero_two_defect_euclidean_matches_tv_oracle():
    for t in (0.5, 1.0, 4.0):
        got = zero_two_defect(Euclidean(1), tau=t, t=t)
        assert got == pytest.approx(_euclid_tv_oracle(t, t), abs=1e-6)


def test_zero_two_defect_euclidean_scale_invariant():
    vals = [zero_two_defect(Euclidean(1), tau=t, t=t) for t in (0.5, 1.0, 4.0)]
    assert max(vals) - min(vals) < 1e-6


def test_zero_two_defect_h2_strictly_below_two():
    val = zero_two_defect(Hyperbolic(2, 1.0), tau=1.0, t=1.0)
    assert val < 1.0  # recorded anchor ~ 0.60
    assert val == pytest.approx(0.6012, abs=2e-3)


def test_zero_two_defect_non_increasing_in_t():
    vals = [zero_two_defect(Hyperbolic(2, 1.0), tau=1.0, t=t) for t in (1.0, 2.0, 4.0)]
    assert vals[0] > vals[1] > vals[2]


# ----------------------------------------------------------- Fokker-Planck


def test_fp_euclid_profile_matches_2d_gaussian_radial_law():
    grid = radial_fokker_planck(builtin_profile("euclid"), r0=0.01, dt=4e-5, dr=0.01,
                                t_max=1.0, r_max=6.0)
    rho = grid.marginal(1.0)
    exact = grid.r_centers * np.exp(-grid.r_centers ** 2 / 2.0)
    dr = grid.r_centers[1] - grid.r_centers[0]
    assert np.sum(np.abs(rho - exact)) * dr <= 2e-2
    assert grid.mass.min() >= 0.999
    assert grid.mass.max() <= 1.0 + 1e-9


def test_fp_hyperbolic_profile_matches_scaled_kernel():
    # radial marginal of q on H^2 with curvature -k^2 vs the PDE oracle
    k = 2.0
    grid = radial_fokker_planck(builtin_profile("hyperbolic", k), r0=0.01, dt=4e-5, dr=0.01,
                                t_max=1.0, r_max=8.0)
    rho = grid.marginal(1.0)
    marg = np.array(
        [
            math.exp(float(log_q_hyperbolic(1.0, 2, k, r))) * 2 * math.pi * math.sinh(k * r) / k
            for r in grid.r_centers
        ]
    )
    dr = grid.r_centers[1] - grid.r_centers[0]
    assert np.sum(np.abs(rho - marg)) * dr <= 2e-2


def test_fp_k1_matches_unit_kernel():
    grid = radial_fokker_planck(builtin_profile("hyperbolic", 1.0), r0=0.01, dt=4e-5, dr=0.01,
                                t_max=1.0, r_max=8.0)
    rho = grid.marginal(1.0)
    marg = np.array(
        [
            math.exp(float(log_q_hyperbolic(1.0, 2, 1.0, r))) * 2 * math.pi * math.sinh(r)
            for r in grid.r_centers
        ]
    )
    dr = grid.r_centers[1] - grid.r_centers[0]
    assert np.sum(np.abs(rho - marg)) * dr <= 2e-2


def test_fp_rejects_cfl_violation():
    with pytest.raises(KernelError):
        radial_fokker_planck(builtin_profile("euclid"), r0=0.5, dt=1e-3, dr=0.01,
                             t_max=0.1, r_max=2.0)


def test_fp_rejects_coarse_grid_at_interior_start():
    with pytest.raises(KernelError):
        radial_fokker_planck(builtin_profile("euclid"), r0=1.0, dt=4e-5, dr=0.5,
                             t_max=0.1, r_max=4.0)


def test_fp_csv_export(tmp_path):
    grid = radial_fokker_planck(builtin_profile("euclid"), r0=0.05, dt=4e-4, dr=0.05,
                                t_max=0.2, r_max=3.0, n_snapshots=3)
    out = tmp_path / "grid.csv"
    grid.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,r,rho"
    assert len(lines) == 1 + len(grid.times) * len(grid.r_centers)


def test_rotsym_has_no_closed_form_kernel():
    with pytest.raises(KernelError):
        kernel_for(RotSymSurface(builtin_profile("kaimanovich")))
