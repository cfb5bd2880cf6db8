"""Quadrature estimators for drift, entropy, mutual information, volume
growth, and the inequality chains between them.

Estimator conventions (all for the transition density q(t) = p(t/2)):

  ell_t(M)    = int d(o,x) q(t,o,x) dx          (mean displacement)
  h_t(M)      = -int q log q dx                 (differential entropy)
  I_t^T(M)    = h_T - h_{T-t}                   (homogeneous spaces)
  v(M)        = slope of log vol(B_r) at large r

Two drift estimates are reported: the subadditive ratio ell_t/t (an upper
bound, non-increasing in t) and the unit-time increment ell_t - ell_{t-1}
(converges exponentially fast on the hyperbolic family; this is the
quadrature form of the Busemann-increment drift formula).  The inequality
chain uses the pairing whose finite-t biases cannot produce spurious
violations: the upper chain h <= ell*v takes the ratio, everything else
takes increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad

from .heat_kernels import _drift_scale, _truncation_radius, kernel_for
from .model_spaces import (
    Euclidean,
    HalfPlane,
    Hyperbolic,
    ModelManifold,
    space_from_json,
)

__all__ = [
    "EstimatorError",
    "NonConvergedError",
    "truncation_radius",
    "drift_quadrature",
    "drift_increment",
    "SubadditiveDriftFit",
    "drift_subadditive_limit",
    "entropy_quadrature",
    "EntropyRateFit",
    "entropy_rate",
    "mutual_information",
    "finite_dim_bound_check",
    "Ensemble",
    "DriftComponent",
    "ensemble_drift",
    "InequalityStatus",
    "AsymptoticReport",
    "inequality_report",
    "default_t_grid",
]

_MASS_TOL = 0.999
_SLACK_TOL = 1e-3  # normalized slack tolerance for the inequality chain


class EstimatorError(RuntimeError):
    """Hard estimator failure (e.g. non-normalized kernel)."""


class NonConvergedError(RuntimeError):
    """An estimate did not stabilize on the requested grid."""


def truncation_radius(space: ModelManifold, t: float) -> float:
    """Shared truncation radius from the Gaussian bound (D=3, 1e-10 tail)."""
    return _truncation_radius(space, t)


def _radial_integral(space: ModelManifold, t: float, weight, r_hi: float | None = None) -> float:
    """int_0^R w(r, log_q(r)) exp(log_q + log_area) dr, split at the ridge."""
    ker = kernel_for(space)
    v = _drift_scale(space)
    ridge = max(v * t, math.sqrt(t))

    def integrand(r):
        la = space.log_sphere_area(r)
        if la == -math.inf:
            return 0.0
        lq = float(ker.log_q(t, r))
        val = lq + la
        if val < -745.0:
            return 0.0
        return weight(r, lq) * math.exp(val)

    hi = r_hi if r_hi is not None else _truncation_radius(space, t)
    pieces = [0.0, min(ridge, hi), hi]
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        if b > a:
            val, _ = quad(integrand, a, b, limit=300)
            total += val
    return total


def _check_mass(space: ModelManifold, t: float) -> float:
    mass = _radial_integral(space, t, lambda r, lq: 1.0)
    if not (mass >= _MASS_TOL):
        raise EstimatorError(
            f"kernel mass {mass:.6f} < {_MASS_TOL} on {space.label()} at t={t}; "
            "kernel or truncation bug"
        )
    return mass


def drift_quadrature(space: ModelManifold, t: float) -> float:
    """ell_t / t by radial quadrature."""
    _check_mass(space, t)
    return _radial_integral(space, t, lambda r, lq: r) / t


def drift_increment(space: ModelManifold, t: float, delta: float = 1.0) -> float:
    """(ell_t - ell_{t-delta}) / delta; fast route to the linear drift."""
    if t <= delta:
        raise EstimatorError(f"need t > delta, got t={t}, delta={delta}")
    a = _radial_integral(space, t, lambda r, lq: r)
    b = _radial_integral(space, t - delta, lambda r, lq: r)
    return (a - b) / delta


@dataclass(frozen=True)
class SubadditiveDriftFit:
    value: float            # ell_{t_max} / t_max  (Fekete upper bound)
    increment: float        # (ell_{t_max} - ell_{t_max - delta}) / delta
    t_max: float
    ell_by_t: dict
    subadditivity_violations: list
    ratio_monotone: bool


def drift_subadditive_limit(
    space: ModelManifold, t_grid, tol: float = 1e-6
) -> SubadditiveDriftFit:
    """Estimate ell from a grid of horizons and audit L_{t+s} <= L_t + L_s.

    A subadditivity violation beyond quadrature tolerance indicates a kernel
    bug and is reported, not swallowed.
    """
    ts = sorted(float(t) for t in t_grid)
    if len(ts) < 4:
        raise EstimatorError("t_grid needs >= 4 points")
    ell = {t: _radial_integral(space, t, lambda r, lq: r) for t in ts}
    _check_mass(space, ts[-1])
    violations = []
    for t in ts:
        for s in ts:
            tot = t + s
            if tot in ell and ell[tot] > ell[t] + ell[s] + tol:
                violations.append((t, s, ell[tot] - ell[t] - ell[s]))
    ratios = [ell[t] / t for t in ts]
    monotone = all(ratios[i + 1] <= ratios[i] + tol for i in range(len(ratios) - 1))
    t_max = ts[-1]
    delta = t_max - ts[-2]
    inc = (ell[t_max] - ell[ts[-2]]) / delta
    return SubadditiveDriftFit(
        value=ell[t_max] / t_max,
        increment=inc,
        t_max=t_max,
        ell_by_t=ell,
        subadditivity_violations=violations,
        ratio_monotone=monotone,
    )


def entropy_quadrature(space: ModelManifold, t: float) -> float:
    """h_t = -int q log q dx by radial quadrature."""
    _check_mass(space, t)
    return _radial_integral(space, t, lambda r, lq: -lq)


@dataclass(frozen=True)
class EntropyRateFit:
    ratio: float        # h_{t_max} / t_max  (slow: O(log t / t) error)
    increment: float    # (h_{t_max} - h_{t_max-delta}) / delta
    previous_increment: float
    t_max: float
    converged: bool     # Cauchy test on the last two increments


def entropy_rate(
    space: ModelManifold, t_grid, rel_tol: float = 0.10, abs_tol: float = 1e-3
) -> EntropyRateFit:
    """Entropy rate h via increments; the ratio is reported alongside.

    Convergence is certified by a Cauchy test on the last two increments
    (the ratio converges only at O(log t / t) and is not used as a flag);
    abs_tol covers rates that converge to zero, where a relative test is
    meaningless.
    """
    ts = sorted(float(t) for t in t_grid)
    if len(ts) < 3:
        raise EstimatorError("t_grid needs >= 3 points")
    h = {t: entropy_quadrature(space, t) for t in ts[-3:]}
    t2, t1, t0 = ts[-1], ts[-2], ts[-3]
    inc = (h[t2] - h[t1]) / (t2 - t1)
    prev = (h[t1] - h[t0]) / (t1 - t0)
    scale = max(abs(inc), abs(prev))
    converged = abs(inc - prev) <= rel_tol * scale + abs_tol
    return EntropyRateFit(
        ratio=h[t2] / t2, increment=inc, previous_increment=prev, t_max=t2, converged=converged
    )


def mutual_information(space: ModelManifold, t: float, T: float) -> float:
    """I_t^T = h_T - h_{T-t} on homogeneous spaces; nonnegative by theory."""
    if not space.homogeneous:
        raise EstimatorError("mutual information via entropy differences needs a homogeneous space")
    if not (0 < t < T):
        raise EstimatorError(f"need 0 < t < T, got t={t}, T={T}")
    val = entropy_quadrature(space, T) - entropy_quadrature(space, T - t)
    if val < -1e-8:
        raise EstimatorError(f"I_t^T = {val} < 0 beyond tolerance: kernel inconsistency")
    return val


def finite_dim_bound_check(i_value: float, dim: int, tol: float = 0.01) -> bool:
    """Report-level sanity check I <= log(dim) + tol."""
    if dim < 1:
        raise EstimatorError(f"dim must be >= 1, got {dim}")
    return i_value <= math.log(dim) + tol


# ------------------------------------------------------------------ ensembles


@dataclass(frozen=True)
class DriftComponent:
    """Abstract ensemble component given by its drift alone (mixture examples)."""

    drift: float
    label: str = ""


@dataclass(frozen=True)
class Ensemble:
    components: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.components) != len(self.weights) or not self.components:
            raise EstimatorError("ensemble needs matching nonempty components and weights")
        if any(w <= 0 for w in self.weights):
            raise EstimatorError("ensemble weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise EstimatorError(f"ensemble weights must sum to 1, got {sum(self.weights)}")

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Ensemble":
        comps, weights = [], []
        for entry in obj["components"]:
            weights.append(float(entry["weight"]))
            if "space" in entry:
                comps.append(space_from_json(entry["space"]))
            elif "drift" in entry:
                comps.append(DriftComponent(float(entry["drift"]), entry.get("label", "")))
            else:
                raise EstimatorError("ensemble component needs 'space' or 'drift'")
        return cls(components=tuple(comps), weights=tuple(weights))


def ensemble_drift(ensemble: Ensemble, component_drifts=None) -> tuple[float, float]:
    """(ell, ell_plus) of a mixture: ell = sum w_i ell_i, ell_plus = max ell_i.

    Each component is itself ergodic, so the escape-rate radius ell_plus is
    set by the fastest component in the support.
    """
    if component_drifts is None:
        component_drifts = []
        for comp in ensemble.components:
            if isinstance(comp, DriftComponent):
                component_drifts.append(comp.drift)
            else:
                component_drifts.append(drift_increment(comp, default_t_grid(comp)[-1]))
    drifts = [float(d) for d in component_drifts]
    if len(drifts) != len(ensemble.components):
        raise EstimatorError("need one drift per component")
    ell = sum(w * d for w, d in zip(ensemble.weights, drifts))
    ell_plus = max(drifts)
    return ell, ell_plus


# ------------------------------------------------------------------- reports


@dataclass(frozen=True)
class InequalityStatus:
    name: str
    lhs: float
    rhs: float
    slack: float
    normalized_slack: float
    passed: bool

    @staticmethod
    def check(name: str, lhs: float, rhs: float, tol: float = _SLACK_TOL) -> "InequalityStatus":
        slack = rhs - lhs
        if math.isinf(rhs) and not math.isinf(lhs):
            norm = math.inf
        else:
            norm = slack / max(1.0, abs(lhs), abs(rhs))
        return InequalityStatus(
            name=name, lhs=lhs, rhs=rhs, slack=slack, normalized_slack=norm, passed=norm >= -tol
        )


@dataclass(frozen=True)
class AsymptoticReport:
    space: dict
    ell: float
    ell_upper: float
    ell_ci: tuple
    ell_plus: float
    entropy_h: float
    entropy_ratio: float
    entropy_ci: tuple
    volume_v: float
    volume_finite: bool
    k_functional: float | None
    inequality_status: list
    t_grid: list
    methods: dict
    converged: bool
    flags: list

    def to_json_dict(self) -> dict:
        def _num(x):
            if x is None:
                return None
            if isinstance(x, float) and math.isinf(x):
                return "inf"
            return x

        return {
            "schema": "v1",
            "space": self.space,
            "ell": self.ell,
            "ell_upper": self.ell_upper,
            "ell_ci": list(self.ell_ci),
            "ell_plus": self.ell_plus,
            "entropy_h": self.entropy_h,
            "entropy_ratio": self.entropy_ratio,
            "entropy_ci": list(self.entropy_ci),
            "volume_v": _num(self.volume_v),
            "volume_finite": self.volume_finite,
            "k_functional": _num(self.k_functional),
            "inequalities": [
                {
                    "name": s.name,
                    "lhs": s.lhs,
                    "rhs": _num(s.rhs),
                    "slack": _num(s.slack),
                    "normalized_slack": _num(s.normalized_slack),
                    "pass": s.passed,
                }
                for s in self.inequality_status
            ],
            "t_grid": list(self.t_grid),
            "methods": self.methods,
            "converged": self.converged,
            "flags": list(self.flags),
        }

    def all_pass(self) -> bool:
        return all(s.passed for s in self.inequality_status)

    def render_table(self) -> str:
        rows = [
            ("quantity", "value", "method"),
            ("ell", f"{self.ell:.6f}", self.methods.get("ell", "")),
            ("ell_upper", f"{self.ell_upper:.6f}", self.methods.get("ell_upper", "")),
            ("ell_plus", f"{self.ell_plus:.6f}", self.methods.get("ell_plus", "")),
            ("h", f"{self.entropy_h:.6f}", self.methods.get("entropy_h", "")),
            ("h_ratio", f"{self.entropy_ratio:.6f}", self.methods.get("entropy_ratio", "")),
            ("v", f"{self.volume_v:.6f}" if math.isfinite(self.volume_v) else "inf",
             self.methods.get("volume_v", "")),
        ]
        if self.k_functional is not None:
            rows.append(("k", f"{self.k_functional:.6f}", self.methods.get("k_functional", "")))
        lines = [f"space: {self.space}", "-" * 64]
        for a, b, c in rows:
            lines.append(f"{a:<12} {b:>14}  {c}")
        lines.append("-" * 64)
        for s in self.inequality_status:
            rhs = f"{s.rhs:.6f}" if math.isfinite(s.rhs) else "inf"
            verdict = "pass" if s.passed else "FAIL"
            lines.append(f"{s.name:<24} lhs={s.lhs:.6f} rhs={rhs} [{verdict}]")
        lines.append(f"converged: {self.converged}   flags: {self.flags or 'none'}")
        return "\n".join(lines)


def default_t_grid(space: ModelManifold) -> list[float]:
    """Desk-scale horizons.

    Curved spaces use t_max = 40/k^2 (diffusive scaling: H_k at time t looks
    like H_1 at time k^2 t, so this keeps the finite-horizon bias 1/(k^2 t)
    uniform over the catalog).  Flat space runs to t = 2500 (cheap 1-D
    quadratures) so the finite-t entropy increment d/(2t) falls below the
    chain's slack tolerance.
    """
    if isinstance(space, Euclidean):
        return [100.0, 500.0, 1000.0, 1500.0, 2000.0, 2400.0, 2450.0, 2500.0]
    k = getattr(space, "k", 1.0)
    base = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 38.0, 39.0, 40.0]
    return [t / (k * k) for t in base]


def _is_negatively_curved(space: ModelManifold) -> bool:
    return isinstance(space, (Hyperbolic, HalfPlane))


def inequality_report(
    target,
    t_grid=None,
    r_max: float = 40.0,
    strict: bool = False,
) -> AsymptoticReport:
    """Assemble ell, h, v (and k on the half-plane) and evaluate the chains

        (1/2) ell^2 <= h <= ell v          (all spaces)
        2 ell^2 <= h, with equality audit  (negatively curved homogeneous)

    With strict=True a non-converged entropy estimate raises
    NonConvergedError instead of being reported via the flag.
    """
    if isinstance(target, Ensemble):
        return _ensemble_report(target, t_grid=t_grid, r_max=r_max, strict=strict)
    space = target
    ts = list(t_grid) if t_grid is not None else default_t_grid(space)
    flags = []

    dfit = drift_subadditive_limit(space, ts)
    if dfit.subadditivity_violations:
        raise EstimatorError(f"subadditivity violated: {dfit.subadditivity_violations}")
    efit = entropy_rate(space, ts)
    vfit = space.volume_growth(r_max)
    if not vfit.finite:
        flags.append("volume growth not finite: inequality chain vacuous")

    k_val = None
    if isinstance(space, HalfPlane):
        from .busemann import k_functional_and_equality

        k_val, gap = k_functional_and_equality()
        if gap > 1e-8:
            flags.append(f"half-plane equality gap {gap:.2e}")

    ell, ell_up = dfit.increment, dfit.value
    h_inc, h_ratio = efit.increment, efit.ratio
    v = vfit.value
    checks = [
        InequalityStatus.check("half_ell_sq_le_h", 0.5 * ell * ell, h_inc),
        InequalityStatus.check("h_le_ell_v", h_inc, ell_up * v),
    ]
    if _is_negatively_curved(space):
        checks.append(InequalityStatus.check("two_ell_sq_le_h", 2.0 * ell * ell, h_inc))
        if k_val is not None:
            checks.append(InequalityStatus.check("two_ell_sq_le_k", 2.0 * ell * ell, k_val))
            checks.append(InequalityStatus.check("k_le_h", k_val, h_inc))
    if strict and not efit.converged:
        raise NonConvergedError(f"entropy increments not Cauchy on {space.label()}")
    return AsymptoticReport(
        space=space.to_json_dict(),
        ell=ell,
        ell_upper=ell_up,
        ell_ci=(min(ell, ell_up), max(ell, ell_up)),
        ell_plus=ell,
        entropy_h=h_inc,
        entropy_ratio=h_ratio,
        entropy_ci=(min(h_inc, h_ratio), max(h_inc, h_ratio)),
        volume_v=v,
        volume_finite=vfit.finite,
        k_functional=k_val,
        inequality_status=checks,
        t_grid=ts,
        methods={
            "ell": "quadrature increment (Busemann/Furstenberg form)",
            "ell_upper": "subadditive ratio ell_t/t (Fekete upper bound)",
            "ell_plus": "single ergodic component",
            "entropy_h": "entropy increment",
            "entropy_ratio": "h_t/t",
            "volume_v": "log-volume slope fit",
            "k_functional": "closed form (half-plane Poisson kernel)",
        },
        converged=efit.converged,
        flags=flags,
    )


def _ensemble_report(ensemble, t_grid, r_max, strict):
    abstract = all(isinstance(c, DriftComponent) for c in ensemble.components)
    ell, ell_plus = ensemble_drift(ensemble)
    if abstract:
        return AsymptoticReport(
            space={"kind": "ensemble",
                   "components": [{"drift": c.drift, "weight": w, "label": c.label}
                                  for c, w in zip(ensemble.components, ensemble.weights)]},
            ell=ell,
            ell_upper=ell,
            ell_ci=(ell, ell),
            ell_plus=ell_plus,
            entropy_h=math.nan,
            entropy_ratio=math.nan,
            entropy_ci=(math.nan, math.nan),
            volume_v=math.nan,
            volume_finite=True,
            k_functional=None,
            inequality_status=[],
            t_grid=[],
            methods={"ell": "weighted component drifts", "ell_plus": "max component drift"},
            converged=True,
            flags=["abstract drift mixture: entropy/volume not defined"],
        )
    reports = [
        inequality_report(c, t_grid=t_grid, r_max=r_max, strict=strict)
        for c in ensemble.components
    ]
    ws = ensemble.weights
    h = sum(w * r.entropy_h for w, r in zip(ws, reports))
    v = sum(w * r.volume_v for w, r in zip(ws, reports))
    ell_up = sum(w * r.ell_upper for w, r in zip(ws, reports))
    checks = [InequalityStatus.check("half_ell_sq_le_h", 0.5 * ell * ell, h)]
    return AsymptoticReport(
        space={"kind": "ensemble",
               "components": [{"space": r.space, "weight": w} for r, w in zip(reports, ws)]},
        ell=ell,
        ell_upper=ell_up,
        ell_ci=(min(ell, ell_up), max(ell, ell_up)),
        ell_plus=ell_plus,
        entropy_h=h,
        entropy_ratio=sum(w * r.entropy_ratio for w, r in zip(ws, reports)),
        entropy_ci=(h, h),
        volume_v=v,
        volume_finite=all(r.volume_finite for r in reports),
        k_functional=None,
        inequality_status=checks,
        t_grid=reports[0].t_grid,
        methods={"ell": "weighted component increments", "ell_plus": "max component drift"},
        converged=all(r.converged for r in reports),
        flags=[f for r in reports for f in r.flags],
    )
