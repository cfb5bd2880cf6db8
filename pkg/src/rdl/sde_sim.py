"""Monte Carlo engine: Brownian motion on the half-plane and on rotationally
symmetric surfaces via radial/angular SDEs.

Half-plane (ds^2 = y^-2(dx^2+dy^2), generator Delta/2 in coordinates:
dx = y dB1, dy = y dB2):
  the y-update is exact in law per step, y_{n+1} = y_n exp(dB2 - dt/2),
  which forbids y <= 0; the x-update uses y at the step midpoint.

Radial SDE on a surface with profile p:
  dr_t = dX_t + f(r_t) dt,  f = p'/(2p),
with the angular clock tau_t = int_0^t p(r_s)^-2 ds and theta_t = Y_{tau_t}
for an independent driving motion Y.

Reproducibility: every path owns a counter-based Philox stream keyed by
(seed, 2*path_index + substream), so results are bit-identical regardless of
batching or worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model_spaces import ProfileFunction

__all__ = [
    "SimConfig",
    "HalfPlanePath",
    "RadialProcess",
    "TailLimitResult",
    "path_rng",
    "simulate_halfplane",
    "simulate_radial",
    "kaimanovich_tail_limit",
    "KAIMANOVICH_R_CAP",
]

# Beyond this radius the H(r)-t increments are below 1e-2 per unit time and
# the path state is frozen (see kaimanovich_tail_limit).
KAIMANOVICH_R_CAP = 200.0

# r beyond which even log-space bookkeeping would degrade; paths must not get here.
_R_ABORT = 1e100


@dataclass(frozen=True)
class SimConfig:
    seed: int
    n_paths: int
    t_max: float
    dt: float = 1e-2
    scheme: str = "euler-maruyama"
    record_stride: int = 1

    def __post_init__(self):
        if self.scheme != "euler-maruyama":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not (0 <= self.seed < 2 ** 63):
            raise ValueError("seed must fit in a 63-bit nonnegative integer")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.dt <= 0 or self.t_max <= 0:
            raise ValueError("dt and t_max must be positive")
        steps = self.t_max / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"t_max/dt must be an integer, got {steps}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "n_paths": self.n_paths,
                "t_max": self.t_max,
                "dt": self.dt,
                "scheme": self.scheme,
                "record_stride": self.record_stride,
            }
        )

    @classmethod
    def from_json(cls, s: str) -> "SimConfig":
        return cls(**json.loads(s))


def path_rng(seed: int, path_index: int, substream: int = 0) -> np.random.Generator:
    """Counter-based stream for one path; independent of all other paths."""
    key = np.array([seed, 2 * path_index + substream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class HalfPlanePath:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def hyperbolic_dist_from(self, pt) -> np.ndarray:
        x0, y0 = float(pt[0]), float(pt[1])
        arg = 1.0 + ((self.x - x0) ** 2 + (self.y - y0) ** 2) / (2.0 * self.y * y0)
        return np.arccosh(np.maximum(arg, 1.0))


def simulate_halfplane(cfg: SimConfig, start=(0.0, 1.0)) -> list[HalfPlanePath]:
    x0, y0 = float(start[0]), float(start[1])
    if y0 <= 0:
        raise ValueError(f"start must have y > 0, got {y0}")
    n, dt = cfg.n_steps, cfg.dt
    sqdt = math.sqrt(dt)
    rec = np.arange(0, n + 1, cfg.record_stride)
    if rec[-1] != n:
        rec = np.append(rec, n)
    times = rec * dt
    paths = []
    for i in range(cfg.n_paths):
        rng = path_rng(cfg.seed, i)
        db = rng.standard_normal((n, 2)) * sqdt
        # y is geometric Brownian motion: exact update in law
        log_y = np.empty(n + 1)
        log_y[0] = math.log(y0)
        log_y[1:] = math.log(y0) + np.cumsum(db[:, 1] - dt / 2.0)
        y = np.exp(log_y)
        y_mid = 0.5 * (y[:-1] + y[1:])
        x = np.empty(n + 1)
        x[0] = x0
        x[1:] = x0 + np.cumsum(y_mid * db[:, 0])
        paths.append(HalfPlanePath(times=times, x=x[rec], y=y[rec]))
    return paths


@dataclass(frozen=True)
class RadialProcess:
    times: np.ndarray
    r: np.ndarray
    h_minus_t: np.ndarray  # H(r_t) - t with H(r) = log(1 + r^2)
    tau: np.ndarray        # angular clock, non-decreasing
    theta: np.ndarray
    n_reflections: int
    capped: bool
    cap_time: float | None = None


def _h(r: np.ndarray) -> np.ndarray:
    return np.log1p(r * r)


def simulate_radial(
    profile: ProfileFunction,
    cfg: SimConfig,
    r0: float,
    r_cap: float | None = None,
) -> list[RadialProcess]:
    """Euler-Maruyama on dr = dX + f(r) dt with reflection at 0.

    A trajectory touching r <= 0 is reflected (|r|); the event count is
    reported.  If r_cap is set, a path that reaches it has its whole state
    (r, H - t, tau, theta) frozen there and is flagged capped; if any path
    exceeds the float-safe range the run aborts.
    """
    if r0 <= 0:
        raise ValueError(f"need r0 > 0, got {r0}")
    n, dt = cfg.n_steps, cfg.dt
    sqdt = math.sqrt(dt)
    rec_mask = np.zeros(n + 1, dtype=bool)
    rec_mask[::cfg.record_stride] = True
    rec_mask[-1] = True
    times_all = np.arange(n + 1) * dt
    out = []
    for i in range(cfg.n_paths):
        rng_r = path_rng(cfg.seed, i, substream=0)
        rng_a = path_rng(cfg.seed, i, substream=1)
        dX = rng_r.standard_normal(n) * sqdt
        ang = rng_a.standard_normal(n)
        r_traj = np.empty(n + 1)
        hmt = np.empty(n + 1)
        tau = np.empty(n + 1)
        theta = np.empty(n + 1)
        r_traj[0], tau[0], theta[0] = r0, 0.0, 0.0
        hmt[0] = float(_h(np.asarray(r0)))
        r = r0
        frozen = False
        cap_time = None
        reflections = 0
        for s in range(n):
            if not frozen:
                proposal = r + float(profile.sde_drift(r)) * dt + dX[s]
                if proposal <= 0.0:
                    reflections += 1
                    proposal = abs(proposal)
                r = proposal
                if r > _R_ABORT:
                    raise OverflowError(
                        f"path {i} exceeded r = {_R_ABORT:g} at t = {(s + 1) * dt:g}"
                    )
                d_tau = float(profile.angular_clock_integrand(r)) * dt
                tau[s + 1] = tau[s] + d_tau
                theta[s + 1] = theta[s] + math.sqrt(d_tau) * ang[s]
                hmt[s + 1] = float(_h(np.asarray(r))) - (s + 1) * dt
                if r_cap is not None and r >= r_cap:
                    frozen = True
                    cap_time = (s + 1) * dt
            else:
                tau[s + 1] = tau[s]
                theta[s + 1] = theta[s]
                hmt[s + 1] = hmt[s]
            r_traj[s + 1] = r
        out.append(
            RadialProcess(
                times=times_all[rec_mask],
                r=r_traj[rec_mask],
                h_minus_t=hmt[rec_mask],
                tau=tau[rec_mask],
                theta=theta[rec_mask],
                n_reflections=reflections,
                capped=frozen,
                cap_time=cap_time,
            )
        )
    return out


def _simulate_radial_block(profile, cfg, r0, r_cap, want_unit_marks):
    """Vectorized-over-paths radial integrator used by kaimanovich_tail_limit.

    Draws each path's increments from its own stream (same order as
    simulate_radial), then advances all paths together; output is
    bit-identical to the per-path loop.
    """
    n, dt = cfg.n_steps, cfg.dt
    m = cfg.n_paths
    sqdt = math.sqrt(dt)
    dX = np.empty((n, m))
    for i in range(m):
        dX[:, i] = path_rng(cfg.seed, i, substream=0).standard_normal(n)
    dX *= sqdt
    per_unit = int(round(1.0 / dt))
    r = np.full(m, r0, dtype=float)
    hmt = np.full(m, float(_h(np.asarray(r0))))
    frozen = np.zeros(m, dtype=bool)
    cap_times = np.full(m, np.nan)
    reflections = np.zeros(m, dtype=int)
    marks = {}
    for s in range(n):
        active = ~frozen
        drift = np.where(active, profile.sde_drift(np.where(active, r, 1.0)), 0.0)
        proposal = r + drift * dt + np.where(active, dX[s], 0.0)
        hit = active & (proposal <= 0.0)
        reflections += hit.astype(int)
        proposal = np.abs(proposal)
        r = np.where(active, proposal, r)
        if np.any(r > _R_ABORT):
            raise OverflowError(f"a path exceeded r = {_R_ABORT:g}")
        t = (s + 1) * dt
        hmt = np.where(active, _h(r) - t, hmt)
        if r_cap is not None:
            newly = active & (r >= r_cap)
            cap_times[newly] = t
            frozen |= newly
        if want_unit_marks and (s + 1) % per_unit == 0:
            marks[int(round(t))] = hmt.copy()
    return r, hmt, frozen, cap_times, reflections, marks


@dataclass(frozen=True)
class TerminalRadial:
    """Terminal state of a batch of radial paths (fast path for ensemble laws)."""

    r: np.ndarray
    h_minus_t: np.ndarray
    n_reflections: int
    n_capped: int


def radial_terminal(
    profile: ProfileFunction, cfg: SimConfig, r0: float, r_cap: float | None = None
) -> TerminalRadial:
    """Terminal r of simulate_radial for all paths, vectorized across paths.

    Uses the same per-path streams and update rule as simulate_radial, so the
    terminal values are bit-identical to the per-path integrator.
    """
    r, hmt, frozen, _, reflections, _ = _simulate_radial_block(
        profile, cfg, r0, r_cap, want_unit_marks=False
    )
    return TerminalRadial(
        r=r, h_minus_t=hmt, n_reflections=int(reflections.sum()), n_capped=int(frozen.sum())
    )


@dataclass(frozen=True)
class TailLimitResult:
    """Per-path estimates of L = lim H(r_t) - t plus ensemble statistics."""

    L: np.ndarray
    diagnostic: np.ndarray      # |increment of H(r_t)-t over the last unit time|
    converged: np.ndarray
    mean: float
    std: float
    n_excluded: int
    n_capped: int
    n_reflections: int
    trajectories: list[RadialProcess] = field(default_factory=list)


def kaimanovich_tail_limit(
    cfg: SimConfig,
    r0: float = 1.0,
    r_cap: float = KAIMANOVICH_R_CAP,
    convergence_tol: float = 0.05,
    n_trajectories: int = 0,
) -> TailLimitResult:
    """Estimate the tail limit of H(r_t) - t on the Kaimanovich surface.

    L_hat per path is H(r) - t at t_max; paths whose last-unit increment
    exceeds convergence_tol are flagged non-converged and excluded from the
    ensemble statistics (count reported).  Optionally returns the first
    n_trajectories as stride-recorded RadialProcess objects (the data behind
    the ten-trajectory figure).
    """
    if cfg.t_max < 2.0:
        raise ValueError("need t_max >= 2 to form the last-unit-time diagnostic")
    if cfg.t_max / 1.0 != int(cfg.t_max):
        raise ValueError("t_max must be an integer number of time units")
    profile = _kaimanovich_profile()
    r, hmt, frozen, cap_times, reflections, marks = _simulate_radial_block(
        profile, cfg, r0, r_cap, want_unit_marks=True
    )
    t_last, t_prev = int(cfg.t_max), int(cfg.t_max) - 1
    L = marks[t_last]
    diag = np.abs(marks[t_last] - marks[t_prev])
    converged = diag <= convergence_tol
    kept = L[converged]
    trajectories = []
    if n_trajectories > 0:
        sub = SimConfig(
            seed=cfg.seed,
            n_paths=min(n_trajectories, cfg.n_paths),
            t_max=cfg.t_max,
            dt=cfg.dt,
            record_stride=cfg.record_stride,
        )
        trajectories = simulate_radial(profile, sub, r0, r_cap=r_cap)
    return TailLimitResult(
        L=L,
        diagnostic=diag,
        converged=converged,
        mean=float(kept.mean()) if kept.size else math.nan,
        std=float(kept.std(ddof=1)) if kept.size > 1 else math.nan,
        n_excluded=int((~converged).sum()),
        n_capped=int(frozen.sum()),
        n_reflections=int(reflections.sum()),
        trajectories=trajectories,
    )


def _kaimanovich_profile() -> ProfileFunction:
    from .model_spaces import builtin_profile

    return builtin_profile("kaimanovich")
