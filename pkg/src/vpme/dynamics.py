"""Particle dynamics for the ion phase-space density.

Characteristics of the transport equation are advanced with a
kick-drift-kick leapfrog.  Each step deposits the spatial density,
solves the nonlinear field equation once, and gathers the field back
to the particles with the same cloud-in-cell stencil used for
deposition, so the particle-grid pair is self-consistent at every
step boundary.

The step size is capped at dt <= 0.1 * epsilon: the field scales like
eps^-2 over an O(eps) plasma period, and resolving that oscillation is
what keeps the discrete energy drift at the 1e-3 level over unit
times.

Positions are tracked in lifted (unwrapped) coordinates; the torus
representative used for deposition is recovered by wrapping, so the
stored trajectories expose both views consistently.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    InvariantError,
    TrajectoryRangeError,
)
from .field import PotentialField, solve_poisson_boltzmann
from .geometry import wrap_coords
from .measures import ParticleEnsemble, deposit_density, energy, moment
from .records import CheckpointRow, RunRecord

DT_FACTOR_CAP = 0.1


@dataclass(frozen=True)
class SimParams:
    """Discretization parameters for one run.

    ``t_end`` must be an integer number of steps and of checkpoint
    intervals; checkpoints must land on step boundaries.
    """

    epsilon: float
    dt: float
    t_end: float
    grid_resolution: int = 64
    checkpoint_interval: float | None = None
    field_tol: float = 1e-12
    k0: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        cap = DT_FACTOR_CAP * self.epsilon
        if self.dt <= 0.0 or self.dt > cap * (1.0 + 1e-12):
            raise ConfigError(
                f"dt = {self.dt:g} violates the stability cap 0.1*epsilon = {cap:g}")
        n = round(self.t_end / self.dt)
        if n < 1 or abs(n * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ConfigError(
                f"t_end = {self.t_end:g} is not an integer multiple of dt = {self.dt:g}")
        ci = self.checkpoint_interval
        if ci is not None:
            m = round(ci / self.dt)
            if m < 1 or abs(m * self.dt - ci) > 1e-9 * max(1.0, ci):
                raise ConfigError(
                    f"checkpoint interval {ci:g} does not land on step boundaries")

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt)

    @property
    def checkpoint_stride(self) -> int:
        ci = self.checkpoint_interval
        if ci is None:
            return max(1, self.n_steps // 10)
        return round(ci / self.dt)


def aligned_dt(epsilon: float, interval: float) -> float:
    """Largest dt under the 0.1*epsilon cap that divides ``interval``.

    Lets runs at different epsilon hit exactly the same checkpoint
    times.
    """
    if interval <= 0:
        raise ConfigError(f"interval must be positive, got {interval}")
    return interval / int(np.ceil(interval / (DT_FACTOR_CAP * epsilon) - 1e-12))


# ---------------------------------------------------------------------------
# field gather
# ---------------------------------------------------------------------------


def gather_field(E: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Interpolate a grid field to particle positions (CIC stencil).

    ``E`` has shape (d, n) or (d, n, n); returns (N, d).  The stencil
    mirrors deposition exactly, which makes the particle-grid force
    pair momentum-consistent.
    """
    E = np.asarray(E, dtype=float)
    x = np.asarray(positions, dtype=float)
    d = E.shape[0]
    n = E.shape[1]
    if x.ndim != 2 or x.shape[1] != d:
        raise DimensionError("positions do not match field dimension",
                             expected=d, got=x.shape)
    if d == 1:
        s = (x[:, 0] + 0.5) * n
        j0 = np.floor(s).astype(np.int64)
        frac = s - j0
        j0 = j0 % n
        j1 = (j0 + 1) % n
        out = (1.0 - frac) * E[0, j0] + frac * E[0, j1]
        return out[:, None]
    if d == 2:
        s0 = (x[:, 0] + 0.5) * n
        s1 = (x[:, 1] + 0.5) * n
        i0 = np.floor(s0).astype(np.int64)
        j0 = np.floor(s1).astype(np.int64)
        fx = s0 - i0
        fy = s1 - j0
        i0 = i0 % n
        j0 = j0 % n
        i1 = (i0 + 1) % n
        j1 = (j0 + 1) % n
        w00 = (1.0 - fx) * (1.0 - fy)
        w10 = fx * (1.0 - fy)
        w01 = (1.0 - fx) * fy
        w11 = fx * fy
        out = np.empty((x.shape[0], 2))
        for ax in range(2):
            comp = E[ax]
            out[:, ax] = (w00 * comp[i0, j0] + w10 * comp[i1, j0]
                          + w01 * comp[i0, j1] + w11 * comp[i1, j1])
        return out
    raise DimensionError("gather supports d in {1, 2}", got=d)


def force_at(U: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Self-consistent force: minus the gradient of the deposited
    potential energy with respect to particle positions.

    Differentiates the deposition weights instead of interpolating a
    grid gradient; together with the variational field solve this makes
    the semi-discrete particle system exactly energy-conserving, so the
    leapfrog energy error is pure O(dt^2).  The force is the cell-edge
    difference of U, piecewise constant per cell.
    """
    U = np.asarray(U, dtype=float)
    x = np.asarray(positions, dtype=float)
    d = U.ndim
    n = U.shape[0]
    if x.ndim != 2 or x.shape[1] != d:
        raise DimensionError("positions do not match potential dimension",
                             expected=d, got=x.shape)
    if d == 1:
        s = (x[:, 0] + 0.5) * n
        j0 = np.floor(s).astype(np.int64) % n
        j1 = (j0 + 1) % n
        return (-(U[j1] - U[j0]) * n)[:, None]
    if d == 2:
        s0 = (x[:, 0] + 0.5) * n
        s1 = (x[:, 1] + 0.5) * n
        i0 = np.floor(s0).astype(np.int64)
        j0 = np.floor(s1).astype(np.int64)
        fx = s0 - i0
        fy = s1 - j0
        i0 = i0 % n
        j0 = j0 % n
        i1 = (i0 + 1) % n
        j1 = (j0 + 1) % n
        out = np.empty((x.shape[0], 2))
        out[:, 0] = -n * ((U[i1, j0] - U[i0, j0]) * (1.0 - fy)
                          + (U[i1, j1] - U[i0, j1]) * fy)
        out[:, 1] = -n * ((U[i0, j1] - U[i0, j0]) * (1.0 - fx)
                          + (U[i1, j1] - U[i1, j0]) * fx)
        return out
    raise DimensionError("force supports d in {1, 2}", got=d)


def _solve_for(f: ParticleEnsemble, params: SimParams, u0=None) -> PotentialField:
    rho = deposit_density(f, params.grid_resolution)
    return solve_poisson_boltzmann(rho, params.epsilon, tol=params.field_tol, u0=u0)


def step(f: ParticleEnsemble, params: SimParams,
         field: PotentialField | None = None):
    """One kick-drift-kick step.

    Returns (advanced ensemble, end-of-step field).  Passing the
    previous end-of-step field avoids re-solving at the start, so a
    long run costs one nonlinear solve per step.
    """
    if field is None:
        field = _solve_for(f, params)
    dt = params.dt
    e_start = force_at(field.U, f.positions)
    v_half = f.velocities + 0.5 * dt * e_start
    lifted = f.positions + dt * v_half
    x_new = wrap_coords(lifted)
    f_mid = replace(f, positions=x_new, velocities=v_half, time=f.time + dt)
    field_new = _solve_for(f_mid, params, u0=field.U)
    e_end = force_at(field_new.U, x_new)
    v_new = v_half + 0.5 * dt * e_end
    f_new = replace(f_mid, velocities=v_new)
    return f_new, field_new


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """Characteristic curves sampled at checkpoint times.

    ``lifted`` holds unwrapped positions; wrapping them reproduces the
    torus positions of the matching snapshots exactly.  ``e_mag`` is
    the field magnitude seen by each particle, used for the impulse
    functional.
    """

    times: np.ndarray        # (S,)
    lifted: np.ndarray       # (S, N, d)
    velocities: np.ndarray   # (S, N, d)
    e_mag: np.ndarray        # (S, N)
    v0: np.ndarray           # (N, d)

    def index_of(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9:
            raise TrajectoryRangeError(
                f"time {t:g} is not a stored trajectory sample")
        return idx

    def torus_positions_at(self, t: float) -> np.ndarray:
        return wrap_coords(self.lifted[self.index_of(t)])

    def velocities_at(self, t: float) -> np.ndarray:
        return self.velocities[self.index_of(t)]


def q_star(traj: TrajectorySet, t: float) -> float:
    """Largest velocity excursion sup_{s<=t} |V(s) - V(0)| over the
    stored samples."""
    idx = traj.index_of(t)
    dev = traj.velocities[: idx + 1] - traj.v0[None]
    return float(np.sqrt(np.max(np.sum(dev**2, axis=-1))))


def q_increment(traj: TrajectorySet, t: float, delta: float) -> float:
    """Largest field impulse sup_particles int_{t-delta}^t |E(X(s))| ds,
    trapezoid on the stored samples with interpolated endpoints."""
    if delta <= 0.0:
        raise TrajectoryRangeError(f"delta must be positive, got {delta}")
    t0 = t - delta
    ts = traj.times
    if t0 < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
        raise TrajectoryRangeError(
            f"window [{t0:g}, {t:g}] leaves the stored range [{ts[0]:g}, {ts[-1]:g}]")

    def value_at(te):
        i = int(np.clip(np.searchsorted(ts, te) - 1, 0, ts.size - 2))
        h = ts[i + 1] - ts[i]
        w = np.clip((te - ts[i]) / h, 0.0, 1.0)
        return (1.0 - w) * traj.e_mag[i] + w * traj.e_mag[i + 1]

    interior = np.nonzero((ts > t0 + 1e-12) & (ts < t - 1e-12))[0]
    nodes = np.concatenate([[t0], ts[interior], [t]])
    vals = np.vstack([value_at(t0), traj.e_mag[interior], value_at(t)])
    seg = np.diff(nodes)
    integral = 0.5 * np.sum(seg[:, None] * (vals[:-1] + vals[1:]), axis=0)
    return float(np.max(integral))


@dataclass(frozen=True)
class GrowthDiagnostics:
    time: float
    q_star: float
    q_increment: float
    rho_sup: float
    rho_lp: float


def growth_diagnostics(record: RunRecord, t: float,
                       delta: float | None = None) -> GrowthDiagnostics:
    traj = record.trajectories
    if traj is None:
        raise TrajectoryRangeError("run record stores no trajectories")
    idx = traj.index_of(t)
    row = record.checkpoints[idx]
    if delta is None:
        delta = t if t > 0 else None
    qi = q_increment(traj, t, delta) if delta else 0.0
    return GrowthDiagnostics(time=float(t), q_star=q_star(traj, t),
                             q_increment=qi, rho_sup=row.rho_sup,
                             rho_lp=row.rho_lp)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def simulate(f0: ParticleEnsemble, params: SimParams,
             store_snapshots: bool = True, store_trajectories: bool = True,
             config_hash: str = "", out_dir=None) -> RunRecord:
    """Advance an ensemble to t_end, recording checkpoint diagnostics.

    The run is deterministic given (f0, params).  If a monitor fails
    mid-run and ``out_dir`` is set, the partial record is flushed
    there before the error propagates.
    """
    if abs(f0.epsilon - params.epsilon) > 1e-15:
        raise InvariantError("ensemble and params disagree on epsilon")
    record = RunRecord(d=f0.d, epsilon=params.epsilon, seed=params.seed,
                       k0=params.k0, config_hash=config_hash)
    t_start = _time.perf_counter()
    stride = params.checkpoint_stride
    n_steps = params.n_steps
    lp_order = (f0.d + 2.0) / f0.d

    f = f0
    lifted = f0.positions.copy()
    field = _solve_for(f, params)
    m_k_sup = -np.inf
    q_sup = 0.0
    traj_times, traj_x, traj_v, traj_e = [], [], [], []

    def checkpoint(step_idx):
        nonlocal m_k_sup, q_sup
        rho = deposit_density(f, params.grid_resolution)
        erep = energy(f, field)
        m_k_sup = max(m_k_sup, moment(f, params.k0).value)
        dev = f.velocities - f0.velocities
        q_sup = max(q_sup, float(np.sqrt(np.max(np.sum(dev**2, axis=-1)))))
        e_here = force_at(field.U, f.positions)
        e_norm = np.sqrt(np.sum(e_here**2, axis=-1))
        grad_sq = np.sum(field.E**2, axis=0)
        h_field = field.electron_density - rho.values
        row = CheckpointRow(
            time=f.time, kinetic=erep.kinetic, field=erep.field,
            electron=erep.electron, m_k=float(m_k_sup),
            rho_sup=rho.lp_norm(np.inf), rho_lp=rho.lp_norm(lp_order),
            q_star=q_sup, grad_u_sup=float(np.sqrt(np.max(grad_sq))),
            h_sup=float(np.max(np.abs(h_field))),
        )
        record.checkpoints.append(row)
        record.snapshots.append(f if store_snapshots else None)
        if store_trajectories:
            traj_times.append(f.time)
            traj_x.append(lifted.copy())
            traj_v.append(f.velocities.copy())
            traj_e.append(e_norm)

    def flush_partial():
        if store_trajectories and traj_times:
            record.trajectories = TrajectorySet(
                times=np.array(traj_times), lifted=np.stack(traj_x),
                velocities=np.stack(traj_v), e_mag=np.stack(traj_e),
                v0=f0.velocities.copy())
        record.wall_clock = _time.perf_counter() - t_start
        if out_dir is not None:
            from pathlib import Path

            from .records import write_run_record
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_run_record(out / "run.ndjson", record)

    try:
        checkpoint(0)
        for k in range(1, n_steps + 1):
            dt = params.dt
            e_start = force_at(field.U, f.positions)
            v_half = f.velocities + 0.5 * dt * e_start
            lifted = lifted + dt * v_half
            x_new = wrap_coords(lifted)
            f = replace(f, positions=x_new, velocities=v_half, time=f0.time + k * dt)
            field = _solve_for(f, params, u0=field.U)
            e_end = force_at(field.U, x_new)
            f = replace(f, velocities=v_half + 0.5 * dt * e_end)
            if k % stride == 0 or k == n_steps:
                checkpoint(k)
    except Exception:
        flush_partial()
        raise
    flush_partial()
    return record


# ---------------------------------------------------------------------------
# growth envelopes
# ---------------------------------------------------------------------------


def growth_envelope(t: float, epsilon: float, c: float = 1.0) -> float:
    """Density growth envelope c (1 + eps^-4 t^2)(1 + log(1 + eps^-2 t))."""
    a = epsilon**-2 * t
    return float(c * (1.0 + a * a) * (1.0 + np.log1p(a)))


def b_function(y):
    """b(y) = y / (1 + log(1 + y)) on y >= 0; strictly increasing."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise InvariantError("b is defined on [0, inf)")
    out = y / (1.0 + np.log1p(y))
    return float(out) if out.ndim == 0 else out


def b_inverse_bound(u):
    """y = 2u(1 + log(1 + u)) satisfies b(y) >= u, giving a closed-form
    upper bound for b^{-1}."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise InvariantError("the inverse bound needs u >= 0")
    out = 2.0 * u * (1.0 + np.log1p(u))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DensityBoundReport:
    times: np.ndarray
    ratios: np.ndarray       # rho_sup / (1 + q_star^d)
    fitted_c: float
    slack: float
    verdicts: np.ndarray
    passed: bool


def verify_density_bound(record: RunRecord, slack: float = 4.0) -> DensityBoundReport:
    """Check rho_sup(t) <= slack * C * (1 + Q_*(t)^d) with C fitted at
    the initial time."""
    times = record.times
    rho_sup = record.column("rho_sup")
    qs = record.column("q_star")
    ratios = rho_sup / (1.0 + qs**record.d)
    c0 = float(ratios[0])
    verdicts = ratios <= slack * c0 * (1.0 + 1e-12)
    return DensityBoundReport(times=times, ratios=ratios, fitted_c=c0,
                              slack=float(slack), verdicts=verdicts,
                              passed=bool(np.all(verdicts)))


@dataclass(frozen=True)
class Growth2DReport:
    times: np.ndarray
    rho_running_sup: np.ndarray
    envelope: np.ndarray
    fitted_c: float
    field_constants: np.ndarray   # grad_u_sup / (eps^-2 (1 + sqrt|log h_sup|))
    field_fitted_c: float
    envelope_verdicts: np.ndarray
    field_verdicts: np.ndarray
    b_machinery_ok: bool
    scaling_ratio: float          # envelope(eps/2) / envelope(eps) at t_end
    scaling_verdict: bool
    slack: float
    passed: bool


def verify_2d_growth(record: RunRecord, slack: float = 4.0) -> Growth2DReport:
    """Density and field growth envelopes for a 2d run.

    All constants are fitted at the initial checkpoint and rechecked
    with the given slack at later ones; the eps^-4 prefactor is
    exercised on the envelope formula itself by halving epsilon.
    """
    if record.d != 2:
        raise DimensionError("growth envelope is for 2d runs", expected=2,
                             got=record.d)
    eps = record.epsilon
    times = record.times
    rho_sup = record.column("rho_sup")
    running = np.maximum.accumulate(rho_sup)
    shape = np.array([growth_envelope(t, eps) for t in times])
    c0 = float(running[0])
    envelope = slack * c0 * shape
    env_verdicts = running <= envelope * (1.0 + 1e-12)

    grad = record.column("grad_u_sup")
    h_sup = record.column("h_sup")
    with np.errstate(divide="ignore"):
        denom = eps**-2 * (1.0 + np.sqrt(np.abs(np.log(np.maximum(h_sup, 1e-300)))))
    field_c = grad / denom
    fc0 = float(max(field_c[0], 1e-300))
    field_verdicts = field_c <= slack * fc0 * (1.0 + 1e-12)

    u = eps**-2 * times
    b_ok = bool(np.all(b_function(b_inverse_bound(u)) >= u * (1.0 - 1e-12)))
    t_end = float(times[-1])
    ratio = growth_envelope(t_end, eps / 2.0) / growth_envelope(t_end, eps)
    scaling_ok = bool(ratio >= 4.0)
    return Growth2DReport(
        times=times, rho_running_sup=running, envelope=envelope, fitted_c=c0,
        field_constants=field_c, field_fitted_c=fc0,
        envelope_verdicts=env_verdicts, field_verdicts=field_verdicts,
        b_machinery_ok=b_ok, scaling_ratio=float(ratio),
        scaling_verdict=scaling_ok, slack=float(slack),
        passed=bool(np.all(env_verdicts) and b_ok and scaling_ok),
    )


__all__ = [
    "SimParams", "TrajectorySet", "GrowthDiagnostics", "DensityBoundReport",
    "Growth2DReport", "step", "simulate", "gather_field", "force_at", "aligned_dt",
    "q_star", "q_increment", "growth_diagnostics", "verify_density_bound",
    "verify_2d_growth", "growth_envelope", "b_function", "b_inverse_bound",
    "DT_FACTOR_CAP",
]
