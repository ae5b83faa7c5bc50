"""Optimal transport on phase space T^d x R^d.

Ground cost between atoms (x, v) and (y, w):

    order 1:  |x - y|_T + |v - w|
    order 2:  |x - y|_T^2 + |v - w|^2

W_p is the p-th root of the optimal total cost.  The exact engine
solves the discrete problem to vertex precision: equal-size uniform
marginals reduce to an assignment problem, anything else goes through
the min-cost-flow linear program (HiGHS).  The entropic engine is a
log-domain Sinkhorn with a regularization schedule; its plan is rounded
to exact marginals and bracketed by an unregularized dual bound, so the
returned value carries a rigorous duality gap.

The module also hosts the kinetic distance functional: the unique
D in [0, 1) with

    D = eps^-2 |log D| * 1/2 int |X1-X2|_T^2 dpi0 + 1/2 int |V1-V2|^2 dpi0

for a coupling pi0 of the two initial ensembles, frozen in time, plus
the run-level monitors built on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import eye, kron, vstack
from scipy.special import logsumexp

from .errors import (
    DimensionError,
    EntropicError,
    InvariantError,
    RootBracketError,
    TrajectoryRangeError,
    TransportSizeError,
)
from .geometry import torus_displacement
from .measures import ParticleEnsemble, bare_moment

if TYPE_CHECKING:  # pragma: no cover
    from .dynamics import TrajectorySet
    from .records import RunRecord

EXACT_PAIR_LIMIT = 4_000_000
MARGINAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse coupling between two particle ensembles.

    cost_p1 / cost_p2 are the order-1 and order-2 total transport costs
    of this plan (the plan is optimal only for the order it was solved
    at).
    """

    i: np.ndarray
    j: np.ndarray
    mass: np.ndarray
    cost_p1: float
    cost_p2: float
    marginal_error: float

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if np.any(m <= 0.0):
            raise InvariantError("transport plan carries nonpositive mass entries")
        if self.marginal_error > MARGINAL_TOL:
            raise InvariantError(
                f"transport plan marginals violated by {self.marginal_error:g}"
            )

    @property
    def size(self) -> int:
        return int(self.mass.size)


def _phase_cost_blocks(mu: ParticleEnsemble, nu: ParticleEnsemble):
    """Torus position distance and velocity distance matrices."""
    if mu.d != nu.d:
        raise DimensionError("ensembles live in different dimensions",
                             expected=mu.d, got=nu.d)
    dx = np.zeros((mu.n, nu.n))
    for ax in range(mu.d):
        diff = torus_displacement(mu.positions[:, ax:ax + 1], nu.positions[None, :, ax])
        dx += diff**2
    dx = np.sqrt(dx)
    dv = np.zeros((mu.n, nu.n))
    for ax in range(mu.d):
        diff = mu.velocities[:, ax:ax + 1] - nu.velocities[None, :, ax]
        dv += diff**2
    dv = np.sqrt(dv)
    return dx, dv


def _cost_matrix(mu, nu, order):
    dx, dv = _phase_cost_blocks(mu, nu)
    if order == 1:
        return dx + dv
    return dx**2 + dv**2


def _plan_costs(mu, nu, ii, jj, mass):
    dx = np.zeros(ii.size)
    dv = np.zeros(ii.size)
    for ax in range(mu.d):
        dd = torus_displacement(mu.positions[ii, ax], nu.positions[jj, ax])
        dx += dd**2
        dv += (mu.velocities[ii, ax] - nu.velocities[jj, ax]) ** 2
    dx = np.sqrt(dx)
    dv = np.sqrt(dv)
    c1 = float(np.sum(mass * (dx + dv)))
    c2 = float(np.sum(mass * (dx**2 + dv**2)))
    return c1, c2


def _marginal_error(ii, jj, mass, a, b):
    ra = np.bincount(ii, weights=mass, minlength=a.size)
    cb = np.bincount(jj, weights=mass, minlength=b.size)
    return float(max(np.max(np.abs(ra - a)), np.max(np.abs(cb - b))))


def _make_plan(mu, nu, ii, jj, mass):
    keep = mass > 0.0
    ii, jj, mass = ii[keep], jj[keep], mass[keep]
    c1, c2 = _plan_costs(mu, nu, ii, jj, mass)
    err = _marginal_error(ii, jj, mass, mu.weights, nu.weights)
    return TransportPlan(i=ii, j=jj, mass=mass, cost_p1=c1, cost_p2=c2,
                         marginal_error=err)


def _solve_assignment(cost, w):
    rows, cols = linear_sum_assignment(cost)
    mass = np.full(rows.size, w)
    return rows, cols, mass


def _refine_on_support(ii, jj, x, a, b):
    """Re-solve flows exactly on the (acyclic) optimal support.

    A vertex of the transportation polytope has forest support, on
    which the flows are the unique solution of the marginal equations;
    least squares recovers them to machine precision and scrubs the LP
    solver's feasibility tolerance.
    """
    m, n = a.size, b.size
    k = ii.size
    if k > 4000:
        return x
    A = np.zeros((m + n, k))
    A[ii, np.arange(k)] = 1.0
    A[m + jj, np.arange(k)] = 1.0
    rhs = np.concatenate([a, b])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.all(sol > -1e-13):
        return np.maximum(sol, 0.0)
    return x


def _solve_lp(cost, a, b):
    m, n = cost.shape
    row_con = kron(eye(m, format="csr"), np.ones((1, n)), format="csr")
    col_con = kron(np.ones((1, m)), eye(n, format="csr"), format="csr")
    A = vstack([row_con, col_con[:-1]], format="csr")
    rhs = np.concatenate([a, b[:-1]])
    res = linprog(
        cost.ravel(), A_eq=A, b_eq=rhs, bounds=(0.0, None), method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if not res.success:
        raise InvariantError(f"transport LP failed: {res.message}")
    x = res.x
    support = x > 1e-14
    ii, jj = np.divmod(np.nonzero(support)[0], n)
    flows = _refine_on_support(ii, jj, x[support], a, b)
    return ii, jj, flows


def wasserstein(mu: ParticleEnsemble, nu: ParticleEnsemble, order: int = 2,
                method: str = "exact", reg_schedule=None,
                marginal_tol: float = 1e-8):
    """Wasserstein distance of order 1 or 2 between two ensembles.

    Returns (value, TransportPlan).  The exact method is limited to
    N_mu * N_nu <= 4e6 pairs; beyond that use method="entropic".
    """
    if order not in (1, 2):
        raise InvariantError(f"order must be 1 or 2, got {order}")
    if method == "exact":
        pairs = mu.n * nu.n
        if pairs > EXACT_PAIR_LIMIT:
            raise TransportSizeError(
                f"{pairs} pairs exceeds the exact-solver limit; use the entropic method",
                pairs=pairs, limit=EXACT_PAIR_LIMIT,
            )
        cost = _cost_matrix(mu, nu, order)
        uniform = (
            mu.n == nu.n
            and np.all(mu.weights == mu.weights[0])
            and np.all(nu.weights == nu.weights[0])
        )
        if uniform:
            ii, jj, mass = _solve_assignment(cost, float(mu.weights[0]))
        else:
            ii, jj, mass = _solve_lp(cost, mu.weights, nu.weights)
        plan = _make_plan(mu, nu, ii, jj, mass)
        total = plan.cost_p1 if order == 1 else plan.cost_p2
        value = total if order == 1 else np.sqrt(total)
        return float(value), plan
    if method == "entropic":
        return _entropic_wasserstein(mu, nu, order, reg_schedule, marginal_tol)
    raise InvariantError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# entropic solver
# ---------------------------------------------------------------------------

DEFAULT_REG_SCHEDULE = tuple(np.geomspace(1e-1, 1e-3, 5))


def _entropic_wasserstein(mu, nu, order, reg_schedule, marginal_tol):
    cost = _cost_matrix(mu, nu, order)
    a, b = mu.weights, nu.weights
    schedule = tuple(reg_schedule) if reg_schedule is not None else DEFAULT_REG_SCHEDULE
    scale = max(float(np.max(cost)), 1e-30)
    loga = np.log(a)
    logb = np.log(b)
    f = np.zeros(a.size)
    g = np.zeros(b.size)
    violation = np.inf
    for stage, reg in enumerate(schedule):
        r = reg * scale
        last = stage == len(schedule) - 1
        # Stopping the iteration early only loosens the certified gap;
        # feasibility of the returned plan comes from the rounding step,
        # so the loop tolerance is a quality knob rather than a contract.
        tol_here = max(marginal_tol, 1e-6) if last else 1e-5
        for it in range(20000):
            f = r * (loga - logsumexp((g[None, :] - cost) / r, axis=1))
            g = r * (logb - logsumexp((f[:, None] - cost) / r, axis=0))
            if it % 10 == 9 or it < 3:
                logp = (f[:, None] + g[None, :] - cost) / r
                p = np.exp(logp)
                violation = float(np.sum(np.abs(p.sum(axis=1) - a))
                                  + np.sum(np.abs(p.sum(axis=0) - b)))
                if violation <= tol_here:
                    break
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        raise EntropicError("Sinkhorn potentials diverged",
                            marginal_violation=violation)
    p = np.exp((f[:, None] + g[None, :] - cost) / (schedule[-1] * scale))
    p = _round_to_marginals(p, a, b)
    rounded_violation = float(max(np.max(np.abs(p.sum(axis=1) - a)),
                                  np.max(np.abs(p.sum(axis=0) - b))))
    if rounded_violation > marginal_tol:
        raise EntropicError(
            "rounded transport plan misses the marginal tolerance",
            marginal_violation=rounded_violation,
        )
    primal = float(np.sum(p * cost))
    # LP-feasible dual from the final potentials: tighten f rowwise
    u = np.min(cost - g[None, :], axis=1)
    dual = float(a @ u + b @ g)
    gap = max(primal - dual, 0.0)
    support = p > 1e-18
    ii, jj = np.nonzero(support)
    plan = _make_plan(mu, nu, ii, jj, p[support])
    total = plan.cost_p1 if order == 1 else plan.cost_p2
    if order == 1:
        value, lo = total, max(dual, 0.0)
        gap_value = value - lo
    else:
        value = float(np.sqrt(total))
        gap_value = value - float(np.sqrt(max(dual, 0.0)))
    return float(value), plan, float(gap_value)


def _round_to_marginals(p, a, b):
    """Project an approximate plan onto the exact marginals."""
    r = p.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sr = np.where(r > 0, np.minimum(a / r, 1.0), 0.0)
    p = p * sr[:, None]
    c = p.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sc = np.where(c > 0, np.minimum(b / c, 1.0), 0.0)
    p = p * sc[None, :]
    da = a - p.sum(axis=1)
    db = b - p.sum(axis=0)
    s = da.sum()
    if s > 0:
        p = p + np.outer(da, db) / s
    return p


# ---------------------------------------------------------------------------
# exact 1d circle transport
# ---------------------------------------------------------------------------


def circle_w1(x1, w1, x2, w2) -> float:
    """Exact order-1 transport distance between atomic measures on the
    unit circle.

    Classical quantile formula: with F the difference of the two CDFs
    from the box edge, W1 = min_t int |F(s) - t| ds, the minimizer
    being a length-weighted median of F.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    pos = np.concatenate([x1, x2])
    sgn = np.concatenate([w1, -w2])
    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    sgn = sgn[order]
    f_vals = np.cumsum(sgn)  # F on [pos_k, pos_{k+1})
    seg = np.diff(np.concatenate([pos, [pos[0] + 1.0]]))
    keep = seg > 0
    f_vals, seg = f_vals[keep], seg[keep]
    srt = np.argsort(f_vals)
    f_sorted = f_vals[srt]
    l_sorted = seg[srt]
    csum = np.cumsum(l_sorted)
    half = 0.5 * csum[-1]
    median = f_sorted[int(np.searchsorted(csum, half))]
    return float(np.sum(seg * np.abs(f_vals - median)))


# ---------------------------------------------------------------------------
# cross-order inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WpReport:
    w1: float
    w2: float
    c_k: float
    k: float
    first_rhs: float       # sqrt(2) W2
    second_rhs: float      # 3 (1+2C_k)^{1/(k-1)} W1^{(k-2)/(k-1)}
    first_verdict: bool    # W1 <= sqrt(2) W2
    second_verdict: bool   # W2 <= second_rhs


def verify_wp_inequalities(mu: ParticleEnsemble, nu: ParticleEnsemble,
                           k: float = 4.0) -> WpReport:
    """Cross-order Wasserstein comparisons with explicit constants.

    Uses C_k = max of the two bare k-th velocity moments; both
    inequalities are constant-free given the data, so the verdicts get
    only a roundoff-level slack.
    """
    if not k > 2:
        raise InvariantError(f"cross-order comparison needs k > 2, got {k}")
    c_k = max(bare_moment(mu, k), bare_moment(nu, k))
    if not np.isfinite(c_k) or c_k > 1e300:
        raise InvariantError("velocity moment diverges; cannot compare orders")
    w1, _ = wasserstein(mu, nu, order=1, method="exact")
    w2, _ = wasserstein(mu, nu, order=2, method="exact")
    first_rhs = np.sqrt(2.0) * w2
    second_rhs = 3.0 * (1.0 + 2.0 * c_k) ** (1.0 / (k - 1.0)) * w1 ** ((k - 2.0) / (k - 1.0))
    return WpReport(
        w1=w1, w2=w2, c_k=c_k, k=float(k),
        first_rhs=float(first_rhs), second_rhs=float(second_rhs),
        first_verdict=bool(w1 <= first_rhs * (1.0 + 1e-12)),
        second_verdict=bool(w2 <= second_rhs * (1.0 + 1e-12)),
    )


# ---------------------------------------------------------------------------
# kinetic distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KineticDistanceState:
    D: float
    lam: float
    position_part: float
    velocity_part: float
    residual: float
    pi0: TransportPlan | None = None


def solve_kinetic_distance(position_part: float, velocity_part: float,
                           epsilon: float, tol: float = 1e-12,
                           max_iter: int = 600):
    """Root of G(D) = eps^-2 |log D| P + V - D on (0, 1).

    G is strictly decreasing, so bisection from the sign change is
    safe; the root is unique.  Returns (D, residual).
    """
    inv_eps2 = epsilon**-2
    p, v = float(position_part), float(velocity_part)
    if p < 0 or v < 0:
        raise InvariantError("transport integrals must be nonnegative")
    if p == 0.0:
        d = min(v, np.nextafter(1.0, 0.0))
        return d, 0.0 if v < 1.0 else v - d

    def g(d):
        return inv_eps2 * (-np.log(d)) * p + v - d

    lo, hi = 1e-300, 1.0 - 1e-16
    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0.0 > g_hi):
        raise RootBracketError(
            "kinetic distance equation has no root in (0, 1)",
            lo=lo, hi=hi, g_lo=g_lo, g_hi=g_hi,
        )
    d = 0.5 * (lo + hi)
    for _ in range(max_iter):
        gd = g(d)
        if abs(gd) <= tol:
            break
        if gd > 0.0:
            lo = d
        else:
            hi = d
        d = 0.5 * (lo + hi)
    gd = g(d)
    if abs(gd) > tol:
        raise RootBracketError(
            f"bisection residual {abs(gd):g} above tolerance {tol:g}",
            lo=lo, hi=hi, g_lo=g(lo), g_hi=g(hi),
        )
    return float(d), float(abs(gd))


def kinetic_distance(traj1: "TrajectorySet", traj2: "TrajectorySet",
                     pi0: TransportPlan, epsilon: float, t: float) -> KineticDistanceState:
    """Kinetic transport functional at time t under the frozen initial
    coupling pi0."""
    x1 = traj1.torus_positions_at(t)
    x2 = traj2.torus_positions_at(t)
    v1 = traj1.velocities_at(t)
    v2 = traj2.velocities_at(t)
    ii, jj, mass = pi0.i, pi0.j, pi0.mass
    dx2 = np.zeros(mass.size)
    dv2 = np.zeros(mass.size)
    for ax in range(x1.shape[1]):
        dd = torus_displacement(x1[ii, ax], x2[jj, ax])
        dx2 += dd**2
        dv2 += (v1[ii, ax] - v2[jj, ax]) ** 2
    p = 0.5 * float(np.sum(mass * dx2))
    v = 0.5 * float(np.sum(mass * dv2))
    d, residual = solve_kinetic_distance(p, v, epsilon)
    lam = epsilon**-2 * abs(np.log(d)) if d > 0 else float("inf")
    if d == 0.0:
        lam = 0.0
    return KineticDistanceState(D=d, lam=float(lam), position_part=p,
                                velocity_part=v, residual=residual, pi0=pi0)


# ---------------------------------------------------------------------------
# run-level monitors
# ---------------------------------------------------------------------------


def envelope_terms(w2_initial: float, epsilon: float, c_d: float, int_a: float):
    """Pieces of the order-2 stability envelope exponent.

    base = sqrt(|log(eps^-2 W0^2 |log(eps^-2 W0^2 / 2)|)|),
    subtrahend = (c_d/eps) * int_a; the envelope is
    2 exp(-(base - subtrahend)^2).
    """
    z = epsilon**-2 * w2_initial**2
    inner = z * abs(np.log(0.5 * z)) if z > 0 else 0.0
    base = np.sqrt(abs(np.log(inner))) if inner > 0 else float("inf")
    subtrahend = (c_d / epsilon) * int_a
    return float(base), float(subtrahend)


def envelope_value(w2_initial: float, epsilon: float, c_d: float, int_a: float) -> float:
    base, sub = envelope_terms(w2_initial, epsilon, c_d, int_a)
    if not np.isfinite(base):
        return 0.0
    return float(2.0 * np.exp(-((base - sub) ** 2)))


def _matched_times(rec1: "RunRecord", rec2: "RunRecord"):
    t1 = np.array([c.time for c in rec1.checkpoints])
    t2 = np.array([c.time for c in rec2.checkpoints])
    if t1.size != t2.size or np.max(np.abs(t1 - t2)) > 1e-12:
        raise InvariantError("run checkpoints do not line up in time")
    return t1


def _snapshot_distance(rec1, rec2, idx, order, method, n_sub, seed=0):
    f1 = rec1.snapshots[idx]
    f2 = rec2.snapshots[idx]
    if f1 is None or f2 is None:
        raise TrajectoryRangeError(f"no stored snapshot at checkpoint {idx}")
    f1s, f2s = subsample_pair(f1, f2, n_sub, seed=seed)
    if method == "exact":
        value, _ = wasserstein(f1s, f2s, order=order, method="exact")
        return value
    value, _, _gap = wasserstein(f1s, f2s, order=order, method="entropic")
    return value


def subsample_pair(f1: ParticleEnsemble, f2: ParticleEnsemble, n_sub: int,
                   seed: int = 0):
    """Common-index subsample of two equal-size ensembles (falls back to
    independent subsampling when sizes differ).

    Matched indices keep the subsampling error strongly correlated
    between the two measures, which is what makes small inter-run
    distances measurable at all.
    """
    rng = np.random.default_rng(seed)

    def pick(f, idx):
        w = np.full(idx.size, 1.0 / idx.size)
        return ParticleEnsemble(positions=f.positions[idx],
                                velocities=f.velocities[idx],
                                weights=w, epsilon=f.epsilon, time=f.time)

    if f1.n == f2.n:
        if f1.n <= n_sub:
            idx = np.arange(f1.n)
        else:
            idx = rng.choice(f1.n, size=n_sub, replace=False)
        return pick(f1, idx), pick(f2, idx)
    idx1 = rng.choice(f1.n, size=min(n_sub, f1.n), replace=False)
    idx2 = rng.choice(f2.n, size=min(n_sub, f2.n), replace=False)
    return pick(f1, idx1), pick(f2, idx2)


@dataclass(frozen=True)
class EnvelopeReport:
    times: np.ndarray
    measured: np.ndarray       # W2 per checkpoint
    envelope: np.ndarray       # fitted envelope on W2^2, sqrt'ed for comparison
    int_a: np.ndarray
    fitted_c: float
    verdicts: np.ndarray
    epsilon: float


def stability_monitor_2d(run1: "RunRecord", run2: "RunRecord",
                         epsilon: float, order_method: str = "entropic",
                         n_sub: int = 600) -> EnvelopeReport:
    """Order-2 stability envelope for a pair of 2d runs.

    A(t) sums both densities' sup norms.  The dimensional constant is
    fitted at the first checkpoint where the measured distance moved by
    more than 1% from its initial value; verdicts are reported, never
    asserted absolutely.
    """
    if run1.d != 2 or run2.d != 2:
        raise DimensionError("order-2 monitor expects 2d runs",
                             expected=2, got=(run1.d, run2.d))
    times = _matched_times(run1, run2)
    a_series = np.array([c1.rho_sup + c2.rho_sup
                         for c1, c2 in zip(run1.checkpoints, run2.checkpoints)])
    int_a = np.concatenate([[0.0], np.cumsum(
        0.5 * (a_series[1:] + a_series[:-1]) * np.diff(times))])
    measured = np.array([
        _snapshot_distance(run1, run2, idx, 2, order_method, n_sub)
        for idx in range(times.size)
    ])
    w20 = measured[0]
    fit_idx = None
    for idx in range(1, times.size):
        if abs(measured[idx] - w20) > 0.01 * max(w20, 1e-300):
            fit_idx = idx
            break
    if fit_idx is None:
        fit_idx = times.size - 1
    c_d = 0.0
    m_fit = measured[fit_idx]
    if m_fit > 0 and int_a[fit_idx] > 0:
        room = 2.0 / m_fit**2
        if room > 1.0:
            base, _ = envelope_terms(w20, epsilon, 0.0, 0.0)
            s_req = base - np.sqrt(np.log(room))
            c_d = max(0.0, float(s_req) * epsilon / int_a[fit_idx])
    env = np.array([envelope_value(w20, epsilon, c_d, ia) for ia in int_a])
    verdicts = measured**2 <= env * (1.0 + 1e-9)
    return EnvelopeReport(times=times, measured=measured, envelope=np.sqrt(env),
                          int_a=int_a, fitted_c=float(c_d),
                          verdicts=verdicts, epsilon=float(epsilon))


@dataclass(frozen=True)
class WeakStrongReport:
    times: np.ndarray
    measured: np.ndarray     # W1(f, g) per checkpoint
    rhs: np.ndarray          # eps^-2 exp(C int (A + eps^-2)) W1(0)
    int_a: np.ndarray        # int_0^t (A(s) + eps^-2) ds
    fitted_c: float
    verdicts: np.ndarray
    w1_initial: float
    epsilon: float


def weak_strong_bound_1d(run_f: "RunRecord", run_g: "RunRecord", epsilon: float,
                         n_sub: int = 1000, slack: float = 1e-9,
                         seed: int = 0) -> WeakStrongReport:
    """Order-1 weak-strong envelope for a pair of 1d runs.

    A(t) is the strong run's density sup norm only (run_g).  A single
    rate constant is fitted at the second checkpoint, clamped at zero,
    and the envelope is then checked at every checkpoint.
    """
    if run_f.d != 1 or run_g.d != 1:
        raise DimensionError("weak-strong bound is 1d only",
                             expected=1, got=(run_f.d, run_g.d))
    times = _matched_times(run_f, run_g)
    a_series = np.array([c.rho_sup for c in run_g.checkpoints])
    integrand = a_series + epsilon**-2
    int_a = np.concatenate([[0.0], np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times))])
    measured = np.array([
        _snapshot_distance(run_f, run_g, idx, 1, "exact", n_sub, seed=seed)
        for idx in range(times.size)
    ])
    w10 = measured[0]
    c = 0.0
    if times.size > 1 and w10 > 0 and int_a[1] > 0:
        c = max(0.0, float(np.log(measured[1] / (epsilon**-2 * w10)) / int_a[1]))
    rhs = epsilon**-2 * np.exp(c * int_a) * w10
    verdicts = measured <= rhs * (1.0 + slack)
    return WeakStrongReport(times=times, measured=measured, rhs=rhs, int_a=int_a,
                            fitted_c=float(c), verdicts=verdicts,
                            w1_initial=float(w10), epsilon=float(epsilon))


__all__ = [
    "TransportPlan", "KineticDistanceState", "EnvelopeReport", "WeakStrongReport",
    "WpReport", "wasserstein", "circle_w1", "verify_wp_inequalities",
    "solve_kinetic_distance", "kinetic_distance", "stability_monitor_2d",
    "weak_strong_bound_1d", "envelope_terms", "envelope_value", "subsample_pair",
    "EXACT_PAIR_LIMIT",
]
