"""Optimal transport: exact and entropic solvers, circle formula,
cross-order inequalities, and the kinetic-distance fixed point.

Independent oracles used here:

* Permutation brute force.  For equal weights the optimal plan is an
  assignment, so scanning all N! permutations (N <= 7) is exhaustive.
* Optimality certificate.  A feasible plan is optimal iff potentials
  u_i + v_j = c_ij exist on its support with u_i + v_j <= c_ij
  everywhere, allowing one additive constant per connected component of
  the support graph; existence of valid constants is a shortest-path
  feasibility problem solved by Bellman-Ford, and a negative cycle
  certifies suboptimality.
* Cut enumeration for the circle.  W1 on the circle equals the minimum
  over cut points of the line W1 of the unrolled measures; cutting at
  every atom is exhaustive.
* Bisection values for the kinetic-distance equation frozen from a
  50-digit computation (mpmath.findroot on D = eps^-2 |log D| P + V):
    eps=0.5, P=0.01, V=0.04  ->  D = 0.123621297543265966389441730855
    eps=1.0, P=0.25, V=0.10  ->  D = 0.35729698680554558278423342719
"""

import itertools
from collections import defaultdict, deque

import numpy as np
import pytest

from vpme.errors import InvariantError, RootBracketError, TransportSizeError
from vpme.geometry import torus_distance
from vpme.measures import ParticleEnsemble
from vpme.ot import (circle_w1, envelope_terms, envelope_value,
                     solve_kinetic_distance, subsample_pair,
                     verify_wp_inequalities, wasserstein)

from conftest import make_ensemble


# ---------------------------------------------------------------------------
# in-test oracles


def phase_cost(mu, nu, order):
    dx = np.zeros((mu.n, nu.n))
    dv = np.zeros((mu.n, nu.n))
    for a in range(mu.d):
        dx += (mu.positions[:, a:a + 1] - nu.positions[None, :, a]
               - np.round(mu.positions[:, a:a + 1] - nu.positions[None, :, a])) ** 2
        dv += (mu.velocities[:, a:a + 1] - nu.velocities[None, :, a]) ** 2
    if order == 1:
        return np.sqrt(dx) + np.sqrt(dv)
    return dx + dv


def brute_force_wp(mu, nu, order):
    """Exhaustive assignment scan; weights must be uniform 1/N."""
    cost = phase_cost(mu, nu, order)
    n = mu.n
    best = np.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, float(np.mean(cost[np.arange(n), perm])))
    return best if order == 1 else np.sqrt(best)


def assert_plan_optimal(cost, plan, tol=5e-9):
    """Complementary-slackness certificate for a feasible plan."""
    m, n = cost.shape
    adj_i = defaultdict(list)
    adj_j = defaultdict(list)
    for i, j in zip(plan.i, plan.j):
        adj_i[int(i)].append(int(j))
        adj_j[int(j)].append(int(i))
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    comp_i = np.full(m, -1)
    comp_j = np.full(n, -1)
    nc = 0
    for s in range(m):
        if comp_i[s] != -1:
            continue
        comp_i[s] = nc
        u[s] = 0.0
        queue = deque([("i", s)])
        while queue:
            side, k = queue.popleft()
            if side == "i":
                for j in adj_i[k]:
                    if comp_j[j] == -1:
                        comp_j[j] = nc
                        v[j] = cost[k, j] - u[k]
                        queue.append(("j", j))
            else:
                for i in adj_j[k]:
                    if comp_i[i] == -1:
                        comp_i[i] = nc
                        u[i] = cost[i, k] - v[k]
                        queue.append(("i", i))
        nc += 1
    for j in range(n):
        if comp_j[j] == -1:
            comp_j[j] = nc
            v[j] = 0.0
            nc += 1
    for i, j in zip(plan.i, plan.j):
        assert abs(u[i] + v[j] - cost[i, j]) <= tol, "support not tight"
    reduced = cost - u[:, None] - v[None, :]
    slack = np.full((nc, nc), np.inf)
    for i in range(m):
        for j in range(n):
            a, b = comp_i[i], comp_j[j]
            slack[a, b] = min(slack[a, b], reduced[i, j])
    # shift t per component with t_a <= t_b + slack[a, b]; a negative
    # cycle in these constraints certifies a cheaper plan exists
    t = np.zeros(nc)
    for sweep in range(nc + 1):
        changed = False
        for a in range(nc):
            for b in range(nc):
                if np.isfinite(slack[a, b]) and t[a] > t[b] + slack[a, b] + tol:
                    t[a] = t[b] + slack[a, b]
                    changed = True
        if not changed:
            return
    raise AssertionError("negative reduced-cost cycle: plan is not optimal")


def circle_w1_by_cuts(x1, w1, x2, w2):
    """Line quantile coupling, minimized over cuts at every atom."""
    best = np.inf
    for cut in np.concatenate([x1, x2]):
        a = np.sort((np.asarray(x1) - cut) % 1.0)
        b = np.sort((np.asarray(x2) - cut) % 1.0)
        ia = np.argsort((np.asarray(x1) - cut) % 1.0)
        ib = np.argsort((np.asarray(x2) - cut) % 1.0)
        wa = np.asarray(w1)[ia]
        wb = np.asarray(w2)[ib]
        # merge the two CDFs and integrate |F1 - F2|
        pts = np.concatenate([a, b])
        order = np.argsort(pts, kind="stable")
        jumps = np.concatenate([wa, -wb])[order]
        pts = pts[order]
        f_run = np.cumsum(jumps)[:-1]
        best = min(best, float(np.sum(np.abs(f_run) * np.diff(pts))))
    return best


def cold_ensemble(x, w=None, epsilon=1.0):
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    n = x.shape[0]
    w = np.full(n, 1.0 / n) if w is None else np.asarray(w, dtype=float)
    return ParticleEnsemble(positions=x, velocities=np.zeros_like(x),
                            weights=w, epsilon=epsilon)


# ---------------------------------------------------------------------------
# exact solver


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("order", [1, 2])
def test_exact_matches_permutation_brute_force(d, order):
    for seed in range(6):
        n = 2 + (seed % 6)
        mu = make_ensemble(n, d=d, seed=200 + seed, sigma=0.5)
        nu = make_ensemble(n, d=d, seed=300 + seed, sigma=0.5)
        value, plan = wasserstein(mu, nu, order=order, method="exact")
        oracle = brute_force_wp(mu, nu, order)
        assert value == pytest.approx(oracle, abs=1e-12)
        assert plan.marginal_error <= 1e-10


@pytest.mark.parametrize("order", [1, 2])
def test_exact_unequal_weights_is_certified_optimal(order):
    rng = np.random.default_rng(77)
    for trial in range(5):
        m, n = 5, 4
        wa = rng.dirichlet(np.ones(m))
        wb = rng.dirichlet(np.ones(n))
        mu = cold_ensemble(rng.uniform(-0.5, 0.5, m), wa)
        nu = cold_ensemble(rng.uniform(-0.5, 0.5, n), wb)
        mu = ParticleEnsemble(positions=mu.positions,
                              velocities=rng.normal(0, 0.5, (m, 1)),
                              weights=wa, epsilon=1.0)
        nu = ParticleEnsemble(positions=nu.positions,
                              velocities=rng.normal(0, 0.5, (n, 1)),
                              weights=wb, epsilon=1.0)
        value, plan = wasserstein(mu, nu, order=order, method="exact")
        assert plan.marginal_error <= 1e-10
        assert_plan_optimal(phase_cost(mu, nu, order), plan)
        total = float(np.sum(plan.mass * phase_cost(mu, nu, order)[plan.i, plan.j]))
        assert value == pytest.approx(total if order == 1 else np.sqrt(total),
                                      rel=1e-10)


def test_plan_cost_orders_are_cauchy_schwarz_consistent():
    mu = make_ensemble(30, d=2, seed=9)
    nu = make_ensemble(30, d=2, seed=10)
    _, plan = wasserstein(mu, nu, order=2)
    # cost_p1 sums dx + dv, cost_p2 sums dx^2 + dv^2; with unit total
    # mass, Cauchy-Schwarz and (dx+dv)^2 <= 2(dx^2+dv^2) give the bound
    assert plan.cost_p1 <= np.sqrt(2.0 * plan.cost_p2) + 1e-12


def test_identical_ensembles_have_zero_distance():
    mu = make_ensemble(25, d=2, seed=4)
    for order in (1, 2):
        value, _ = wasserstein(mu, mu, order=order)
        assert value <= 1e-12


def test_velocity_shift_translation_oracle():
    mu = make_ensemble(40, d=1, seed=15)
    eta = 0.37
    nu = ParticleEnsemble(positions=mu.positions,
                          velocities=mu.velocities + eta,
                          weights=mu.weights, epsilon=mu.epsilon)
    w1, _ = wasserstein(mu, nu, order=1)
    w2, _ = wasserstein(mu, nu, order=2)
    # identity coupling costs eta; the mean-velocity projection shows
    # nothing cheaper exists, so both orders give exactly eta
    assert w1 == pytest.approx(eta, abs=1e-12)
    assert w2 == pytest.approx(eta, abs=1e-12)


def test_spatial_translation_oracle():
    x = np.array([-0.45, -0.2, 0.05, 0.22, 0.41])
    s = 0.01
    mu = cold_ensemble(x)
    nu = cold_ensemble(x + s)
    w1, _ = wasserstein(mu, nu, order=1)
    assert w1 == pytest.approx(s, abs=1e-12)
    assert w1 == pytest.approx(brute_force_wp(mu, nu, 1), abs=1e-12)


def test_exact_solver_size_limit():
    mu = make_ensemble(2100, d=1, seed=1)
    nu = make_ensemble(2100, d=1, seed=2)
    with pytest.raises(TransportSizeError):
        wasserstein(mu, nu, order=2, method="exact")


def test_order_and_method_validation():
    mu = make_ensemble(5, seed=1)
    with pytest.raises(InvariantError):
        wasserstein(mu, mu, order=3)
    with pytest.raises(InvariantError):
        wasserstein(mu, mu, method="sliced")


# ---------------------------------------------------------------------------
# entropic solver


def test_entropic_value_within_certified_gap_of_exact():
    mu = make_ensemble(60, d=1, seed=21, sigma=0.4)
    nu = make_ensemble(60, d=1, seed=22, sigma=0.4)
    exact, _ = wasserstein(mu, nu, order=2, method="exact")
    value, plan, gap = wasserstein(mu, nu, order=2, method="entropic")
    assert plan.marginal_error <= 1e-8
    assert abs(value - exact) <= gap + 1e-9
    assert gap < 0.5 * max(exact, 1e-6)


def test_entropic_plan_is_feasible_after_rounding():
    mu = make_ensemble(35, d=2, seed=31, sigma=0.4)
    nu = make_ensemble(35, d=2, seed=32, sigma=0.4)
    _, plan, _ = wasserstein(mu, nu, order=1, method="entropic")
    row = np.bincount(plan.i, weights=plan.mass, minlength=mu.n)
    col = np.bincount(plan.j, weights=plan.mass, minlength=nu.n)
    assert np.max(np.abs(row - mu.weights)) <= 1e-8
    assert np.max(np.abs(col - nu.weights)) <= 1e-8


# ---------------------------------------------------------------------------
# circle W1


def test_circle_w1_wraps_around_the_seam():
    # going through the seam costs 0.2, across the middle 0.8
    assert circle_w1(np.array([-0.4]), np.array([1.0]),
                     np.array([0.4]), np.array([1.0])) == pytest.approx(0.2, abs=1e-14)


def test_circle_w1_matches_cut_enumeration():
    rng = np.random.default_rng(55)
    for trial in range(8):
        m, n = rng.integers(2, 7), rng.integers(2, 7)
        x1 = rng.uniform(-0.5, 0.5, m)
        x2 = rng.uniform(-0.5, 0.5, n)
        w1 = rng.dirichlet(np.ones(m))
        w2 = rng.dirichlet(np.ones(n))
        assert circle_w1(x1, w1, x2, w2) == pytest.approx(
            circle_w1_by_cuts(x1, w1, x2, w2), abs=1e-12)


def test_circle_w1_agrees_with_phase_space_solver_on_cold_data():
    rng = np.random.default_rng(66)
    x1 = rng.uniform(-0.5, 0.5, 6)
    x2 = rng.uniform(-0.5, 0.5, 6)
    mu, nu = cold_ensemble(x1), cold_ensemble(x2)
    value, _ = wasserstein(mu, nu, order=1)
    assert circle_w1(x1, mu.weights, x2, nu.weights) == pytest.approx(value, abs=1e-12)


def test_circle_w1_vanishes_on_equal_measures():
    x = np.array([0.0, 0.3, -0.2])
    w = np.array([0.5, 0.25, 0.25])
    assert circle_w1(x, w, x, w) == 0.0


# ---------------------------------------------------------------------------
# cross-order inequalities


def test_cross_order_inequalities_on_random_pairs():
    rng = np.random.default_rng(88)
    for trial in range(20):
        n = int(rng.integers(5, 60))
        mu = make_ensemble(n, d=1, seed=1000 + trial, sigma=0.6)
        nu = make_ensemble(n, d=1, seed=2000 + trial, sigma=0.6)
        report = verify_wp_inequalities(mu, nu, k=4.0)
        assert report.first_verdict, "W1 <= sqrt(2) W2 failed"
        assert report.second_verdict, "moment interpolation bound failed"
        assert report.w1 <= report.first_rhs * (1 + 1e-12)
        assert report.w2 <= report.second_rhs * (1 + 1e-12)


def test_cross_order_rejects_low_moment_order():
    mu = make_ensemble(10, seed=3)
    with pytest.raises(InvariantError):
        verify_wp_inequalities(mu, mu, k=2.0)


# ---------------------------------------------------------------------------
# kinetic distance fixed point


def test_kinetic_distance_frozen_oracle_values():
    d1, res1 = solve_kinetic_distance(0.01, 0.04, 0.5)
    assert d1 == pytest.approx(0.123621297543265966389441730855, abs=5e-12)
    assert res1 <= 1e-12
    d2, res2 = solve_kinetic_distance(0.25, 0.10, 1.0)
    assert d2 == pytest.approx(0.35729698680554558278423342719, abs=5e-12)
    assert res2 <= 1e-12


def test_kinetic_distance_zero_position_part_short_circuits():
    d, res = solve_kinetic_distance(0.0, 0.3, 0.5)
    assert d == 0.3
    assert res == 0.0


def test_kinetic_distance_monotone_in_both_parts():
    base, _ = solve_kinetic_distance(0.01, 0.04, 0.5)
    more_p, _ = solve_kinetic_distance(0.02, 0.04, 0.5)
    more_v, _ = solve_kinetic_distance(0.01, 0.08, 0.5)
    assert more_p > base
    assert more_v > base


def test_kinetic_distance_rejects_unreachable_root():
    with pytest.raises(RootBracketError):
        solve_kinetic_distance(0.01, 1.5, 0.5)
    with pytest.raises(InvariantError):
        solve_kinetic_distance(-0.01, 0.1, 0.5)


# ---------------------------------------------------------------------------
# stability envelope pieces


def test_envelope_value_range_and_limits():
    assert envelope_value(0.0, 0.5, 1.0, 0.0) == 0.0
    v = envelope_value(1e-4, 0.5, 1.0, 0.1)
    assert 0.0 < v <= 2.0


def test_envelope_monotone_in_drive_term():
    values = [envelope_value(1e-4, 0.5, 1.0, a) for a in (0.0, 0.1, 0.3, 0.6)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_envelope_terms_formula():
    w0, eps, c_d, int_a = 1e-3, 0.5, 2.0, 0.25
    base, sub = envelope_terms(w0, eps, c_d, int_a)
    z = eps**-2 * w0**2
    assert base == pytest.approx(np.sqrt(abs(np.log(z * abs(np.log(0.5 * z))))),
                                 rel=1e-12)
    assert sub == pytest.approx(c_d / eps * int_a, rel=1e-12)


# ---------------------------------------------------------------------------
# subsampling


def test_subsample_pair_uses_common_indices_for_equal_sizes():
    f1 = make_ensemble(500, d=1, seed=91)
    shift = 0.003
    f2 = ParticleEnsemble(positions=f1.positions,
                          velocities=f1.velocities + shift,
                          weights=f1.weights, epsilon=f1.epsilon)
    s1, s2 = subsample_pair(f1, f2, 50, seed=5)
    assert s1.n == s2.n == 50
    assert np.array_equal(s1.positions, s2.positions)
    assert np.allclose(s2.velocities - s1.velocities, shift)


def test_subsample_pair_returns_everything_when_small():
    f1 = make_ensemble(20, d=1, seed=92)
    f2 = make_ensemble(20, d=1, seed=93)
    s1, s2 = subsample_pair(f1, f2, 50)
    assert s1.n == 20 and s2.n == 20
    assert np.array_equal(s1.positions, f1.positions)
