"""Nonlinear Poisson-Boltzmann field solver on the periodic box.

The electrostatic potential solves

    eps^2 Lap U = e^U - rho,        E = -grad U,

with rho a probability density on [-1/2, 1/2)^d.  The solve is a damped
Newton iteration: the linearization eps^2 Lap - diag(e^U) is symmetric
negative definite, so each Newton system is handled by conjugate
gradients on its negation with a constant-coefficient spectral
preconditioner.  Warm start is U0 = log(max(rho, floor)), the formal
small-eps asymptote.

In one dimension the potential splits as U = Ubar + Uhat where

    -eps^2 Ubar'' = rho - 1,  int Ubar = 0,      eps^2 Uhat'' = e^U - 1.

Ubar absorbs the (possibly atomic) density through the explicit kernel
G1(x) = (x^2 - |x|)/2, and Uhat stays Lipschitz-differentiable no
matter how rough rho is.  Note the smooth-part sign: differencing the
full equation against the Ubar equation forces eps^2 Uhat'' = e^U - 1,
which also matches the representation Uhat' = eps^-2 G1' * (1 - e^U).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    InvariantError,
    SolverError,
)
from .geometry import torus_displacement
from .measures import GridDensity, ParticleEnsemble

COMPAT_TOL = 1e-8  # | int e^U - int rho | after a successful solve
_EXP_CLIP = 700.0  # keep exp() finite; rejected line-search steps may exceed


# ---------------------------------------------------------------------------
# spectral helpers
# ---------------------------------------------------------------------------


def _mode_numbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def _laplacian_symbol(shape) -> np.ndarray:
    """Eigenvalues of the Laplacian, -|2 pi k|^2, on the given grid."""
    if len(shape) == 1:
        k = _mode_numbers(shape[0])
        return -((2.0 * np.pi * k) ** 2)
    k0 = _mode_numbers(shape[0])
    k1 = _mode_numbers(shape[1])
    return -(2.0 * np.pi) ** 2 * (k0[:, None] ** 2 + k1[None, :] ** 2)


def spectral_laplacian(u: np.ndarray) -> np.ndarray:
    return np.real(np.fft.ifftn(_laplacian_symbol(u.shape) * np.fft.fftn(u)))


def spectral_gradient(u: np.ndarray) -> np.ndarray:
    """Gradient by Fourier differentiation; component axis first."""
    uh = np.fft.fftn(u)
    if u.ndim == 1:
        k = 2.0 * np.pi * _mode_numbers(u.shape[0])
        return np.real(np.fft.ifftn(1j * k * uh))[None, :]
    k0 = 2.0 * np.pi * _mode_numbers(u.shape[0])
    k1 = 2.0 * np.pi * _mode_numbers(u.shape[1])
    gx = np.real(np.fft.ifftn(1j * k0[:, None] * uh))
    gy = np.real(np.fft.ifftn(1j * k1[None, :] * uh))
    return np.stack([gx, gy])


def h_minus_one_norm(g: np.ndarray) -> float:
    """|| grad Lap^-1 g ||_L2 for a mean-zero grid function g.

    By Parseval this is (sum_{k != 0} |c_k|^2 / |2 pi k|^2)^{1/2} in
    Fourier-coefficient normalization.
    """
    c = np.fft.fftn(g) / g.size
    sym = _laplacian_symbol(g.shape)  # -|2 pi k|^2
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.abs(c) ** 2 / (-sym)
    if g.ndim == 1:
        contrib[0] = 0.0
    else:
        contrib[0, 0] = 0.0
    return float(np.sqrt(np.sum(contrib)))


def grid_l2_norm(u: np.ndarray) -> float:
    """Rectangle-rule L^2 norm on the unit-volume box."""
    return float(np.sqrt(np.sum(u * u) / u.size))


# ---------------------------------------------------------------------------
# Newton solve
# ---------------------------------------------------------------------------


def _pcg(apply_a, apply_m, b, rtol=1e-12, max_iter=800):
    """Preconditioned conjugate gradients for SPD apply_a."""
    x = np.zeros_like(b)
    r = b.copy()
    z = apply_m(r)
    p = z.copy()
    rz = float(np.vdot(r, z).real)
    bnorm = float(np.linalg.norm(b.ravel()))
    if bnorm == 0.0:
        return x
    for _ in range(max_iter):
        ap = apply_a(p)
        alpha = rz / float(np.vdot(p, ap).real)
        x += alpha * p
        r -= alpha * ap
        if float(np.linalg.norm(r.ravel())) <= rtol * bnorm:
            break
        z = apply_m(r)
        rz_new = float(np.vdot(r, z).real)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x


def _newton_pb(rho_vals, epsilon, tol, offset=None, u0=None, max_iter=60):
    """Damped Newton for eps^2 Lap u = e^{offset + u} - rho_vals.

    Returns (u, residual history).  The accepted iterates have strictly
    decreasing residual inf-norms by construction of the backtracking.
    """
    eps2 = epsilon * epsilon
    sym = _laplacian_symbol(rho_vals.shape)
    if offset is None:
        offset = np.zeros_like(rho_vals)
    if u0 is None:
        u = np.log(np.maximum(rho_vals, 1e-8)) - offset
    else:
        u = u0.copy()

    def residual(uu):
        with np.errstate(over="ignore"):
            ex = np.exp(np.minimum(offset + uu, _EXP_CLIP))
        lap = np.real(np.fft.ifftn(sym * np.fft.fftn(uu)))
        return eps2 * lap - ex + rho_vals

    def roundoff_floor(uu):
        # attainable inf-norm residual in double precision: the spectral
        # Laplacian amplifies FFT roundoff by eps^2 |sym|_max |u|_max
        ex_sup = float(np.max(np.minimum(offset + uu, _EXP_CLIP)))
        return 16.0 * np.finfo(float).eps * (
            eps2 * float(np.max(np.abs(sym))) * float(np.max(np.abs(uu)))
            + np.exp(min(ex_sup, 40.0)) + float(np.max(np.abs(rho_vals))))

    f = residual(u)
    rnorm = float(np.max(np.abs(f)))
    history = [rnorm]
    for _ in range(max_iter):
        if rnorm <= tol:
            break
        w = np.exp(np.minimum(offset + u, _EXP_CLIP))
        wbar = float(np.mean(w))

        def apply_a(p):
            lap = np.real(np.fft.ifftn(sym * np.fft.fftn(p)))
            return -eps2 * lap + w * p

        def apply_m(r):
            return np.real(np.fft.ifftn(np.fft.fftn(r) / (-eps2 * sym + wbar)))

        delta = _pcg(apply_a, apply_m, f)
        alpha = 1.0
        accepted = False
        for _ in range(40):
            trial = u + alpha * delta
            ft = residual(trial)
            rt = float(np.max(np.abs(ft)))
            if rt < rnorm:
                u, f, rnorm = trial, ft, rt
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if rnorm <= roundoff_floor(u):
                break  # converged to the numerical floor at this resolution
            raise SolverError(
                "Newton line search stalled", residual=rnorm, iterations=len(history)
            )
        history.append(rnorm)
    if rnorm > max(tol, roundoff_floor(u)):
        raise SolverError(
            f"Newton did not reach tolerance {tol:g}",
            residual=rnorm, iterations=len(history),
        )
    return u, tuple(history)


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Solved electrostatic potential and field on the grid.

    E has the component axis first: shape (d,) + grid shape.
    """

    U: np.ndarray
    E: np.ndarray
    epsilon: float
    residual_norm: float
    newton_residuals: tuple = ()

    @property
    def d(self) -> int:
        return self.U.ndim

    @property
    def resolution(self) -> int:
        return self.U.shape[0]

    @property
    def electron_density(self) -> np.ndarray:
        return np.exp(self.U)


def solve_poisson_boltzmann(rho: GridDensity, epsilon: float, tol: float = 1e-12,
                            u0: np.ndarray | None = None) -> PotentialField:
    """Solve eps^2 Lap U = e^U - rho on the density's grid."""
    if not (0.0 < epsilon <= 1.0):
        raise InvariantError(f"epsilon must lie in (0, 1], got {epsilon}")
    if tol < 1e-12:
        raise InvariantError(f"tolerance below 1e-12 is not supported, got {tol}")
    if abs(rho.mass - 1.0) > 1e-10:
        raise InvariantError(f"field solve requires unit mass, got {rho.mass}")
    u, history = _newton_pb(rho.values, epsilon, tol, u0=u0)
    compat = abs(float(np.mean(np.exp(u))) - rho.mass)
    if compat > COMPAT_TOL:
        raise SolverError(
            f"integral compatibility violated: |int e^U - int rho| = {compat:g}",
            residual=history[-1], iterations=len(history),
        )
    e_field = -spectral_gradient(u)
    return PotentialField(
        U=u, E=e_field, epsilon=float(epsilon),
        residual_norm=history[-1], newton_residuals=history,
    )


# ---------------------------------------------------------------------------
# 1d splitting
# ---------------------------------------------------------------------------


def green_1d(x):
    """Green function of -d^2/dx^2 on the unit circle: (x^2 - |x|)/2,
    evaluated at the canonical representative."""
    y = np.asarray(x, dtype=float)
    y = y - np.floor(y + 0.5)
    return 0.5 * (y * y - np.abs(y))


def green_1d_prime(x):
    """Derivative of G1 with the symmetric convention G1'(0) = 0."""
    y = np.asarray(x, dtype=float)
    y = y - np.floor(y + 0.5)
    return y - 0.5 * np.sign(y)


GREEN_1D_MEAN = -1.0 / 12.0  # int G1 over the unit cell


@dataclass(frozen=True, eq=False)
class FieldSplit1D:
    """1d field splitting U = Ubar + Uhat on a uniform grid.

    Ubar carries the rough Poisson part (-eps^2 Ubar'' = rho - 1, zero
    mean), Uhat the smooth Boltzmann correction (eps^2 Uhat'' = e^U - 1).
    E components are the negative derivatives.
    """

    U_bar: np.ndarray
    U_hat: np.ndarray
    E_bar: np.ndarray
    E_hat: np.ndarray
    epsilon: float
    residual_bar: float
    residual_hat: float
    uhat_prime_lipschitz: float

    @property
    def resolution(self) -> int:
        return self.U_bar.shape[0]

    @property
    def U(self) -> np.ndarray:
        return self.U_bar + self.U_hat

    @property
    def E(self) -> np.ndarray:
        return self.E_bar + self.E_hat


def _grid_1d(n: int) -> np.ndarray:
    return -0.5 + np.arange(n) / n


def split_field_1d(rho, epsilon: float, tol: float = 1e-12,
                   resolution: int = 2048) -> FieldSplit1D:
    """Compute the 1d splitting for a grid density or a particle measure.

    For particle input the singular part is assembled by direct kernel
    evaluation at the grid nodes, so no deposition error enters Ubar.
    """
    if not (0.0 < epsilon <= 1.0):
        raise InvariantError(f"epsilon must lie in (0, 1], got {epsilon}")
    eps2 = epsilon * epsilon
    if isinstance(rho, ParticleEnsemble):
        if rho.d != 1:
            raise DimensionError("1d splitting requires d=1", expected=1, got=rho.d)
        n = int(resolution)
        xg = _grid_1d(n)
        u_bar = np.zeros(n)
        e_bar = np.zeros(n)
        chunk = max(1, int(4e6) // n)
        for lo in range(0, rho.n, chunk):
            xs = rho.positions[lo:lo + chunk, 0]
            ws = rho.weights[lo:lo + chunk]
            diff = xg[:, None] - xs[None, :]
            u_bar += (green_1d(diff) @ ws)
            e_bar += -(green_1d_prime(diff) @ ws)
        u_bar = (u_bar - GREEN_1D_MEAN * 1.0) / eps2  # shift to zero mean
        e_bar /= eps2
        residual_bar = float("nan")  # atomic rho: the ODE residual is not a grid object
    elif isinstance(rho, GridDensity):
        if rho.d != 1:
            raise DimensionError("1d splitting requires d=1", expected=1, got=rho.d)
        n = rho.resolution
        sym = _laplacian_symbol((n,))
        rhs = np.fft.fft(rho.values - rho.mean)
        with np.errstate(divide="ignore", invalid="ignore"):
            ub_hat = rhs / (-sym * eps2)
        ub_hat[0] = 0.0
        u_bar = np.real(np.fft.ifft(ub_hat))
        e_bar = -spectral_gradient(u_bar)[0]
        residual_bar = float(
            np.max(np.abs(-eps2 * spectral_laplacian(u_bar) - (rho.values - 1.0)))
        )
    else:
        raise InvariantError(f"unsupported density type {type(rho).__name__}")

    ones = np.ones_like(u_bar)
    u_hat, hist = _newton_pb(ones, epsilon, tol, offset=u_bar, u0=np.zeros_like(u_bar))
    e_hat = -spectral_gradient(u_hat)[0]
    # Lipschitz constant of Uhat' measured as the sup of |Uhat''| =
    # eps^-2 |e^U - 1|, evaluated pointwise (no differentiation noise).
    lip = float(np.max(np.abs(np.exp(u_bar + u_hat) - 1.0))) / eps2
    return FieldSplit1D(
        U_bar=u_bar, U_hat=u_hat, E_bar=e_bar, E_hat=e_hat,
        epsilon=float(epsilon), residual_bar=residual_bar,
        residual_hat=hist[-1], uhat_prime_lipschitz=lip,
    )


# ---------------------------------------------------------------------------
# verification reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LpBoundReport:
    p: float
    electron_norm: float
    density_norm: float
    verdict: bool
    slack: float


def verify_lp_bound(rho: GridDensity, U: PotentialField, p) -> LpBoundReport:
    """Check || e^U ||_p <= || rho ||_p for a solved field."""
    pp = np.inf if p in (np.inf, "inf") else float(p)
    electron = GridDensity(values=np.exp(U.U), mass=float(np.mean(np.exp(U.U))))
    lhs = electron.lp_norm(pp)
    rhs = rho.lp_norm(pp)
    verdict = lhs <= rhs * (1.0 + 1e-8)
    slack = rhs / lhs - 1.0 if lhs > 0 else float("inf")
    return LpBoundReport(p=float(pp) if pp != np.inf else np.inf,
                         electron_norm=lhs, density_norm=rhs,
                         verdict=bool(verdict), slack=slack)


def quantize_density(rho: GridDensity, n_points: int, epsilon: float = 1.0) -> ParticleEnsemble:
    """Deterministic n-point quantization of a grid density.

    Systematic sampling: the flattened-cell CDF is inverted at the
    quantiles (i + 1/2)/n, with sub-cell placement along the fast axis.
    Applying the identical procedure to two nearby densities yields
    strongly correlated point clouds, so their mutual W2 tracks the
    true W2 far better than independent sampling would.
    """
    n = int(n_points)
    vals = rho.values.ravel()
    masses = vals / vals.sum()
    cdf = np.cumsum(masses)
    u = (np.arange(n) + 0.5) / n
    cells = np.searchsorted(cdf, u, side="right")
    cells = np.minimum(cells, masses.size - 1)
    prev = np.where(cells > 0, cdf[cells - 1], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(masses[cells] > 0, (u - prev) / masses[cells], 0.5)
    res = rho.resolution
    h = 1.0 / res
    if rho.d == 1:
        x = -0.5 + cells * h + (frac - 0.5) * h
        pos = x[:, None]
    else:
        rows, cols = np.divmod(cells, res)
        x0 = -0.5 + rows * h
        x1 = -0.5 + cols * h + (frac - 0.5) * h
        pos = np.stack([x0, x1], axis=1)
    pos = pos - np.floor(pos + 0.5)
    return ParticleEnsemble(
        positions=pos, velocities=np.zeros_like(pos),
        weights=np.full(n, 1.0 / n), epsilon=epsilon,
    )


@dataclass(frozen=True)
class FieldStabilityReport:
    lhs: float                 # || grad U1 - grad U2 ||_L2
    h_inv_norm: float          # || grad Lap^-1 (h1 - h2) ||_L2
    w2: float                  # quantized W2(h1, h2)
    max_sup_norm: float        # max_i || h_i ||_inf
    linear_verdict: bool       # lhs <= eps^-2 * h_inv_norm
    loeper_verdict: bool       # lhs <= eps^-2 * max_sup^(1/2) * w2
    epsilon: float


def verify_field_stability(rho1: GridDensity, rho2: GridDensity, epsilon: float,
                           tol: float = 1e-12, quantization_points: int = 200,
                           linear_slack: float = 1e-6,
                           loeper_slack: float = 1e-4) -> FieldStabilityReport:
    """Field stability under density perturbations.

    Two nested inequalities: the constant-free linear bound
    lhs <= eps^-2 ||grad Lap^-1 (h1-h2)||, and the transport bound
    lhs <= eps^-2 max||h_i||_inf^(1/2) W2(h1, h2).
    """
    if abs(rho1.mass - rho2.mass) > 1e-10:
        raise InvariantError(
            f"stability bound needs equal masses, got {rho1.mass} vs {rho2.mass}"
        )
    if rho1.values.shape != rho2.values.shape:
        raise DimensionError("density grids disagree",
                             expected=rho1.values.shape, got=rho2.values.shape)
    from .ot import wasserstein

    U1 = solve_poisson_boltzmann(rho1, epsilon, tol)
    U2 = solve_poisson_boltzmann(rho2, epsilon, tol)
    diff = U1.U - U2.U
    lhs = grid_l2_norm(np.sqrt(np.sum((spectral_gradient(diff)) ** 2, axis=0)))
    h_inv = h_minus_one_norm(rho1.values - rho2.values)
    q1 = quantize_density(rho1, quantization_points, epsilon)
    q2 = quantize_density(rho2, quantization_points, epsilon)
    w2, _ = wasserstein(q1, q2, order=2, method="exact")
    max_sup = max(rho1.lp_norm(np.inf), rho2.lp_norm(np.inf))
    inv_eps2 = epsilon**-2
    return FieldStabilityReport(
        lhs=lhs, h_inv_norm=h_inv, w2=w2, max_sup_norm=max_sup,
        linear_verdict=bool(lhs <= inv_eps2 * h_inv * (1.0 + linear_slack)),
        loeper_verdict=bool(lhs <= inv_eps2 * np.sqrt(max_sup) * w2 * (1.0 + loeper_slack)),
        epsilon=float(epsilon),
    )


@dataclass(frozen=True)
class RegularStabilityReport:
    lhs: float        # || Uhat1' - Uhat2' ||_L2
    w1: float         # spatial W1 of the two measures
    rhs: float        # eps^-3 W1 / 4
    verdict: bool
    epsilon: float


def verify_1d_regular_stability(f1: ParticleEnsemble, f2: ParticleEnsemble,
                                epsilon: float, tol: float = 1e-12,
                                resolution: int = 2048,
                                slack: float = 1e-8) -> RegularStabilityReport:
    """Smooth-part stability: || Uhat1' - Uhat2' ||_L2 <= eps^-3 W1 / 4.

    W1 of the spatial marginals is computed exactly on the circle.
    """
    if f1.d != 1 or f2.d != 1:
        raise DimensionError("regular stability bound is 1d only",
                             expected=1, got=(f1.d, f2.d))
    from .ot import circle_w1

    s1 = split_field_1d(f1, epsilon, tol, resolution)
    s2 = split_field_1d(f2, epsilon, tol, resolution)
    lhs = grid_l2_norm(s1.E_hat - s2.E_hat)  # |Uhat'| = |E_hat|
    w1 = circle_w1(f1.positions[:, 0], f1.weights, f2.positions[:, 0], f2.weights)
    rhs = 0.25 * epsilon**-3 * w1
    verdict = lhs <= rhs * (1.0 + slack) + 1e-15
    return RegularStabilityReport(lhs=lhs, w1=w1, rhs=rhs,
                                  verdict=bool(verdict), epsilon=float(epsilon))


@dataclass(frozen=True)
class LogLipschitzReport:
    modulus: float         # max over sampled pairs of the log-Lipschitz ratio
    fitted_constant: float # modulus / (||rho||_inf eps^-2); logged, never asserted
    n_pairs: int
    epsilon: float


def field_log_lipschitz_modulus(U: PotentialField, rho: GridDensity | None = None,
                                n_pairs: int = 4000, seed: int = 0) -> LogLipschitzReport:
    """Empirical log-Lipschitz modulus of the 2d field.

    Samples grid-node pairs and maximizes
    |E(x) - E(y)| / (r (1 + |log r|)) over r = |x - y|_T < 1.
    """
    if U.d != 2:
        raise DimensionError("log-Lipschitz modulus is measured in d=2",
                             expected=2, got=U.d)
    rng = np.random.default_rng(seed)
    n = U.resolution
    idx = rng.integers(0, n, size=(2, n_pairs, 2))
    h = 1.0 / n
    xa = -0.5 + idx[0] * h
    xb = -0.5 + idx[1] * h
    same = np.all(idx[0] == idx[1], axis=1)
    ea = U.E[:, idx[0][:, 0], idx[0][:, 1]]
    eb = U.E[:, idx[1][:, 0], idx[1][:, 1]]
    de = np.sqrt(np.sum((ea - eb) ** 2, axis=0))
    disp = torus_displacement(xa, xb)
    r = np.sqrt(np.sum(disp**2, axis=1))
    valid = ~same
    ratio = de[valid] / (r[valid] * (1.0 + np.abs(np.log(r[valid]))))
    modulus = float(np.max(ratio)) if ratio.size else 0.0
    if rho is not None:
        fitted = modulus / (rho.lp_norm(np.inf) * U.epsilon**-2)
    else:
        fitted = modulus * U.epsilon**2
    return LogLipschitzReport(modulus=modulus, fitted_constant=float(fitted),
                              n_pairs=int(n_pairs), epsilon=U.epsilon)
