"""Phase-space measures and their diagnostics.

Two representations are used throughout:

* ParticleEnsemble: weighted atoms (x_i, v_i, w_i) on T^d x R^d with
  total mass 1.  This is the dynamical object.
* GridDensity: a nonnegative density sampled at the nodes of a uniform
  periodic grid on [-1/2, 1/2)^d.  This is what the field solver eats.

Moments come in two flavours, which are deliberately kept apart:
``moment`` integrates (1 + |v|^k) f, so the order-0 moment of a unit
mass is exactly 2; ``bare_moment`` integrates |v|^k f.  Interpolation
estimates for ||rho||_Lp use the bare moment, growth bookkeeping over
time uses the shifted one.

The module also houses the analytic-norm diagnostic (a delta-weighted
l1 sum of spatial Fourier coefficients) and the Penrose spectral
stability functional for velocity profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    DimensionError,
    FieldMismatchError,
    InvariantError,
    NonFiniteError,
    ResolutionError,
)

if TYPE_CHECKING:  # pragma: no cover - annotation only
    from .field import PotentialField

MASS_TOL = 1e-12
GRID_MASS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """Weighted particle measure on T^d x R^d, total mass 1.

    positions: (N, d) canonical torus coordinates
    velocities: (N, d)
    weights: (N,), strictly positive, summing to 1 within 1e-12
    """

    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    epsilon: float
    time: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.ndim != 2 or v.ndim != 2 or w.ndim != 1:
            raise InvariantError("positions/velocities must be (N, d), weights (N,)")
        if x.shape != v.shape or x.shape[0] != w.shape[0]:
            raise InvariantError(
                f"array lengths disagree: x{x.shape} v{v.shape} w{w.shape}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise NonFiniteError("ensemble contains non-finite entries")
        if np.any(w <= 0.0):
            raise InvariantError("all particle weights must be positive")
        total = float(np.sum(w))
        if abs(total - 1.0) > MASS_TOL:
            raise InvariantError(f"total mass {total!r} deviates from 1 beyond 1e-12")
        if np.any(x < -0.5) or np.any(x >= 0.5):
            raise InvariantError("positions must be canonical in [-1/2, 1/2)")
        if not (self.epsilon > 0.0):
            raise InvariantError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Nonnegative density on the uniform periodic grid.

    values has shape (N,) for d=1 and (N, N) for d=2, nodes at
    x_j = -1/2 + j/N.  The rectangle rule sum(values) / N^d must equal
    the declared mass within 1e-10.
    """

    values: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim not in (1, 2):
            raise DimensionError("grid densities support d in {1, 2}", got=vals.ndim)
        if vals.ndim == 2 and vals.shape[0] != vals.shape[1]:
            raise InvariantError(f"2d grid must be square, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("grid density contains non-finite entries")
        if np.any(vals < -MASS_TOL):
            raise InvariantError("grid density has negative entries")
        vals = np.maximum(vals, 0.0)
        quad = float(np.sum(vals)) / vals.size
        if abs(quad - self.mass) > GRID_MASS_TOL:
            raise InvariantError(
                f"grid quadrature {quad!r} deviates from declared mass {self.mass!r}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def lp_norm(self, p) -> float:
        """L^p norm under the rectangle rule; p = inf gives the grid sup."""
        if p == np.inf or p == "inf":
            return float(np.max(np.abs(self.values)))
        p = float(p)
        return float((np.sum(np.abs(self.values) ** p) / self.values.size) ** (1.0 / p))


@dataclass(frozen=True)
class MomentReport:
    order: float
    value: float
    time: float


def _check_resolution(n: int) -> int:
    n = int(n)
    if n < 8 or (n & (n - 1)) != 0:
        raise ResolutionError(
            f"grid resolution must be a power of two >= 8, got {n}", resolution=n
        )
    return n


def deposit_density(f: ParticleEnsemble, resolution: int) -> GridDensity:
    """Cloud-in-cell deposition of the spatial marginal onto the grid.

    Each particle spreads linearly over the 2^d nearest nodes, so the
    deposition is linear in the weights and conserves mass exactly.
    """
    n = _check_resolution(resolution)
    x = f.positions
    w = f.weights
    if f.d == 1:
        s = (x[:, 0] + 0.5) * n
        j0 = np.floor(s).astype(np.int64)
        frac = s - j0
        j0 = j0 % n
        j1 = (j0 + 1) % n
        acc = np.bincount(j0, weights=w * (1.0 - frac), minlength=n)
        acc += np.bincount(j1, weights=w * frac, minlength=n)
        values = acc * n  # cell volume 1/n
    elif f.d == 2:
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
        acc = np.zeros(n * n)
        for ii, jj, ww in (
            (i0, j0, w * (1.0 - fx) * (1.0 - fy)),
            (i1, j0, w * fx * (1.0 - fy)),
            (i0, j1, w * (1.0 - fx) * fy),
            (i1, j1, w * fx * fy),
        ):
            acc += np.bincount(ii * n + jj, weights=ww, minlength=n * n)
        values = acc.reshape(n, n) * n * n
    else:
        raise DimensionError("deposition supports d in {1, 2}", got=f.d)
    return GridDensity(values=values, mass=1.0)


def moment(f: ParticleEnsemble, k: float) -> MomentReport:
    """Weighted integral of (1 + |v|^k); order 0 gives exactly 2."""
    if k < 0:
        raise InvariantError(f"moment order must be nonnegative, got {k}")
    speed = np.sqrt(np.sum(f.velocities**2, axis=1))
    value = float(np.sum(f.weights * (1.0 + speed**k)))
    if not np.isfinite(value):
        raise NonFiniteError(f"moment of order {k} is non-finite")
    return MomentReport(order=float(k), value=value, time=f.time)


def bare_moment(f: ParticleEnsemble, k: float) -> float:
    """Weighted integral of |v|^k, no additive 1."""
    if k < 0:
        raise InvariantError(f"moment order must be nonnegative, got {k}")
    speed = np.sqrt(np.sum(f.velocities**2, axis=1))
    value = float(np.sum(f.weights * speed**k))
    if not np.isfinite(value):
        raise NonFiniteError(f"bare moment of order {k} is non-finite")
    return value


@dataclass(frozen=True)
class EnergyReport:
    """Total energy and its three pieces.

    kinetic  = 1/2 int |v|^2 f
    field    = eps^2/2 int |grad U|^2
    electron = int U e^U
    """

    kinetic: float
    field: float
    electron: float

    @property
    def total(self) -> float:
        return self.kinetic + self.field + self.electron


def energy(f: ParticleEnsemble, U: "PotentialField") -> EnergyReport:
    """Energy of the coupled system for an ensemble and its solved field."""
    if abs(U.epsilon - f.epsilon) > 0.0:
        raise FieldMismatchError(
            f"field epsilon {U.epsilon} does not match ensemble epsilon {f.epsilon}"
        )
    kinetic = 0.5 * float(np.sum(f.weights * np.sum(f.velocities**2, axis=1)))
    # Dirichlet form of the trigonometric interpolant.  Evaluating
    # mean(|E|^2) on the nodes instead would drop the Nyquist mode and
    # break exact compatibility with the solved equation.
    from .field import spectral_laplacian

    field_term = 0.5 * U.epsilon**2 * float(np.mean(-U.U * spectral_laplacian(U.U)))
    electron = float(np.mean(U.U * np.exp(U.U)))
    return EnergyReport(kinetic=kinetic, field=field_term, electron=electron)


def analytic_norm(g, delta: float) -> float:
    """Weighted l1 norm of spatial Fourier coefficients.

    Computes sum over modes k of |c_k| * delta^|k| with |k| Euclidean,
    truncated at the grid Nyquist frequency.  delta must exceed 1; the
    norm is nondecreasing in delta and dominates |mean(g)|.  Accepts a
    GridDensity or a bare (n,) / (n, n) array.
    """
    if not delta > 1.0:
        raise InvariantError(f"analytic norm requires delta > 1, got {delta}")
    values = g.values if isinstance(g, GridDensity) else np.asarray(g, dtype=float)
    n = values.shape[0]
    coeffs = np.fft.fftn(values) / values.size
    freqs = np.fft.fftfreq(n, d=1.0 / n)  # integer mode numbers
    if values.ndim == 1:
        kmag = np.abs(freqs)
    else:
        kmag = np.sqrt(freqs[:, None] ** 2 + freqs[None, :] ** 2)
    return float(np.sum(np.abs(coeffs) * delta**kmag))


# ---------------------------------------------------------------------------
# Penrose spectral stability functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VelocityProfile:
    """A spatially homogeneous velocity distribution g(v) on a uniform
    1d grid, normalized to unit mass, decaying at the grid edges."""

    values: np.ndarray
    v_grid: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        grid = np.asarray(self.v_grid, dtype=float)
        if vals.ndim != 1 or grid.ndim != 1 or vals.shape != grid.shape:
            raise InvariantError("profile values and grid must be equal-length 1d arrays")
        dv = np.diff(grid)
        if not np.allclose(dv, dv[0], rtol=1e-12, atol=1e-12):
            raise InvariantError("velocity grid must be uniform")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "v_grid", grid)

    @property
    def dv(self) -> float:
        return float(self.v_grid[1] - self.v_grid[0])


def maxwellian_profile(sigma: float, v0: float = 0.0, half_width: float | None = None,
                       n: int = 512) -> VelocityProfile:
    if half_width is None:
        half_width = abs(v0) + 8.0 * sigma
    v = np.linspace(-half_width, half_width, n, endpoint=False)
    g = np.exp(-((v - v0) ** 2) / (2.0 * sigma**2)) / (sigma * np.sqrt(2.0 * np.pi))
    return VelocityProfile(values=g, v_grid=v)


def double_bump_profile(v_b: float, sigma: float, half_width: float | None = None,
                        n: int = 512) -> VelocityProfile:
    """Two symmetric counter-streaming Maxwellian beams at +-v_b."""
    if half_width is None:
        half_width = v_b + 8.0 * sigma
    v = np.linspace(-half_width, half_width, n, endpoint=False)
    g = 0.5 * (
        np.exp(-((v - v_b) ** 2) / (2.0 * sigma**2))
        + np.exp(-((v + v_b) ** 2) / (2.0 * sigma**2))
    ) / (sigma * np.sqrt(2.0 * np.pi))
    return VelocityProfile(values=g, v_grid=v)


def _profile_derivative(profile: VelocityProfile) -> np.ndarray:
    """Spectral derivative of g on its (periodically extended) grid."""
    n = profile.values.size
    period = n * profile.dv
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=profile.dv)
    gp = np.fft.ifft(1j * k * np.fft.fft(profile.values))
    del period
    return gp.real


def _fourier_of_derivative(profile: VelocityProfile, sigmas: np.ndarray) -> np.ndarray:
    """F[g'](sigma) = int g'(v) e^{-i sigma v} dv at arbitrary frequencies.

    The rectangle rule on a wide uniform grid is spectrally accurate for
    profiles that decay below roundoff at the edges.
    """
    gp = _profile_derivative(profile)
    phase = np.exp(-1j * np.outer(sigmas, profile.v_grid))
    return phase @ (gp * profile.dv)


def _s_quadrature(gamma_min: float, tau_max: float, xi: float, v_max: float,
                  tail: float = 1e-12):
    """Gauss-Legendre nodes/weights on [0, S] resolving e^{-i tau s} and
    the oscillation of F[g'](s xi).

    S starts from 40/gamma_min and is shortened where the Gaussian-type
    decay of the transform already puts the integrand below ``tail``.
    """
    s_cap = 40.0 / gamma_min
    rate = abs(tau_max) + abs(xi) * v_max
    nodes_per_unit = max(4.0, rate * 8.0 / (2.0 * np.pi))
    n_nodes = int(min(400_000, max(64, np.ceil(s_cap * nodes_per_unit))))
    # composite 10-point panels
    n_panels = max(8, n_nodes // 10)
    edges = np.linspace(0.0, s_cap, n_panels + 1)
    base_x, base_w = np.polynomial.legendre.leggauss(10)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    s = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
    w = (half[:, None] * base_w[None, :]).ravel()
    return s, w, s_cap


def _penrose_grid(profile: VelocityProfile, xi: float, gammas: np.ndarray,
                  taus: np.ndarray) -> np.ndarray:
    """Penrose functional on a (gamma, tau) grid at one spatial mode xi."""
    if xi == 0.0:
        raise InvariantError("Penrose functional undefined at xi = 0")
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(gammas <= 0.0):
        raise InvariantError("Penrose evaluation requires gamma > 0")
    v_max = float(np.max(np.abs(profile.v_grid)))
    s, w, _ = _s_quadrature(float(np.min(gammas)), float(np.max(np.abs(taus))), xi, v_max)
    ghat = _fourier_of_derivative(profile, s * xi)
    kernel = (1j * xi / (1.0 + xi * xi)) * ghat  # (i xi / (1+|xi|^2)) . F[grad_v g]
    # keep only nodes where the undamped integrand is above roundoff
    keep = np.abs(kernel) * w > 1e-17
    if np.any(keep):
        s, w, kernel = s[keep], w[keep], kernel[keep]
    decay = np.exp(-np.outer(gammas, s))
    out = np.empty((gammas.size, taus.size))
    for it, tau in enumerate(taus):
        osc = np.exp(-1j * tau * s)
        integral = decay @ (w * osc * kernel)
        out[:, it] = np.abs(1.0 - integral)
    return out


def penrose_functional(profile: VelocityProfile, xi: float, gamma: float,
                       tau: float) -> float:
    """Modulus of 1 - int_0^inf e^{-(gamma+i tau)s} (i xi/(1+xi^2)) F[g'](s xi) ds.

    A zero of this expression at some parameter point signals a growing
    mode; profiles whose sweep infimum stays well above zero are
    spectrally stable in the Penrose sense.
    """
    return float(_penrose_grid(profile, float(xi), np.array([gamma]), np.array([tau]))[0, 0])


@dataclass(frozen=True)
class PenroseSweep:
    infimum: float
    argmin: tuple  # (gamma, tau, xi)
    gammas: np.ndarray
    taus: np.ndarray
    xis: np.ndarray
    values: np.ndarray  # shape (n_xi, n_gamma, n_tau)


DEFAULT_PENROSE_GAMMAS = (0.05, 0.1, 0.2, 0.4)
DEFAULT_PENROSE_TAUS = tuple(np.linspace(-25.0, 25.0, 41))
DEFAULT_PENROSE_XIS = tuple(2.0 * np.pi * k for k in (1, 2, 3, 4))


def penrose_sweep(profile: VelocityProfile, gammas=DEFAULT_PENROSE_GAMMAS,
                  taus=DEFAULT_PENROSE_TAUS, xis=DEFAULT_PENROSE_XIS) -> PenroseSweep:
    """Infimum of the Penrose functional over a parameter grid."""
    gammas = np.asarray(gammas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    xis = np.asarray(xis, dtype=float)
    values = np.empty((xis.size, gammas.size, taus.size))
    for ix, xi in enumerate(xis):
        values[ix] = _penrose_grid(profile, float(xi), gammas, taus)
    flat = int(np.argmin(values))
    ix, ig, it = np.unravel_index(flat, values.shape)
    return PenroseSweep(
        infimum=float(values[ix, ig, it]),
        argmin=(float(gammas[ig]), float(taus[it]), float(xis[ix])),
        gammas=gammas, taus=taus, xis=xis, values=values,
    )
