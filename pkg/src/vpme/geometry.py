"""Torus arithmetic on the unit box [-1/2, 1/2)^d.

Positions are canonical representatives in the left-closed box; -0.5 is
canonical, +0.5 is not.  Lifted coordinates are unconstrained reals that
keep track of winding, so trajectories can be differentiated without
jump artifacts.  The torus metric is

    |x|_T = min over integer shifts alpha of |x + alpha|   (Euclidean).

All functions are vectorized over leading axes; the last axis is the
spatial dimension d.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NonFiniteError


def wrap(p):
    """Split lifted coordinates into (canonical point, integer winding).

    p = canonical + winding holds exactly, componentwise.
    """
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise NonFiniteError("cannot wrap non-finite coordinates")
    winding = np.floor(p + 0.5)
    return p - winding, winding.astype(np.int64)


def wrap_coords(p):
    """Canonical representative in [-1/2, 1/2), winding discarded."""
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise NonFiniteError("cannot wrap non-finite coordinates")
    return p - np.floor(p + 0.5)


def torus_displacement(a, b):
    """Minimal representative of a - b, each component in [-1/2, 1/2)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NonFiniteError("cannot compare non-finite coordinates")
    la = a.shape[-1] if a.ndim else 1
    lb = b.shape[-1] if b.ndim else 1
    if la != lb and 1 not in (la, lb):
        raise DimensionError(
            "displacement operands disagree in dimension",
            expected=la, got=lb,
        )
    d = a - b
    return d - np.floor(d + 0.5)


def torus_distance(a, b):
    """Distance on the torus: min over integer shifts of |a - b + alpha|.

    For points already in the canonical box the minimizing shift has
    components in {-1, 0, 1}, which the componentwise wrap realizes.
    """
    disp = torus_displacement(a, b)
    return np.sqrt(np.sum(disp * disp, axis=-1))


def project_lifted(lifted):
    """Canonical torus positions of an array of lifted positions."""
    return wrap_coords(lifted)
