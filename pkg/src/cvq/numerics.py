"""Deterministic numerical kernels shared by the whole package.

Bounded derivative-free minimization (grid-seeded Nelder-Mead with
restarts), bracketed root finding, Gauss-Hermite and composite Simpson
quadrature, and Hermitian matrix square roots.  Everything here is pure
and reproducible: no random number generator is ever consulted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize


class PrecisionWarning(UserWarning):
    """Raised when an adaptive rule did not reach its target accuracy."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for :func:`minimize_bounded`.

    grid_points: points per axis of the seeding grid.
    xtol, ftol: Nelder-Mead termination tolerances.
    max_iter: Nelder-Mead iteration cap.
    restarts: extra polish runs from a deterministically perturbed start.
    """

    grid_points: int = 21
    xtol: float = 1e-9
    ftol: float = 1e-12
    max_iter: int = 2000
    restarts: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.xtol <= 0 or self.ftol <= 0:
            raise ValueError("tolerances must be positive")


DEFAULT_CONFIG = OptimizerConfig()


def _nm_polish(f, x0, lo, hi, config):
    """Bounded Nelder-Mead starting from ``x0``; returns (x, fx)."""
    res = optimize.minimize(
        f,
        x0,
        method="Nelder-Mead",
        bounds=list(zip(lo, hi)),
        options={
            "xatol": config.xtol,
            "fatol": config.ftol,
            "maxiter": config.max_iter,
            "disp": False,
        },
    )
    return np.clip(res.x, lo, hi), float(res.fun)


def minimize_bounded(f, box, config: OptimizerConfig = DEFAULT_CONFIG):
    """Minimize ``f`` over a finite box, deterministically.

    A regular grid seeds a Nelder-Mead polish; the polish is restarted
    ``config.restarts`` times from deterministically perturbed simplices
    and the best point is kept.  NaN values of ``f`` abort with the
    offending location in the message.

    Parameters
    ----------
    f : callable accepting a 1-D array of length ``len(box)``
    box : sequence of (lo, hi) pairs, all finite

    Returns
    -------
    (x, fx) : minimizer and its value
    """
    box = [(float(a), float(b)) for a, b in box]
    lo = np.array([a for a, _ in box])
    hi = np.array([b for _, b in box])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("box must be finite")
    ndim = len(box)

    def fc(x):
        v = float(f(np.asarray(x, dtype=float)))
        if np.isnan(v):
            raise FloatingPointError(f"objective returned NaN at x={np.asarray(x)}")
        return v

    axes = [np.linspace(a, b, config.grid_points) for a, b in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.array([fc(p) for p in pts])
    order = np.argsort(vals, kind="stable")
    best_x, best_f = pts[order[0]].copy(), vals[order[0]]
    if np.ptp(vals) == 0.0:
        # constant objective: tie-break toward the box center
        center = (lo + hi) / 2.0
        return center, fc(center)

    span = hi - lo
    starts = [best_x]
    # deterministic perturbations toward the interior
    for r in range(config.restarts):
        shift = span * (0.07 + 0.05 * r) * (-1.0) ** np.arange(ndim)
        starts.append(np.clip(best_x + shift, lo, hi))
    for x0 in starts:
        x, fx = _nm_polish(fc, x0, lo, hi, config)
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def golden_min(f, a, b, tol=1e-9, max_iter=200):
    """Golden-section minimization of a unimodal scalar function."""
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc_, fd_ = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc_ < fd_:
            b, d, fd_ = d, c, fc_
            c = b - gr * (b - a)
            fc_ = f(c)
        else:
            a, c, fc_ = c, d, fd_
            d = a + gr * (b - a)
            fd_ = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def bisect_root(f, a, b, tol=1e-10, max_iter=200):
    """Find a root of ``f`` on [a, b] by bisection.

    Raises ValueError if f(a) and f(b) do not bracket a sign change.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise ValueError(f"no sign change on [{a}, {b}]: f(a)={fa}, f(b)={fb}")
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or (b - a) / 2 < tol:
            return m
        if fa * fm < 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def gauss_hermite_nodes(order):
    """Nodes/weights for integrals against exp(-t^2) on the real line."""
    return np.polynomial.hermite.hermgauss(order)


def gaussian_average(f, sigma, order=80, check=True, check_tol=1e-8):
    """Average of ``f(phi)`` against a zero-mean normal of std ``sigma``.

    Uses Gauss-Hermite quadrature of the given order; per the adaptive
    policy, the order is doubled once and a :class:`PrecisionWarning` is
    raised when the two estimates disagree beyond ``check_tol``.  The
    function ``f`` must accept numpy arrays.
    """
    if sigma == 0.0:
        return f(np.zeros(1))[0] if np.ndim(f(np.zeros(1))) else float(f(0.0))

    def estimate(n):
        t, w = gauss_hermite_nodes(n)
        return float(np.sum(w * f(np.sqrt(2.0) * sigma * t)) / np.sqrt(np.pi))

    val = estimate(order)
    if check:
        val2 = estimate(2 * order)
        if abs(val2 - val) > check_tol:
            warnings.warn(
                f"Gauss-Hermite order {order} not converged "
                f"(delta={abs(val2 - val):.2e})",
                PrecisionWarning,
            )
        return val2
    return val


def simpson_integral(f, a, b, n_points=2001, refine=True):
    """Composite Simpson integral of a vectorized function on [a, b].

    ``n_points`` must be odd.  With ``refine=True`` the step is halved
    once and the two estimates are Richardson-combined (Simpson error is
    O(h^4)); the refinement delta is available to callers via the second
    return value.

    Returns
    -------
    (value, error_estimate)
    """
    if n_points % 2 == 0:
        n_points += 1
    x = np.linspace(a, b, n_points)
    y = f(x)
    coarse = _simpson(y, x)
    if not refine:
        return coarse, np.nan
    x2 = np.linspace(a, b, 2 * n_points - 1)
    fine = _simpson(f(x2), x2)
    value = (16.0 * fine - coarse) / 15.0
    return value, abs(fine - coarse)


def _simpson(y, x):
    n = len(x) - 1
    h = (x[-1] - x[0]) / n
    s = y[0] + y[-1] + 4.0 * np.sum(y[1:-1:2]) + 2.0 * np.sum(y[2:-1:2])
    return s * h / 3.0


def hermitian_sqrt(rho, clip_tol=1e-10):
    """Square root of a Hermitian PSD matrix via eigendecomposition.

    Eigenvalues in [-clip_tol, 0) are clipped to zero; anything more
    negative raises.  Returns (sqrt_matrix, clipped_mass).
    """
    rho = np.asarray(rho)
    w, v = linalg.eigh(rho)
    if np.min(w) < -clip_tol:
        raise ValueError(f"matrix is not PSD: min eigenvalue {np.min(w):.3e}")
    clipped = float(-np.sum(w[w < 0.0]))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T, clipped
