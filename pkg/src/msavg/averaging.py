"""Cesaro time-averaging of coefficients and empirical rate-function tables.

The averaging hypotheses bound |(1/T)∫ b(s,x) ds - b_bar(x)|^2 and the
mean-square diffusion/driver gaps by kappa(T) * (1 + |x|^2) with kappa -> 0.
This module computes the finite-T averages by adaptive composite Simpson
quadrature and reports the max-over-probes surrogate kappa_hat.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, NumericError

_QUAD_RTOL = 1e-10
_MAX_DOUBLINGS = 16


def _simpson(fun, upper, n):
    """Composite Simpson on [0, upper] with n (even) intervals.

    fun(s) may return an array; the quadrature is applied elementwise.
    """
    s = np.linspace(0.0, upper, n + 1)
    vals = np.stack([np.asarray(fun(si), float) for si in s], axis=0)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return np.tensordot(w, vals, axes=(0, 0)) * (upper / (3.0 * n))


def adaptive_cesaro(fun, T_hat, n_quad=8):
    """(1/T_hat) * integral of fun over [0, T_hat], refined by doubling n_quad."""
    if not T_hat > 0:
        raise ConfigurationError(f"T_hat must be positive, got {T_hat}")
    if n_quad < 2:
        raise ConfigurationError(f"n_quad must be >= 2, got {n_quad}")
    n = int(n_quad) + (int(n_quad) % 2)
    prev = _simpson(fun, T_hat, n) / T_hat
    for _ in range(_MAX_DOUBLINGS):
        n *= 2
        cur = _simpson(fun, T_hat, n) / T_hat
        scale = 1.0 + np.max(np.abs(cur))
        if np.max(np.abs(cur - prev)) < _QUAD_RTOL * scale:
            return cur
        prev = cur
    raise NumericError(
        f"Cesaro quadrature did not converge to {_QUAD_RTOL:g} after {_MAX_DOUBLINGS} doublings"
    )


def cesaro_average_drift(b, x, T_hat, n_quad=8):
    """Finite-horizon time average of the drift at a single point x."""
    x_row = np.asarray(x, float).reshape(1, -1)
    return adaptive_cesaro(lambda s: b(s, x_row)[0], T_hat, n_quad)


def cesaro_average_diffusion_sq(sigma, sigma_bar, x, T_hat, n_quad=8):
    """(1/T) * integral of ||sigma(s,x) - sigma_bar(x)||_F^2 over [0, T]."""
    x_row = np.asarray(x, float).reshape(1, -1)
    sb = np.asarray(sigma_bar(x_row), float)[0]

    def integrand(s):
        d = np.asarray(sigma(s, x_row), float)[0] - sb
        return np.sum(d * d)

    return float(adaptive_cesaro(integrand, T_hat, n_quad))


def probe_grid(dim, radius, n_per_axis, cap=2000):
    """Uniform probe grid on [-radius, radius]^dim, capped in total size."""
    if not radius > 0:
        raise ConfigurationError(f"probe radius must be positive, got {radius}")
    n = int(n_per_axis)
    if dim > 2:
        while n > 3 and n**dim > cap:
            n -= 2
    axes = [np.linspace(-radius, radius, n) for _ in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class KappaEstimate:
    """Empirical surrogate for the averaging rate function, max over probes."""

    kind: str
    T_hats: np.ndarray
    kappa_hats: np.ndarray
    argmax_probes: np.ndarray = field(repr=False)
    probes: np.ndarray = field(repr=False)
    decreasing: bool


def _deviation_over_probes(kind, scenario, probes_x, probes_y, T_hat, n_quad):
    if kind == "drift":
        avg = adaptive_cesaro(lambda s: scenario.b(s, probes_x), T_hat, n_quad)
        dev = np.sum((avg - scenario.b_bar(probes_x)) ** 2, axis=1)
        norm = 1.0 + np.sum(probes_x**2, axis=1)
    elif kind == "diffusion":
        sb = scenario.sigma_bar(probes_x)

        def integrand(s):
            d = scenario.sigma(s, probes_x) - sb
            return np.sum(d * d, axis=(1, 2))

        dev = adaptive_cesaro(integrand, T_hat, n_quad)
        norm = 1.0 + np.sum(probes_x**2, axis=1)
    elif kind == "driver":
        avg = adaptive_cesaro(lambda s: scenario.f1(s, probes_x, probes_y), T_hat, n_quad)
        dev = np.sum((avg - scenario.f1_bar(probes_x, probes_y)) ** 2, axis=1)
        norm = 1.0 + np.sum(probes_x**2, axis=1) + np.sum(probes_y**2, axis=1)
    else:
        raise ConfigurationError(f"unknown kappa kind {kind!r}")
    return dev / norm


def estimate_kappa(kind, scenario, T_hats, radius=5.0, n_probe=41, n_quad=8):
    """Tabulate kappa_hat(T) = max over probes of deviation/(1+|probe|^2).

    This is an empirical surrogate on a compact probe set, not a proof of
    the global hypothesis.
    """
    T_hats = np.asarray(T_hats, float)
    if T_hats.size == 0:
        raise ConfigurationError("T_hat list must be non-empty")
    if not scenario.has_averaged():
        raise ConfigurationError("kappa estimation needs averaged coefficients")
    px = probe_grid(scenario.dim_m, radius, n_probe)
    if kind == "driver":
        # joint (x, y) product grid, capped like a (m+d)-dimensional probe box
        joint = probe_grid(scenario.dim_m + scenario.dim_d, radius, n_probe)
        probes_x, probes_y = joint[:, : scenario.dim_m], joint[:, scenario.dim_m :]
        probes = joint
    else:
        probes_x, probes_y, probes = px, None, px
    kappas = np.empty(T_hats.size)
    argmax = np.empty((T_hats.size, probes.shape[1]))
    for i, T_hat in enumerate(T_hats):
        ratio = _deviation_over_probes(kind, scenario, probes_x, probes_y, T_hat, n_quad)
        j = int(np.argmax(ratio))
        kappas[i] = ratio[j]
        argmax[i] = probes[j]
    # values at the rounding floor count as decreased: a degenerate scenario
    # with zero deviation would otherwise plateau at ~1e-34 quadrature residue
    at_floor = kappas[1:] <= 1e-30
    decreasing = bool(np.all((np.diff(kappas) < 0) | at_floor)) if T_hats.size > 1 else True
    return KappaEstimate(kind, T_hats, kappas, argmax, probes, decreasing)


@dataclass(frozen=True)
class InferredDrift:
    """Tabulated Cesaro-limit drift with a piecewise-linear interpolant (m=1)."""

    probes: np.ndarray
    values: np.ndarray
    T_used: float
    lipschitz_estimate: float
    interpolant: Optional[Callable] = field(default=None, repr=False)


def infer_averaged_drift(b, radius=5.0, n_probe=41, T_schedule=(1e2, 1e3, 1e4), tol=1e-2,
                         dim_m=1, n_quad=8):
    """Infer b_bar numerically as the stabilized Cesaro average over a T schedule.

    The schedule must be increasing; convergence means successive averages
    agree within tol*(1+|x|) at every probe.  There is no closed-form recipe
    for the limit in general, so this tabulation is the practical substitute.
    """
    T_schedule = np.asarray(T_schedule, float)
    if T_schedule.size < 3 or np.any(np.diff(T_schedule) <= 0):
        raise ConfigurationError("T_schedule must be increasing with at least 3 entries")
    probes = probe_grid(dim_m, radius, n_probe)
    margin = tol * (1.0 + np.sqrt(np.sum(probes**2, axis=1)))
    prev = adaptive_cesaro(lambda s: b(s, probes), T_schedule[0], n_quad)
    converged_at = None
    for T_hat in T_schedule[1:]:
        cur = adaptive_cesaro(lambda s: b(s, probes), T_hat, n_quad)
        if np.all(np.max(np.abs(cur - prev), axis=1) <= margin):
            converged_at = float(T_hat)
        prev = cur
    if converged_at is None:
        raise NumericError(
            "Cesaro averages did not stabilize across the T schedule; "
            f"increase T beyond {T_schedule[-1]:g}"
        )
    values = prev
    # empirical Lipschitz quotient over probe pairs
    if probes.shape[0] > 1:
        dv = np.linalg.norm(values[1:] - values[:-1], axis=1)
        dx = np.linalg.norm(probes[1:] - probes[:-1], axis=1)
        lip = float(np.max(dv / dx))
    else:
        lip = 0.0
    interp = None
    if dim_m == 1:
        xs = probes[:, 0]

        def interp(x):
            x_arr = np.asarray(x, float)
            cols = [np.interp(x_arr.reshape(-1), xs, values[:, j]) for j in range(values.shape[1])]
            return np.stack(cols, axis=1)

    return InferredDrift(probes, values, float(T_schedule[-1]), lip, interp)
