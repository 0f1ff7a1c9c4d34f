"""Backward solver for the reflected system: regression Monte Carlo + prox.

Scheme, for k = N-1 .. 0 with step h:
  c_k(X_k)  ~ E[Y_{k+1} | X_k]               (cross-sectional least squares)
  z_k(X_k)  ~ E[Y_{k+1} dW_k^T | X_k] / h
  y~        = c_k + h * (f1 + f2(z_k))       (short Picard loop in the f1 slot)
  Y_k       = prox(phi, h, y~),  dK_k = y~ - Y_k   (so dK_k in h*dphi(Y_k))
The prox step absorbs the multivalued reflection term and confines Y to the
closure of the effective domain by construction.
"""

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from . import convex
from .errors import ConfigurationError

_COND_WARN = 1e12


@dataclass(frozen=True)
class RegressionBasis:
    """Feature map on the forward state used for conditional expectations."""

    kind: str = "polynomial"
    degree: int = 3
    n_bins: int = 16
    bin_range: tuple = (-5.0, 5.0)

    def __post_init__(self):
        if self.kind not in ("polynomial", "piecewise"):
            raise ConfigurationError(f"unknown basis kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 0:
            raise ConfigurationError("polynomial degree must be >= 0")
        if self.kind == "piecewise" and self.n_bins < 1:
            raise ConfigurationError("piecewise basis needs at least one bin")

    def features(self, x):
        """Design matrix for states x of shape (n, m)."""
        x = np.asarray(x, float)
        n, m = x.shape
        if self.kind == "piecewise":
            lo, hi = self.bin_range
            edges = np.linspace(lo, hi, self.n_bins + 1)
            idx = np.clip(np.searchsorted(edges, x[:, 0], side="right") - 1, 0, self.n_bins - 1)
            out = np.zeros((n, self.n_bins))
            out[np.arange(n), idx] = 1.0
            return out
        cols = [np.ones(n)]
        for deg in range(1, self.degree + 1):
            for combo in combinations_with_replacement(range(m), deg):
                cols.append(np.prod(x[:, combo], axis=1))
        return np.stack(cols, axis=1)


@dataclass(frozen=True)
class BsviSolution:
    grid: "TimeGrid"
    Y: np.ndarray = field(repr=False)  # (n, N+1, d)
    Z: np.ndarray = field(repr=False)  # (n, N, d, l)
    dK: np.ndarray = field(repr=False)  # (n, N, d)
    k_variation: np.ndarray = field(repr=False)  # (n,)
    mode: str
    epsilon: float | None
    diagnostics: dict = field(repr=False)


def _driver_eval(scenario, mode, epsilon, t_k, x_k, y):
    if mode == "oscillating":
        return scenario.f1(t_k / epsilon, x_k, y)
    return scenario.f1_bar(x_k, y)


def solve_bsvi(forward_batch, scenario, basis=None, n_picard=2, mode=None):
    """Solve the discrete backward variational inequality along a path batch.

    mode defaults to the forward batch's own mode; passing it explicitly is a
    cross-check that the caller paired the right forward simulation.
    """
    if basis is None:
        basis = RegressionBasis()
    if mode is None:
        mode = forward_batch.mode
    if mode != forward_batch.mode:
        raise ConfigurationError(
            f"requested mode {mode!r} but forward batch was simulated as {forward_batch.mode!r}"
        )
    if mode == "averaged" and scenario.f1_bar is None:
        raise ConfigurationError("averaged mode needs f1_bar on the scenario")
    phi = scenario.phi
    grid = forward_batch.grid
    h = grid.h
    n, N = forward_batch.n_paths, grid.n_steps
    d, l = scenario.dim_d, scenario.dim_l
    X = forward_batch.states
    dW = forward_batch.brownian.increments

    Y = np.empty((n, N + 1, d))
    Z = np.empty((n, N, d, l))
    dK = np.empty((n, N, d))

    terminal = scenario.g(X[:, N, :])
    viol = convex.domain_violation(phi, terminal)
    if np.any(viol > convex.DOMAIN_TOL):
        bad = int(np.argmax(viol))
        raise ConfigurationError(
            f"terminal value g(X_T) outside closure of the phi domain on path {bad} "
            f"(distance {viol[bad]:.3e})"
        )
    Y[:, N, :] = terminal

    cond = np.empty(N)
    resid = np.empty(N)
    picard_gaps = np.full((N, max(n_picard, 1)), np.nan)
    y_tilde_std0 = 0.0

    for k in range(N - 1, -1, -1):
        t_k = grid.t0 + k * h
        A = basis.features(X[:, k, :])
        targets = np.concatenate(
            [Y[:, k + 1, :], (Y[:, k + 1, :, None] * dW[:, k, None, :] / h).reshape(n, d * l)],
            axis=1,
        )
        coef, _, _, sv = np.linalg.lstsq(A, targets, rcond=None)
        cond[k] = sv[0] / sv[-1] if sv.size and sv[-1] > 0 else np.inf
        fitted = A @ coef
        c_k = fitted[:, :d]
        z_k = fitted[:, d:].reshape(n, d, l)
        resid[k] = float(np.sqrt(np.mean(np.sum((Y[:, k + 1, :] - c_k) ** 2, axis=1))))

        f2_val = scenario.f2(z_k)
        y = c_k
        for i in range(n_picard):
            y_new = c_k + h * (_driver_eval(scenario, mode, forward_batch.epsilon, t_k,
                                            X[:, k, :], y) + f2_val)
            picard_gaps[k, i] = float(np.max(np.abs(y_new - y))) if n_picard else 0.0
            y = y_new
        if n_picard == 0:
            y = c_k + h * (_driver_eval(scenario, mode, forward_batch.epsilon, t_k,
                                        X[:, k, :], c_k) + f2_val)

        p = convex.prox_point(phi, h, y)
        Y[:, k, :] = p
        dK[:, k, :] = y - p
        Z[:, k, :, :] = z_k
        if k == 0:
            y_tilde_std0 = float(np.sqrt(np.sum(np.var(y, axis=0, ddof=1)))) if n > 1 else 0.0

    k_variation = np.sum(np.sqrt(np.sum(dK * dK, axis=2)), axis=1)
    diagnostics = {
        "condition_numbers": cond,
        "residual_rms": resid,
        "picard_gaps": picard_gaps,
        "cond_warnings": int(np.sum(cond > _COND_WARN)),
        "y_tilde_std0": y_tilde_std0,
        "n_basis": basis.features(X[:1, 0, :]).shape[1],
    }
    for arr in (Y, Z, dK, k_variation):
        arr.setflags(write=False)
    return BsviSolution(grid, Y, Z, dK, k_variation, mode, forward_batch.epsilon, diagnostics)


def sample_subdifferential_pairs(phi, n_pairs, dim_d, seed=0, scale=2.0):
    """Draw (x, v) pairs with v in dphi(x), via the prox with unit step."""
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    raw = gen.standard_normal((n_pairs, dim_d)) * scale
    x = convex.prox_point(phi, 1.0, raw)
    v = raw - x
    return x, v


def monotonicity_check(solution, phi, n_test_pairs=16, seed=0, pairs=None):
    """Worst value over test pairs of min_path sum_k <Y_k - x, dK_k - v*h>.

    For (x, v) in the graph of dphi this is nonnegative up to rounding; a
    clearly negative value falsifies the discrete variational inequality.
    """
    d = solution.Y.shape[2]
    if pairs is None:
        xs, vs = sample_subdifferential_pairs(phi, n_test_pairs, d, seed)
    else:
        xs, vs = pairs
        xs, vs = np.atleast_2d(np.asarray(xs, float)), np.atleast_2d(np.asarray(vs, float))
    h = solution.grid.h
    samples = np.random.Generator(np.random.Philox(key=7)).standard_normal((64, d)) * 3.0
    worst = np.inf
    for x, v in zip(xs, vs):
        if subgradient_pair_invalid(phi, x, v, samples):
            raise ConfigurationError(f"test pair (x={x}, v={v}) is not in the graph of dphi")
        inner = np.sum((solution.Y[:, :-1, :] - x) * (solution.dK - v * h), axis=(1, 2))
        worst = min(worst, float(np.min(inner)))
    return worst


def subgradient_pair_invalid(phi, x, v, samples, tol=1e-9):
    gap = convex.subgradient_gap(phi, x, v, samples)
    return gap > tol


def apriori_bounds(solution):
    """Monte Carlo estimates of E sup|Y|^2, sum_k h E||Z_k||^2 and E |K|_TV."""
    sup_y = np.max(np.sum(solution.Y**2, axis=2), axis=1)
    int_z = solution.grid.h * np.sum(solution.Z**2, axis=(1, 2, 3))
    return {
        "sup_Y_sq": float(np.mean(sup_y)),
        "int_Z_sq": float(np.mean(int_z)),
        "k_var": float(np.mean(solution.k_variation)),
    }


def point_value(solution, forward_batch):
    """Initial value Y_0 for a deterministic start, with its standard error.

    The regression makes Y_0 constant across paths up to noise; the reported
    standard error is that of the step-0 conditional-mean estimate.
    """
    x0 = forward_batch.states[:, 0, :]
    if not np.allclose(x0, x0[0], rtol=0.0, atol=0.0):
        raise ConfigurationError("point_value requires a deterministic start state")
    y0 = solution.Y[:, 0, :]
    value = np.mean(y0, axis=0)
    n = y0.shape[0]
    se = solution.diagnostics["y_tilde_std0"] / np.sqrt(n)
    dispersion = float(np.sqrt(np.sum(np.var(y0, axis=0, ddof=1)))) if n > 1 else 0.0
    warn = se > 0 and dispersion > 10.0 * se
    return value, se, warn
