"""Euler-Maruyama simulation of the oscillating and averaged forward SDEs.

The two schemes consume the same Brownian increments, so their pathwise gap
isolates the averaging error from the Monte Carlo noise.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, NumericError

Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class ForwardPathBatch:
    grid: "TimeGrid"
    n_paths: int
    dim_m: int
    states: np.ndarray = field(repr=False)  # (n_paths, n_steps+1, m)
    mode: str  # "oscillating" or "averaged"
    epsilon: Optional[float]
    start: np.ndarray
    brownian: "BrownianBatch" = field(repr=False)


def _check_start(scenario, start, n_paths):
    x0 = np.broadcast_to(np.asarray(start, float).reshape(-1), (scenario.dim_m,))
    return np.tile(x0, (n_paths, 1))


def _drive(grid, brownian, x0, drift_at, diff_at, mode, epsilon):
    n_paths = brownian.n_paths
    states = np.empty((n_paths, grid.n_steps + 1, x0.shape[1]))
    states[:, 0, :] = x0
    h = grid.h
    x = x0.copy()
    t = grid.t0
    for k in range(grid.n_steps):
        dw = brownian.increments[:, k, :]
        x = x + drift_at(t, x) * h + np.einsum("nml,nl->nm", diff_at(t, x), dw)
        if not np.isfinite(x).all():
            bad = np.argwhere(~np.isfinite(x))[0]
            raise NumericError(
                f"non-finite state at path {bad[0]}, step {k + 1} ({mode} scheme)"
            )
        states[:, k + 1, :] = x
        t = grid.t0 + (k + 1) * h
    states.setflags(write=False)
    return ForwardPathBatch(
        grid, n_paths, x0.shape[1], states, mode, epsilon, x0[0].copy(), brownian
    )


def euler_multiscale(scenario, epsilon, start, grid, brownian, eta_osc=20.0):
    """Simulate X^eps with coefficients evaluated at fast time t_k/eps.

    The step size must resolve the oscillation: h <= eps/eta_osc.
    """
    if not (0 < epsilon < 1):
        raise ConfigurationError(f"need 0 < epsilon < 1, got {epsilon}")
    if brownian.grid != grid:
        raise ConfigurationError("brownian batch grid does not match the requested grid")
    if brownian.dim_l != scenario.dim_l:
        raise ConfigurationError(
            f"brownian dim_l={brownian.dim_l} but scenario needs l={scenario.dim_l}"
        )
    if grid.h > epsilon / eta_osc:
        needed = int(np.ceil((grid.T - grid.t0) * eta_osc / epsilon))
        raise ConfigurationError(
            f"step h={grid.h:g} too coarse for epsilon={epsilon:g}: "
            f"need n_steps >= {needed}"
        )
    x0 = _check_start(scenario, start, brownian.n_paths)
    return _drive(
        grid, brownian, x0,
        lambda t, x: scenario.b(t / epsilon, x),
        lambda t, x: scenario.sigma(t / epsilon, x),
        "oscillating", float(epsilon),
    )


def euler_averaged(scenario, start, grid, brownian):
    """Simulate X-bar with the averaged coefficients on the same increments."""
    if scenario.b_bar is None or scenario.sigma_bar is None:
        raise ConfigurationError(
            "scenario has no averaged coefficients; run the averaging module first"
        )
    if brownian.grid != grid:
        raise ConfigurationError("brownian batch grid does not match the requested grid")
    if brownian.dim_l != scenario.dim_l:
        raise ConfigurationError(
            f"brownian dim_l={brownian.dim_l} but scenario needs l={scenario.dim_l}"
        )
    x0 = _check_start(scenario, start, brownian.n_paths)
    return _drive(
        grid, brownian, x0,
        lambda t, x: scenario.b_bar(x),
        lambda t, x: scenario.sigma_bar(x),
        "averaged", None,
    )


def subset_paths(batch, idx):
    """Restrict a path batch (and its noise) to the given path indices."""
    from .grids import BrownianBatch

    idx = np.asarray(idx, int)
    bw = batch.brownian
    sub_bw = BrownianBatch(bw.grid, len(idx), bw.dim_l, bw.increments[idx], bw.master_seed)
    return ForwardPathBatch(
        batch.grid, len(idx), batch.dim_m, batch.states[idx], batch.mode,
        batch.epsilon, batch.start, sub_bw,
    )


@dataclass(frozen=True)
class SupDistance:
    """Monte Carlo estimator of E sup_k |X_a - X_b|^{2p}."""

    per_path: np.ndarray
    mean: float
    std_error: float
    ci_low: float
    ci_high: float
    power_p: int


def sup_distance_sq(batch_a, batch_b, power_p=1):
    """Pathwise sup-distance to the 2p-th power, with a 95% normal CI."""
    if batch_a.grid != batch_b.grid or batch_a.n_paths != batch_b.n_paths:
        raise ConfigurationError("batches must share grid and path count")
    diff = batch_a.states - batch_b.states
    sup = np.max(np.sqrt(np.sum(diff * diff, axis=2)), axis=1)
    per_path = sup ** (2 * power_p)
    mean = float(np.mean(per_path))
    se = float(np.std(per_path, ddof=1) / np.sqrt(len(per_path))) if len(per_path) > 1 else 0.0
    return SupDistance(per_path, mean, se, mean - Z95 * se, mean + Z95 * se, power_p)


def terminal_rms_error(batch, exact_terminal):
    """Root-mean-square gap between simulated and exact terminal states."""
    diff = batch.states[:, -1, :] - np.asarray(exact_terminal, float).reshape(batch.n_paths, -1)
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
