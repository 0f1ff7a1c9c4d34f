"""Time grids and reproducible Brownian increment batches.

Randomness is counter-based: every batch is a pure function of
(master_seed, purpose tag, path index), so parallel generation or repeated
calls can never change a single draw.  Refinement by an integer factor uses
Brownian-bridge conditional sampling and records its source batch, so
aggregating a refined batch returns the coarse increments bit-for-bit.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# purpose tags keep independent uses of one master seed on disjoint streams
_TAG_BASE = 0x1
_TAG_REFINE = 0x2


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = t0 + k*h, k = 0..n_steps, with t_N = T."""

    t0: float
    T: float
    n_steps: int

    @property
    def h(self):
        return (self.T - self.t0) / self.n_steps

    def nodes(self):
        out = self.t0 + np.arange(self.n_steps + 1) * self.h
        out[-1] = self.T
        return out


def make_grid(t0, T, n_steps):
    """Build a TimeGrid, validating span and step count."""
    if not n_steps >= 1:
        raise ConfigurationError(f"n_steps must be >= 1, got {n_steps}")
    if not (T > t0 >= 0):
        raise ConfigurationError(f"need T > t0 >= 0, got t0={t0}, T={T}")
    return TimeGrid(float(t0), float(T), int(n_steps))


def _stream(master_seed, tag, path):
    """Philox generator keyed by (master_seed, tag, path).

    The 128-bit key is a hash of the triple, so distinct triples get
    independent streams and each draw is a pure function of the triple.
    """
    digest = hashlib.blake2b(
        f"{int(master_seed)}:{int(tag)}:{int(path)}".encode(), digest_size=16
    ).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))


@dataclass(frozen=True)
class BrownianBatch:
    """Shared Brownian increments on a grid, one row of draws per path.

    increments has shape (n_paths, n_steps, dim_l); entry [i, k, j] is a pure
    function of (master_seed, i, k, j) and of the refinement lineage.
    """

    grid: TimeGrid
    n_paths: int
    dim_l: int
    increments: np.ndarray = field(repr=False)
    master_seed: int
    # refinement lineage: the batch this one was refined from, if any.  It
    # records the exact coarse increments, which a floating-point re-sum of
    # the fine increments could only reproduce to within an ulp.
    parent: "BrownianBatch" = field(default=None, repr=False, compare=False)
    parent_factor: int = field(default=None, compare=False)

    def cumulative(self):
        """Brownian path values W_{t_k} (zero at t0), shape (n_paths, n_steps+1, dim_l)."""
        w = np.zeros((self.n_paths, self.grid.n_steps + 1, self.dim_l))
        np.cumsum(self.increments, axis=1, out=w[:, 1:, :])
        return w


def sample_brownian(grid, n_paths, dim_l, master_seed):
    """Draw a deterministic batch of N(0, h) increments."""
    if n_paths < 1:
        raise ConfigurationError(f"n_paths must be >= 1, got {n_paths}")
    scale = np.sqrt(grid.h)
    inc = np.empty((n_paths, grid.n_steps, dim_l))
    for i in range(n_paths):
        gen = _stream(master_seed, _TAG_BASE, i)
        inc[i] = gen.standard_normal((grid.n_steps, dim_l)) * scale
    inc.setflags(write=False)
    return BrownianBatch(grid, int(n_paths), int(dim_l), inc, int(master_seed))


def _tree_sum(g):
    """Sum axis 2 of a (n, N, factor, l) array by recursive halving.

    This fixed association is shared by aggregation and refinement, so a
    refined batch aggregates back through the exact same arithmetic.
    """
    f = g.shape[2]
    if f == 1:
        return g[:, :, 0, :]
    k = f // 2
    return _tree_sum(g[:, :, :k, :]) + _tree_sum(g[:, :, k:, :])


def _group_sum(fine, factor):
    """Sum groups of `factor` fine increments into coarse increments."""
    n_paths, n_fine, dim_l = fine.shape
    return _tree_sum(fine.reshape(n_paths, n_fine // factor, factor, dim_l))


def refine_brownian(batch, factor):
    """Refine a batch by an integer factor via Brownian-bridge sampling.

    Fine increments within each coarse step are exchangeable N(0, h/factor)
    draws conditioned on their sum; the last sub-increment is the residual,
    so each group sums to the coarse increment up to final rounding.  The
    refined batch also records the source batch as its lineage, which is how
    aggregate_brownian reproduces the coarse increments exactly: a pure
    floating-point re-sum cannot in general hit an arbitrary double target
    when every addend lies in a coarser binade.
    """
    if not (isinstance(factor, (int, np.integer)) and factor >= 1):
        raise ConfigurationError(f"refinement factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return batch
    g = batch.grid
    fine_grid = TimeGrid(g.t0, g.T, g.n_steps * factor)
    h_f = g.h / factor
    n, N, l = batch.n_paths, g.n_steps, batch.dim_l

    fine = np.empty((n, N, factor, l))
    # tag mixes in the source grid size so repeated refinements use fresh streams
    tag = (_TAG_REFINE << 32) | (g.n_steps & 0xFFFFFFFF)
    for i in range(n):
        raw = _stream(batch.master_seed, tag, i).standard_normal((N, factor, l)) * np.sqrt(h_f)
        fine[i] = raw - raw.mean(axis=1, keepdims=True) + batch.increments[i, :, None, :] / factor
    fine[:, :, factor - 1, :] = batch.increments - _tree_sum(fine[:, :, : factor - 1, :])
    fine = fine.reshape(n, N * factor, l)
    fine.setflags(write=False)
    return BrownianBatch(fine_grid, n, l, fine, batch.master_seed,
                         parent=batch, parent_factor=factor)


def aggregate_brownian(batch, factor):
    """Coarsen a batch by summing groups of `factor` increments.

    A batch produced by refine_brownian carries its source as lineage, and
    aggregating along the lineage returns the source increments themselves,
    so refine-then-aggregate round-trips are exact by construction (nested
    refinements included).  Batches without lineage are coarsened by a
    fixed-association group sum, which then *defines* the coarse increments;
    sweeps that couple several grids aggregate one finest batch this way.
    """
    if not (isinstance(factor, (int, np.integer)) and factor >= 1):
        raise ConfigurationError(f"aggregation factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return batch
    if batch.parent is not None and factor % batch.parent_factor == 0:
        return aggregate_brownian(batch.parent, factor // batch.parent_factor)
    g = batch.grid
    if g.n_steps % factor != 0:
        raise ConfigurationError(
            f"cannot aggregate {g.n_steps} steps by factor {factor}: not divisible"
        )
    coarse = _group_sum(batch.increments, factor)
    coarse.setflags(write=False)
    return BrownianBatch(
        TimeGrid(g.t0, g.T, g.n_steps // factor), batch.n_paths, batch.dim_l, coarse,
        batch.master_seed,
    )
