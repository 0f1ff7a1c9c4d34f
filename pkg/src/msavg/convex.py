"""Lower semicontinuous convex functions with exact or numeric proximal maps.

Every function here is separable across coordinates, normalized so that
phi(y) >= phi(0) = 0, and carries a resolvent (I + h*dphi)^{-1} that the
backward solver uses as its implicit step.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, NumericError

# tolerance band on effective-domain boundaries; keeps terminal values that
# land on a box face by rounding inside the closed domain
DOMAIN_TOL = 1e-12

_BISECT_TOL = 1e-12
_BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class ConvexFunction:
    """Separable convex function on R^d, described by kind + parameters.

    kinds:
      zero          -- phi = 0 everywhere
      indicator_box -- 0 on [lower, upper] (+-inf allowed), +inf outside
      scaled_abs    -- sum_i weight_i * |y_i|
      custom_scalar -- user 1-d convex function applied per coordinate,
                       with one-sided derivatives for the prox bisection
    """

    kind: str
    dim_d: int = 1
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None
    scalar_phi: Optional[Callable] = field(default=None, repr=False)
    scalar_d_minus: Optional[Callable] = field(default=None, repr=False)
    scalar_d_plus: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("zero", "indicator_box", "scaled_abs", "custom_scalar"):
            raise ConfigurationError(f"unknown convex function kind {self.kind!r}")
        if self.kind == "indicator_box":
            lo, up = np.asarray(self.lower, float), np.asarray(self.upper, float)
            if lo.shape != (self.dim_d,) or up.shape != (self.dim_d,):
                raise ConfigurationError("indicator_box bounds must have shape (dim_d,)")
            if np.any(lo > up):
                raise ConfigurationError("indicator_box needs lower <= upper")
            if np.any(lo > DOMAIN_TOL) or np.any(up < -DOMAIN_TOL):
                raise ConfigurationError("indicator_box must contain 0 (phi(0) = 0)")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", up)
        if self.kind == "scaled_abs":
            w = np.asarray(self.weight, float)
            if w.shape != (self.dim_d,) or np.any(w < 0):
                raise ConfigurationError("scaled_abs weights must be nonnegative, shape (dim_d,)")
            object.__setattr__(self, "weight", w)
        if self.kind == "custom_scalar" and (
            self.scalar_phi is None or self.scalar_d_minus is None or self.scalar_d_plus is None
        ):
            raise ConfigurationError("custom_scalar needs scalar_phi and one-sided derivatives")


def zero(dim_d=1):
    return ConvexFunction("zero", dim_d)


def indicator_box(lower, upper, dim_d=1):
    lo = np.broadcast_to(np.asarray(lower, float), (dim_d,)).copy()
    up = np.broadcast_to(np.asarray(upper, float), (dim_d,)).copy()
    return ConvexFunction("indicator_box", dim_d, lower=lo, upper=up)


def scaled_abs(weight, dim_d=1):
    w = np.broadcast_to(np.asarray(weight, float), (dim_d,)).copy()
    return ConvexFunction("scaled_abs", dim_d, weight=w)


def custom_scalar(phi, d_minus, d_plus, dim_d=1):
    return ConvexFunction(
        "custom_scalar", dim_d, scalar_phi=phi, scalar_d_minus=d_minus, scalar_d_plus=d_plus
    )


@dataclass(frozen=True)
class ProxResult:
    """Proximal point p and the implied subgradient (y - p)/h in dphi(p)."""

    point: np.ndarray
    subgrad: np.ndarray


def eval_phi(phi, y):
    """Evaluate phi(y); +inf outside the effective domain.

    y may be a single point (dim_d,) or a batch (..., dim_d); returns the
    matching scalar or batch of values.
    """
    y = np.asarray(y, float)
    if phi.kind == "zero":
        return np.zeros(y.shape[:-1]) if y.ndim > 1 else 0.0
    if phi.kind == "indicator_box":
        inside = np.all((y >= phi.lower - DOMAIN_TOL) & (y <= phi.upper + DOMAIN_TOL), axis=-1)
        out = np.where(inside, 0.0, np.inf)
        return out if y.ndim > 1 else float(out)
    if phi.kind == "scaled_abs":
        out = np.sum(phi.weight * np.abs(y), axis=-1)
        return out if y.ndim > 1 else float(out)
    out = np.sum(phi.scalar_phi(y), axis=-1)
    return out if y.ndim > 1 else float(out)


def _prox_custom_scalar(phi, h, y):
    """Monotone bisection for p with (y - p)/h in [d-(p), d+(p)]."""
    y = np.atleast_1d(np.asarray(y, float))
    # residual r(u) = u + h*d(u) - y is nondecreasing in u; bracket then bisect
    def too_low(u):
        # r using the right derivative: p must move right if u + h*d+(u) < y
        return u + h * phi.scalar_d_plus(u) < y

    def too_high(u):
        return u + h * phi.scalar_d_minus(u) > y

    lo = np.minimum(y, 0.0) - 1.0
    hi = np.maximum(y, 0.0) + 1.0
    for _ in range(200):
        grow = too_low(hi)
        shrink = too_high(lo)
        if not grow.any() and not shrink.any():
            break
        hi = np.where(grow, hi + (hi - lo), hi)
        lo = np.where(shrink, lo - (hi - lo), lo)
    else:
        raise NumericError("prox bisection failed to bracket the optimum")
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        low = too_low(mid)
        high = too_high(mid)
        lo = np.where(low, mid, lo)
        hi = np.where(high, mid, hi)
        done = ~(low | high)
        lo = np.where(done, mid, lo)
        hi = np.where(done, mid, hi)
        if np.max(hi - lo) < _BISECT_TOL:
            return 0.5 * (lo + hi)
    raise NumericError("prox bisection did not converge within 200 iterations")


def prox_point(phi, h, y):
    """argmin_u phi(u) + |u - y|^2 / (2h), vectorized over leading axes."""
    if not h > 0:
        raise ConfigurationError(f"prox step h must be positive, got {h}")
    y = np.asarray(y, float)
    if phi.kind == "zero":
        return y.copy()
    if phi.kind == "indicator_box":
        return np.clip(y, phi.lower, phi.upper)
    if phi.kind == "scaled_abs":
        t = h * phi.weight
        return np.sign(y) * np.maximum(np.abs(y) - t, 0.0)
    return _prox_custom_scalar(phi, h, y)


def prox(phi, h, y):
    """Proximal step returning the point and the implied subgradient."""
    y = np.asarray(y, float)
    p = prox_point(phi, h, y)
    return ProxResult(p, (y - p) / h)


def subgradient_gap(phi, p, v, z_samples):
    """Worst violation of <v, z - p> + phi(p) <= phi(z) over sampled z.

    A return value <= tol certifies v in dphi(p) on the sample.  Samples
    outside the effective domain (phi = +inf) can never violate and are
    ignored.
    """
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    z = np.atleast_2d(np.asarray(z_samples, float))
    phi_p = eval_phi(phi, p)
    if not np.isfinite(phi_p):
        raise ConfigurationError("subgradient_gap requires phi(p) < inf")
    phi_z = np.atleast_1d(eval_phi(phi, z))
    gap = (z - p) @ v + phi_p - phi_z
    gap = gap[np.isfinite(phi_z)]
    return float(np.max(gap)) if gap.size else -np.inf


def domain_violation(phi, y):
    """Distance from y to the closure of the effective domain (0 if inside)."""
    y = np.asarray(y, float)
    if phi.kind == "indicator_box":
        below = np.maximum(phi.lower - y, 0.0)
        above = np.maximum(y - phi.upper, 0.0)
        return np.sqrt(np.sum((below + above) ** 2, axis=-1))
    # zero, scaled_abs and custom_scalar are finite everywhere
    return np.zeros(y.shape[:-1]) if y.ndim > 1 else 0.0
