"""Scenario data model: the full coefficient set of a forward-backward system.

Coefficient calling conventions (n = number of paths / probe points):
  b(s, x)        x: (n, m)        -> (n, m)
  sigma(s, x)    x: (n, m)        -> (n, m, l)
  f1(s, x, y)    x: (n, m), y: (n, d) -> (n, d)
  f2(z)          z: (n, d, l)     -> (n, d)
  g(x)           x: (n, m)        -> (n, d)
with s a scalar fast-time argument.  Averaged coefficients b_bar(x),
sigma_bar(x), f1_bar(x, y) drop the s argument.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import convex
from .errors import ConfigurationError


@dataclass(frozen=True)
class Scenario:
    name: str
    dim_m: int
    dim_d: int
    dim_l: int
    b: Callable = field(repr=False)
    sigma: Callable = field(repr=False)
    f1: Callable = field(repr=False)
    f2: Callable = field(repr=False)
    g: Callable = field(repr=False)
    phi: convex.ConvexFunction
    # Lipschitz / growth constants the solver diagnostics rely on
    L1: float = 1.0
    L2: float = 1.0
    L3: float = 1.0
    L4: float = 1.0
    L5: float = 0.5
    q1: int = 0
    q2: int = 1
    q3: int = 1
    b_bar: Optional[Callable] = field(default=None, repr=False)
    sigma_bar: Optional[Callable] = field(default=None, repr=False)
    f1_bar: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if not (0 < self.L5 < 1):
            raise ConfigurationError(f"need 0 < L5 < 1, got L5={self.L5}")
        for name, val in (("L1", self.L1), ("L2", self.L2), ("L3", self.L3), ("L4", self.L4)):
            if not val > 0:
                raise ConfigurationError(f"constant {name} must be positive, got {val}")

    def has_averaged(self):
        return self.b_bar is not None and self.sigma_bar is not None and self.f1_bar is not None

    def with_phi_g(self, phi=None, g=None):
        """Copy with a different convex function and/or terminal map."""
        kwargs = {}
        if phi is not None:
            kwargs["phi"] = phi
        if g is not None:
            kwargs["g"] = g
        return replace(self, **kwargs)


def _col(values):
    """Shape a 1-d coefficient value as (n, 1)."""
    return np.asarray(values, float).reshape(-1, 1)


def _diag1(values):
    """Shape a 1-d diffusion value as (n, 1, 1)."""
    return np.asarray(values, float).reshape(-1, 1, 1)


def _zero_driver(s, x, y):
    return np.zeros_like(y)


def _zero_driver_bar(x, y):
    return np.zeros_like(y)


def _zero_f2(z):
    return np.zeros(z.shape[:2])


_NAMED_G = {
    "identity": lambda x: _col(x[:, 0]),
    "sin": lambda x: _col(np.sin(x[:, 0])),
    "clamp_half": lambda x: _col(np.clip(x[:, 0], -0.5, 0.5)),
    "zero": lambda x: np.zeros((x.shape[0], 1)),
}


def example71(phi=None, g="sin"):
    """Oscillating trig system in one dimension, the bundled reference study.

    b(s,x) = s/(1+s) * cos x, sigma(s,x) = (1 - e^{-s/2}) * sin x with limits
    b_bar = cos, sigma_bar = sin; zero drivers.
    """
    if phi is None:
        phi = convex.indicator_box(-1.0, 1.0)
    g_fn = _NAMED_G[g] if isinstance(g, str) else g

    def b(s, x):
        return _col(s / (1.0 + s) * np.cos(x[:, 0]))

    def sigma(s, x):
        return _diag1((1.0 - math.exp(-s / 2.0)) * np.sin(x[:, 0]))

    def b_bar(x):
        return _col(np.cos(x[:, 0]))

    def sigma_bar(x):
        return _diag1(np.sin(x[:, 0]))

    return Scenario(
        "example71", 1, 1, 1, b, sigma, _zero_driver, _zero_f2, g_fn, phi,
        L1=2.0, L2=1.0, L3=1.0, L4=1.0, L5=0.5, q1=0, q2=1, q3=1,
        b_bar=b_bar, sigma_bar=sigma_bar, f1_bar=_zero_driver_bar,
    )


def martingale():
    """X = x + W, zero drivers, phi = 0, g = identity: Y_t = X_t exactly."""

    def b(s, x):
        return np.zeros_like(x)

    def sigma(s, x):
        return np.ones((x.shape[0], 1, 1))

    def b_bar(x):
        return np.zeros_like(x)

    def sigma_bar(x):
        return np.ones((x.shape[0], 1, 1))

    return Scenario(
        "martingale", 1, 1, 1, b, sigma, _zero_driver, _zero_f2, _NAMED_G["identity"],
        convex.zero(), L1=1.0, b_bar=b_bar, sigma_bar=sigma_bar, f1_bar=_zero_driver_bar,
    )


def gbm(mu=0.05, nu=0.2):
    """Geometric Brownian motion with time-constant coefficients."""

    def b(s, x):
        return mu * x

    def sigma(s, x):
        return _diag1(nu * x[:, 0])

    def b_bar(x):
        return mu * x

    def sigma_bar(x):
        return _diag1(nu * x[:, 0])

    return Scenario(
        "gbm", 1, 1, 1, b, sigma, _zero_driver, _zero_f2, _NAMED_G["identity"],
        convex.zero(), L1=max(abs(mu), abs(nu), 0.1) + 1.0,
        b_bar=b_bar, sigma_bar=sigma_bar, f1_bar=_zero_driver_bar,
    )


def gbm_exact_terminal(x0, mu, nu, w_terminal, T):
    """Closed-form GBM terminal state x0*exp((mu - nu^2/2)T + nu*W_T)."""
    return x0 * np.exp((mu - 0.5 * nu * nu) * T + nu * w_terminal)


def obstacle_tree():
    """X = x + W with Y clipped into [-1/2, 1/2]; has a binomial-tree oracle."""
    base = martingale()
    return base.with_phi_g(
        phi=convex.indicator_box(-0.5, 0.5), g=_NAMED_G["clamp_half"]
    )


_BUILTINS = {
    "example71": example71,
    "martingale": martingale,
    "gbm": gbm,
    "obstacle-tree": obstacle_tree,
}


def builtin_names():
    return sorted(_BUILTINS)


def get_builtin(name, **options):
    """Look up a builtin scenario by registry name."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {name!r}; builtins: {', '.join(builtin_names())}"
        ) from None
    try:
        return factory(**options)
    except TypeError:
        raise ConfigurationError(
            f"scenario {name!r} does not accept option(s) {sorted(options)}"
        ) from None
