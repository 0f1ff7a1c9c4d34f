import math

import numpy as np
import pytest

from msavg import get_builtin
from msavg.averaging import (
    _simpson,
    adaptive_cesaro,
    cesaro_average_diffusion_sq,
    cesaro_average_drift,
    estimate_kappa,
    infer_averaged_drift,
    probe_grid,
)
from msavg.errors import ConfigurationError, NumericError

# Closed-form targets for the oscillating trig system:
#   (1/10) * int_0^10 s/(1+s) ds = 1 - ln(11)/10          (drift at x=0... cos(0)=1)
#   int_0^1 (1 - e^{-s/2})^2 - ... see diffusion test
DRIFT_AVG_10 = 1.0 - math.log(11.0) / 10.0


def test_simpson_exact_on_cubics():
    # composite Simpson integrates polynomials of degree <= 3 exactly
    for coeffs in ([1.0, 0.0, 0.0, 0.0], [0.0, 2.0, -1.0, 3.0], [1.0, 1.0, 1.0, 1.0]):
        p = np.polynomial.polynomial.Polynomial(coeffs)
        got = _simpson(lambda s: p(s), 2.0, 4)
        want = p.integ()(2.0) - p.integ()(0.0)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


def test_adaptive_cesaro_constant():
    assert adaptive_cesaro(lambda s: 3.5, 7.0) == pytest.approx(3.5, abs=1e-12)


def test_adaptive_cesaro_validation():
    with pytest.raises(ConfigurationError):
        adaptive_cesaro(lambda s: s, 0.0)
    with pytest.raises(ConfigurationError):
        adaptive_cesaro(lambda s: s, 1.0, n_quad=1)


def test_adaptive_cesaro_nonconvergent_reported():
    # a rapidly oscillating, T-dependent integrand that never stabilizes
    rng = np.random.default_rng(0)
    with pytest.raises(NumericError, match="did not converge"):
        adaptive_cesaro(lambda s: rng.normal(), 1.0)


def test_cesaro_drift_closed_form():
    scn = get_builtin("example71")
    got = cesaro_average_drift(scn.b, [0.0], 10.0)
    assert abs(got[0] - DRIFT_AVG_10) < 1e-8


def test_cesaro_diffusion_sq_closed_form():
    # at x = pi/2 the gap is e^{-s/2}; (1/1) int_0^1 e^{-s} ds = 1 - e^{-1}
    scn = get_builtin("example71")
    got = cesaro_average_diffusion_sq(scn.sigma, scn.sigma_bar, [math.pi / 2], 1.0)
    assert abs(got - (1.0 - math.exp(-1.0))) < 1e-8


def test_probe_grid_shapes_and_cap():
    g1 = probe_grid(1, 5.0, 41)
    assert g1.shape == (41, 1)
    assert g1.min() == -5.0 and g1.max() == 5.0
    g3 = probe_grid(3, 2.0, 41)
    assert g3.shape[0] <= 2000
    with pytest.raises(ConfigurationError):
        probe_grid(1, 0.0, 5)


def test_kappa_time_constant_is_zero():
    scn = get_builtin("gbm")
    est = estimate_kappa("drift", scn, [1.0, 10.0])
    assert np.max(est.kappa_hats) <= 1e-20
    est = estimate_kappa("diffusion", scn, [1.0, 10.0])
    assert np.max(est.kappa_hats) <= 1e-20


def test_kappa_example71_decreasing_and_bounded():
    scn = get_builtin("example71")
    t_hats = np.array([1.0, 10.0, 100.0])
    for kind in ("drift", "diffusion"):
        est = estimate_kappa(kind, scn, t_hats)
        assert est.decreasing
        assert np.all(est.kappa_hats <= 1.0 / t_hats)


def test_kappa_driver_kind():
    scn = get_builtin("example71")  # zero drivers -> zero deviation
    est = estimate_kappa("driver", scn, [1.0])
    assert est.kappa_hats[0] == 0.0
    assert est.probes.shape[1] == scn.dim_m + scn.dim_d


def test_kappa_unknown_kind():
    scn = get_builtin("example71")
    with pytest.raises(ConfigurationError):
        estimate_kappa("jumps", scn, [1.0])


def test_infer_averaged_drift_recovers_limit():
    scn = get_builtin("example71")
    inferred = infer_averaged_drift(scn.b, radius=3.0, n_probe=21,
                                    T_schedule=(1e2, 1e3, 1e4), tol=1e-2)
    xs = inferred.probes[:, 0]
    assert np.max(np.abs(inferred.values[:, 0] - np.cos(xs))) < 2e-2
    # cos is 1-Lipschitz; the empirical quotient should sit near that
    assert inferred.lipschitz_estimate < 1.1
    interp = inferred.interpolant(np.array([0.5]))
    assert abs(interp[0, 0] - math.cos(0.5)) < 2e-2


def test_infer_averaged_drift_schedule_validation():
    scn = get_builtin("example71")
    with pytest.raises(ConfigurationError, match="increasing"):
        infer_averaged_drift(scn.b, T_schedule=(10.0, 5.0, 20.0))
    with pytest.raises(ConfigurationError, match="3 entries"):
        infer_averaged_drift(scn.b, T_schedule=(10.0, 20.0))


def test_infer_averaged_drift_nonstabilizing():
    # average grows like log(T)/... pick b whose Cesaro mean drifts forever
    def wandering(s, x):
        return np.full((x.shape[0], 1), math.log(1.0 + s))

    with pytest.raises(NumericError, match="stabilize"):
        infer_averaged_drift(wandering, T_schedule=(1e1, 1e2, 1e3), tol=1e-3)
