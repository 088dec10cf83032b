import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psi_approx.errors import AliasingError, ParameterError
from psi_approx.fourier_core import TrigCoeffs, analyze
from psi_approx.oracle import deviation_at_zero, lower_bound_extremal
from psi_approx.psi_catalog import Exp, Log, Power, PowerLog
from psi_approx.psi_class import (
    ClassParams,
    build_extremal_derivative,
    build_partition,
    differentiate,
    extremal_pieces,
    integrate_derivative,
    rotation,
)
from psi_approx.summation import build_multipliers

LN2 = math.log(2)


def random_table(rng, m):
    return TrigCoeffs(0.0, rng.normal(size=m), rng.normal(size=m))


def test_beta_zero_is_plain_scaling():
    phi = TrigCoeffs(0.0, [1.0, 2.0, -1.0], [0.5, 0.0, 3.0])
    psi = Power(1.5)
    f = integrate_derivative(phi, ClassParams(psi, 0.0))
    w = psi(np.arange(1, 4.0))
    assert np.array_equal(f.a, w * phi.a) and np.array_equal(f.b, w * phi.b)


def test_beta_one_maps_cos_to_sin():
    f = integrate_derivative(TrigCoeffs(0.0, [1.0], [0.0]), ClassParams(Power(1), 1.0))
    assert (f.a[0], f.b[0]) == (0.0, 1.0)
    # and back: the derivative of sin x in this sense is cos x
    phi = differentiate(TrigCoeffs(0.0, [0.0], [1.0]), ClassParams(Power(1), 1.0))
    assert (phi.a[0], phi.b[0]) == (1.0, 0.0)


def test_beta_two_negates():
    rng = np.random.default_rng(3)
    phi = random_table(rng, 6)
    psi = Log()
    f0 = integrate_derivative(phi, ClassParams(psi, 0.0))
    f2 = integrate_derivative(phi, ClassParams(psi, 2.0))
    assert np.array_equal(f2.a, -f0.a) and np.array_equal(f2.b, -f0.b)


def test_nonzero_mean_rejected():
    with pytest.raises(ParameterError):
        integrate_derivative(TrigCoeffs(0.3, [1.0], [0.0]), ClassParams(Power(1), 0))


def test_classical_derivative_of_cos():
    # (cos x)' = -sin x
    phi = differentiate(TrigCoeffs(0.0, [1.0], [0.0]), ClassParams(Power(1), 1.0))
    assert (phi.a[0], phi.b[0]) == (0.0, -1.0)
    f = integrate_derivative(phi, ClassParams(Power(1), 1.0))
    assert f.allclose(TrigCoeffs(0.0, [1.0], [0.0]), atol=0)


def test_exp_scaling_example():
    f = TrigCoeffs(0.0, np.r_[np.zeros(4), math.exp(-5)], np.zeros(5))
    phi = differentiate(f, ClassParams(Exp(1, 1), 0.0))
    assert phi.a[4] == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("beta", [0, 0.3, 1, 2, 3.7, -2.2, 11.0])
def test_round_trip(beta):
    rng = np.random.default_rng(int(1000 * abs(beta)) + 1)
    params = ClassParams(PowerLog(1.2, 2), beta)
    for _ in range(20):
        phi = random_table(rng, 10)
        assert differentiate(integrate_derivative(phi, params), params).allclose(phi, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(beta=st.floats(-20, 20), seed=st.integers(0, 2**32 - 1))
def test_beta_periodicity(beta, seed):
    rng = np.random.default_rng(seed)
    phi = random_table(rng, 7)
    psi = Power(0.8)
    f = integrate_derivative(phi, ClassParams(psi, beta))
    f4 = integrate_derivative(phi, ClassParams(psi, beta + 4))
    f2 = integrate_derivative(phi, ClassParams(psi, beta + 2))
    assert f4.allclose(f, atol=1e-12)
    assert f2.allclose(-1.0 * f, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(-3, 3), seed=st.integers(0, 2**32 - 1))
def test_integrate_is_linear(alpha, seed):
    rng = np.random.default_rng(seed)
    x, y = random_table(rng, 9), random_table(rng, 9)
    params = ClassParams(Exp(0.2, 1), 0.7)
    lhs = integrate_derivative(x + alpha * y, params)
    rhs = integrate_derivative(x, params) + alpha * integrate_derivative(y, params)
    assert lhs.allclose(rhs, atol=1e-12)


def test_rotation_exact_on_integers():
    assert rotation(0) == (1.0, 0.0)
    assert rotation(1) == (0.0, 1.0)
    assert rotation(-1) == (0.0, -1.0)
    assert rotation(6) == (-1.0, 0.0)
    c, s = rotation(0.5)
    assert (c, s) == pytest.approx((math.sqrt(0.5), math.sqrt(0.5)), abs=1e-15)


def test_partition_examples():
    part = build_partition(ClassParams(Power(1), 0), 16, 2)
    assert part.regime == "mu_le_n_over_p"
    assert part.mu_n == pytest.approx(1.0)
    assert part.t(0) == pytest.approx(math.pi / 2) and part.x(0) == pytest.approx(math.pi)
    for p in (2, 4, 16):
        part = build_partition(ClassParams(Exp(LN2, 1), 0), 16, p)
        assert part.mu_n == pytest.approx(16)
        assert part.regime == "between"


def test_partition_regime_mu_above_n():
    # Exp(1, 2): T(n) is tiny so mu(n) >> n
    part = build_partition(ClassParams(Exp(1, 2), 0.5), 20, 4)
    assert part.regime == "mu_gt_n"
    assert part.a == 20


@settings(max_examples=60, deadline=None)
@given(beta=st.floats(-8, 8), n=st.integers(1, 400), data=st.data(),
       which=st.integers(0, 4))
def test_partition_sandwich(beta, n, data, which):
    p = data.draw(st.integers(1, n))
    psi = [Power(1), Power(2.5), Exp(LN2, 1), Log(), PowerLog(1, 1)][which]
    part = build_partition(ClassParams(psi, beta), n, p)
    assert part.sandwich_holds()
    assert part.t(5) - part.t(4) == pytest.approx(math.pi)


@pytest.mark.parametrize("psi,beta,n,p", [
    (Power(2), 0, 16, 1), (Power(1), 0.5, 32, 4), (Exp(LN2, 1), 1, 16, 4), (Log(), 1.3, 8, 8),
])
def test_extremal_derivative_constraints(psi, beta, n, p):
    params = ClassParams(psi, beta)
    grid = build_extremal_derivative(params, n, p, 64 * n)
    assert np.max(np.abs(grid.values)) <= 1.0
    assert abs(np.mean(grid.values)) <= 1e-12
    pieces = extremal_pieces(params, n, p)
    assert np.all(np.abs(pieces.lo) <= 1) and np.all(np.abs(pieces.hi) <= 1)
    mass = np.sum(pieces.v * (pieces.hi - pieces.lo)) + pieces.c * (2 * math.pi - 2)
    assert abs(mass) < 1e-13


def test_extremal_sign_pattern_on_inner_interval():
    params = ClassParams(Power(2), 0.0)
    n = 16
    pieces = extremal_pieces(params, n, 1)
    part = build_partition(params, n, 1)
    mid = 0.5 * (pieces.lo + pieces.hi)
    s = mid * n
    k = np.floor((s - part.t(0)) / math.pi).astype(int)
    expected = np.sign(1.0 / part.x(k)) * np.sign(np.sin(s))
    assert np.array_equal(pieces.v, expected)


def test_grid_too_coarse():
    with pytest.raises(AliasingError):
        build_extremal_derivative(ClassParams(Power(1), 0), 16, 2, 64 * 16 - 1)


@pytest.mark.parametrize("psi,beta,n,p", [(Power(2), 0, 16, 1), (Power(2), 0.5, 32, 4)])
def test_coefficient_route_converges_to_oracle_lower_bound(psi, beta, n, p):
    # the sampled step function has O(1/N) coefficient errors, so the check is a
    # convergence check rather than a tight tolerance
    params = ClassParams(psi, beta)
    lb = lower_bound_extremal(psi, beta, n, p, 1e-10)
    mult = build_multipliers("u", n, p, psi=psi)
    gaps = []
    for N in (64 * n, 1024 * n):
        c = analyze(build_extremal_derivative(params, n, p, N), 8 * n)
        dev = deviation_at_zero(integrate_derivative(c, params), mult)
        assert dev != 0
        gaps.append(abs(abs(dev) - lb) / lb)
    assert gaps[1] < gaps[0]
    assert gaps[1] < 2e-3
