import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.linalg import expm

from cddscert.analysis import check_pointwise
from cddscert.legendre import build_basis, eval_basis
from cddscert.model import CddsSystem, l2_gain_supply
from cddscert.oracle import (bessel_check, dissipation_check, freq_response, functional_value, kernel_moments,
                             sigma_sweep, simulate)


def _delay_free():
    A1 = np.array([[0.0, 1.0], [-2.0, -0.3]])
    return CddsSystem(A1=A1, A2=np.zeros((2, 1)), A4=np.zeros((1, 2)), A5=np.zeros((1, 1)),
                      D1=[[0.0], [1.0]], C1=[[1.0, 0.0]])


def test_delay_free_matches_ode():
    s = _delay_free()
    w = lambda t: np.array([np.cos(2 * t)])
    tr = simulate(s, 0.5, w=w, x0=[1.0, 0.0], N=50, T=3.0)
    ref = solve_ivp(lambda t, x: s.A1 @ x + s.D1 @ w(t), (0, 3.0), [1.0, 0.0], t_eval=tr.t,
                    rtol=1e-12, atol=1e-14).y.T
    assert np.max(np.abs(tr.x - ref)) <= 1e-6
    tr0 = simulate(s, 0.5, x0=[1.0, 0.0], N=100, T=3.0)
    assert np.max(np.abs(tr0.x[-1] - expm(s.A1 * tr0.T) @ [1.0, 0.0])) <= 1e-9


def test_fourth_order_convergence(distributed):
    w = lambda t: np.array([np.sin(4 * t)])
    r = 0.3
    ref = simulate(distributed, r, w=w, N=800, T=1.2)
    errs = []
    for N in (50, 100):
        tr = simulate(distributed, r, w=w, N=N, T=1.2)
        errs.append(np.max(np.abs(tr.x[-1] - ref.x[-1])))
    assert np.log2(errs[0] / errs[1]) >= 3.5


def test_step_must_divide_delay(example1):
    with pytest.raises(ValueError):
        simulate(example1, 1.0, h=0.03)
    with pytest.raises(ValueError):
        simulate(example1, 1.0, N=20)
    assert simulate(example1, 1.0, h=0.01, T=0.1).N == 100


def test_example1_decays_and_grows(example1):
    tr = simulate(example1, 1.0, x0=[1.0, 0.0], N=50, T=200.0)
    assert np.max(np.abs(tr.x[-1])) <= 1e-6
    tr = simulate(example1, 2.0, x0=[1.0, 0.0], N=50, T=100.0)
    assert np.max(np.abs(tr.x[-1])) > 1.0


def _moments_by_quad(b, r, om):
    out = []
    for k in range(b.size):
        f = lambda t, k=k: eval_basis(b, r, np.array([t]))[k, 0]
        re = quad(lambda t: f(t) * np.cos(om * t), -r, 0, epsabs=1e-14, epsrel=1e-13)[0]
        im = quad(lambda t: f(t) * np.sin(om * t), -r, 0, epsabs=1e-14, epsrel=1e-13)[0]
        out.append(re + 1j * im)
    return np.array(out)


def test_kernel_moment_examples():
    b0 = build_basis(0)
    assert kernel_moments(b0, np.pi, 1.0) == pytest.approx(np.array([-2j]), abs=1e-14)
    b = build_basis(3)
    assert np.allclose(kernel_moments(b, 0.7, 0.0), [0.7, 0, 0, 0], atol=1e-15)


@pytest.mark.parametrize("d", [0, 1, 3, 5])
def test_kernel_moments_against_quadrature(d):
    b = build_basis(d)
    r = 0.7
    # both branches and the switch point |omega| r = max(d, 1)
    sw = max(d, 1) / r
    for om in (0.05, 1.0, sw * (1 - 1e-9), sw * (1 + 1e-9), 20.0, -7.0):
        assert np.allclose(kernel_moments(b, r, om), _moments_by_quad(b, r, om), atol=1e-12)


def test_static_system():
    s = CddsSystem(A1=-np.eye(2), A2=np.zeros((2, 2)), A4=np.zeros((2, 2)), A5=np.zeros((2, 2)),
                   D1=np.zeros((2, 1)), C1=np.zeros((2, 2)), D2=[[3.0], [4.0]])
    for om in (0.0, 1.0, 100.0):
        assert np.allclose(freq_response(s, 0.4, om), [[3.0], [4.0]])
    assert sigma_sweep(s, 0.4, npoints=50).peak == pytest.approx(5.0)


def _phasor_trajectory_error(sys, r, omega):
    # start on the sinusoidal steady state so lightly damped modes are not excited
    s = 1j * omega
    e = np.exp(-s * r)
    Kx = np.linalg.solve(np.eye(sys.nu) - sys.A5 * e, sys.A4)
    Mt = np.kron(_moments_by_quad(build_basis(sys.d), r, omega)[:, None], np.eye(sys.nu))
    X = np.linalg.solve(s * np.eye(sys.n) - sys.A1 - (sys.A2 * e + sys.A3(r) @ Mt) @ Kx, sys.D1[:, 0])
    Y = Kx @ X
    period = 2 * np.pi / omega
    N = max(50, int(np.ceil(r / min(0.002, period / 60))))
    tr = simulate(sys, r, w=lambda t: np.array([np.sin(omega * t)]), x0=X.imag,
                  phi=lambda t: (Y * np.exp(s * t)).imag, N=N, T=2.0 + 2 * period)
    H = freq_response(sys, r, omega)[:, 0]
    pred = (H[None, :] * np.exp(s * tr.t)[:, None]).imag
    return np.max(np.abs(tr.z - pred)) / np.linalg.norm(H)


def test_steady_state_matches_frequency_response(neutral):
    g = np.random.default_rng(7)
    for om in np.concatenate([[np.pi / 0.3], np.exp(g.uniform(np.log(0.5), np.log(150.0), 20))]):
        assert _phasor_trajectory_error(neutral, 0.3, om) <= 1e-4


def test_steady_state_distributed(distributed):
    for om in (0.7, 6.0, 40.0):
        assert _phasor_trajectory_error(distributed, 0.4, om) <= 1e-4


def test_bessel_random(rng):
    for d in (0, 1, 2, 4):
        b = build_basis(d)
        for _ in range(250):
            nu = int(rng.integers(1, 3))
            y = rng.standard_normal((201, nu))
            M = rng.standard_normal((nu, nu))
            lhs, rhs = bessel_check(b, 0.8, y, M @ M.T + 0.1 * np.eye(nu))
            assert lhs >= rhs - 1e-10 * (1 + abs(lhs))


@settings(max_examples=30, deadline=None)
@given(d=st.integers(0, 4), seed=st.integers(0, 2 ** 31 - 1))
def test_bessel_equality_in_span(d, seed):
    g = np.random.default_rng(seed)
    b = build_basis(d)
    r = 1.3
    tau = np.linspace(-r, 0, 2001)
    y = (g.standard_normal(d + 1) @ eval_basis(b, r, tau))
    lhs, rhs = bessel_check(b, r, y, [[1.0]])
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_bessel_gap_for_piecewise_linear():
    r = 1.0
    tau = np.linspace(-r, 0, 401)
    y = np.abs(tau + r / 2)
    gaps = []
    for d in (0, 1, 2, 3):
        lhs, rhs = bessel_check(build_basis(d), r, y, [[1.0]])
        assert lhs > rhs + 1e-6
        gaps.append(lhs - rhs)
    assert all(a >= b - 1e-12 for a, b in zip(gaps, gaps[1:]))


@pytest.fixture(scope="module")
def pointwise_cert(neutral):
    rep = check_pointwise(neutral, 0.3, J=l2_gain_supply(0.5, 3, 1))
    assert rep.certified
    return rep.certificate


def test_dissipation_with_disturbance(neutral, pointwise_cert):
    J = l2_gain_supply(0.5, 3, 1)
    tr = simulate(neutral, 0.3, w=lambda t: np.array([np.sin(3 * t) + 0.3 * np.cos(17 * t)]), N=150, T=3.0)
    out = dissipation_check(neutral, 0.3, pointwise_cert, J, tr)
    assert out["relative"] <= 1e-4


def test_functional_decreases_without_disturbance(neutral, pointwise_cert):
    tr = simulate(neutral, 0.3, x0=[1.0, -1.0, 0.5], N=150, T=1.5)
    out = dissipation_check(neutral, 0.3, pointwise_cert, l2_gain_supply(0.5, 3, 1), tr, stride=5)
    assert np.all(np.diff(out["v"]) <= 1e-9 * out["energy_scale"])
    assert out["v"][0] > 0


def test_zero_data_gives_zero_functional(neutral, pointwise_cert):
    tr = simulate(neutral, 0.3, N=60, T=0.6)
    P, S, U = pointwise_cert.P(0.3), pointwise_cert.S(0.3), pointwise_cert.U(0.3)
    assert all(functional_value(tr, k, P, S, U, build_basis(0)) == 0.0 for k in range(tr.t.size))
    with pytest.raises(ValueError):
        dissipation_check(neutral, 0.4, pointwise_cert, l2_gain_supply(0.5, 3, 1), tr)


def test_dissipation_detects_wrong_supply(neutral, pointwise_cert):
    # too small a gain must be violated by a resonant input
    fr = sigma_sweep(neutral, 0.3, npoints=400)
    tr = simulate(neutral, 0.3, w=lambda t: np.array([np.sin(fr.omega_peak * t)]), N=150, T=3.0)
    out = dissipation_check(neutral, 0.3, pointwise_cert, l2_gain_supply(0.05, 3, 1), tr)
    assert out["relative"] > 1e-3


def test_csv_export(tmp_path, example1):
    tr = simulate(example1, 1.0, x0=[1.0, 0.0], T=0.5)
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# trajectory") and lines[1] == "t,x0,x1,y0"
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    assert data.shape == (tr.t.size, 4)
    assert np.array_equal(data[:, 1:3], tr.x)
    fr = sigma_sweep(CddsSystem(A1=-np.eye(1), A2=[[0.0]], A4=[[0.0]], A5=[[0.0]], D1=[[1.0]], C1=[[1.0]]),
                     1.0, npoints=20)
    fr.to_csv(tmp_path / "s.csv")
    assert np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=2).shape == (21, 2)
