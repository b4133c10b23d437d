import configparser
import math

import numpy as np
import pytest

from binthrust.platform_model import (
    PlatformParams,
    spin_momentum,
    step_euler,
    step_plant,
    system_matrices,
    wrap_angle,
)

P = PlatformParams()


def reference_deriv(params, x, u):
    """Hand-written state derivative, kept independent of the module."""
    s, c = math.sin(x[2]), math.cos(x[2])
    f = params.thrust / params.mass
    g = params.thrust * params.radius / params.inertia
    fx = f * np.array([0, -s, s, -c, c, s, -s, c, -c])
    fy = f * np.array([0, c, -c, -s, s, -c, c, s, -s])
    tq = np.array([-1.0 / params.inertia, g, -g, g, -g, g, -g, g, -g])
    return np.array([
        x[3], x[4], x[5],
        fx @ u, fy @ u, tq @ u,
        u[0] / params.wheel_inertia,
    ])


def fine_euler(params, x, u, total_t, dt):
    """Chained Euler steps of the nonlinear dynamics, relinearized each step."""
    steps = int(round(total_t / dt))
    for _ in range(steps):
        x = x + dt * reference_deriv(params, x, u)
    return x


def fine_euler_batch(params, X, U, total_t, dt):
    """Vectorized fine-Euler oracle over a batch of (state, input) pairs.

    Euler's global error is O(dt), so dt = 1e-5 is needed to referee an
    RK4 step at the 1e-6 level over a 0.1 s window.
    """
    X = np.array(X, dtype=float)
    f = params.thrust / params.mass
    fr = params.thrust * params.radius / params.inertia
    u0 = U[:, 0]
    su = -U[:, 1] + U[:, 2] + U[:, 5] - U[:, 6]
    cu = -U[:, 3] + U[:, 4] + U[:, 7] - U[:, 8]
    spin = U[:, 1] - U[:, 2] + U[:, 3] - U[:, 4] + U[:, 5] - U[:, 6] + U[:, 7] - U[:, 8]
    alpha = -u0 / params.inertia + fr * spin
    wdot = u0 / params.wheel_inertia
    for _ in range(int(round(total_t / dt))):
        s = np.sin(X[:, 2])
        c = np.cos(X[:, 2])
        ax = f * (s * su + c * cu)
        ay = f * (-c * su + s * cu)
        X[:, 0] += dt * X[:, 3]
        X[:, 1] += dt * X[:, 4]
        X[:, 2] += dt * X[:, 5]
        X[:, 3] += dt * ax
        X[:, 4] += dt * ay
        X[:, 5] += dt * alpha
        X[:, 6] += dt * wdot
    return X


def test_table_constants():
    assert P.mass == 202.81
    assert P.radius == 0.35
    assert P.inertia == 12.22
    assert P.wheel_inertia == 0.047
    assert P.thrust == 10.36
    assert P.wheel_torque_limit == 1.44
    assert P.t_on_min == 0.1
    assert P.t_on_max == 0.3
    assert P.t_off_min == 0.2
    assert abs(P.wheel_speed_limit - 250 * 2 * math.pi / 60) < 1e-12
    assert abs(P.wheel_speed_limit - 26.1799387799) < 1e-9


def test_param_validation():
    bad = PlatformParams(mass=-1.0)
    with pytest.raises(ValueError):
        bad.validate()
    bad = PlatformParams(t_on_min=0.4)   # exceeds t_on_max
    with pytest.raises(ValueError):
        bad.validate()
    bad = PlatformParams(t_off_min=0.0)
    with pytest.raises(ValueError):
        bad.validate()


def test_config_loading(tmp_path):
    text = """[platform]
m = 100.0
r = 0.5
I_S = 10.0
I_RW = 0.05
omega_RW_max_rpm = 120
F_n = 5.0
tau_max = 1.0
t_on_min = 0.1
t_on_max = 0.2
t_off_min = 0.3
"""
    path = tmp_path / "platform.ini"
    path.write_text(text)
    params = PlatformParams.from_config(str(path))
    assert params.mass == 100.0
    assert params.radius == 0.5
    assert abs(params.wheel_speed_limit - 120 * 2 * math.pi / 60) < 1e-12
    assert params.t_off_min == 0.3
    # parser objects are accepted too
    cfg = configparser.ConfigParser()
    cfg.read_string(text)
    assert PlatformParams.from_config(cfg).mass == 100.0


def test_matrix_structure():
    dyn = system_matrices(P, 0.3)
    A, B = dyn.A, dyn.B
    expected_A = np.zeros((7, 7))
    expected_A[0, 3] = expected_A[1, 4] = expected_A[2, 5] = 1.0
    assert np.array_equal(A, expected_A)
    # wheel torque column: body reaction and wheel spin-up only
    col0 = np.zeros(7)
    col0[5] = -1.0 / P.inertia
    col0[6] = 1.0 / P.wheel_inertia
    assert np.allclose(B[:, 0], col0, atol=0, rtol=0)
    # force-opposed pairs negate each other, torque entries alternate
    g = P.thrust * P.radius / P.inertia
    for a, b in [(1, 2), (3, 4), (5, 6), (7, 8)]:
        assert np.allclose(B[3:5, a], -B[3:5, b])
        assert B[5, a] == pytest.approx(g)
        assert B[5, b] == pytest.approx(-g)
    assert np.all(B[0:3, :] == 0.0)
    assert np.all(B[6, 1:] == 0.0)


def test_thruster_one_at_zero_yaw():
    B = system_matrices(P, 0.0).B
    assert B[3, 1] == pytest.approx(0.0, abs=1e-15)
    assert B[4, 1] == pytest.approx(10.36 / 202.81)
    assert B[4, 1] == pytest.approx(0.05108, abs=5e-6)


def test_drift_only_derivative():
    dyn = system_matrices(P, 0.0)
    x = np.array([1.0, -0.5, math.pi, 0.0, 0.1, 0.0, 0.0])
    xdot = dyn.A @ x + dyn.B @ np.zeros(9)
    assert np.allclose(xdot, [0.0, 0.1, 0.0, 0, 0, 0, 0])


def test_rotation_equivariance():
    rng = np.random.default_rng(7)
    for _ in range(20):
        theta = rng.uniform(-4, 4)
        delta = rng.uniform(-4, 4)
        B0 = system_matrices(P, theta).B
        B1 = system_matrices(P, theta + delta).B
        rot = np.array([[math.cos(delta), -math.sin(delta)],
                        [math.sin(delta), math.cos(delta)]])
        assert np.allclose(B1[3:5, :], rot @ B0[3:5, :], atol=1e-12)
        assert np.allclose(B1[5:, :], B0[5:, :], atol=0)


def test_quarter_turn_matches_rotated_forces():
    B0 = system_matrices(P, 0.0).B
    B90 = system_matrices(P, math.pi / 2).B
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(B90[3:5, :], rot @ B0[3:5, :], atol=1e-12)
    # x-acceleration row at 90 degrees equals the negated y row at 0
    assert np.allclose(B90[3, :], -B0[4, :], atol=1e-12)


def test_opposing_pair_cancellation():
    for theta in (0.0, 0.7, -2.2):
        B = system_matrices(P, theta).B
        for a, b in [(1, 2), (3, 4), (5, 6), (7, 8)]:
            u = np.zeros(9)
            u[a] = 1.0
            u[b] = 1.0
            assert np.allclose((B @ u)[3:6], 0.0, atol=1e-12)


def test_euler_equilibrium_and_drift():
    dyn = system_matrices(P, 0.0)
    zero = np.zeros(7)
    assert np.array_equal(step_euler(dyn, zero, np.zeros(9)), zero)
    x = np.array([1.0, -0.5, math.pi, 0.0, 0.1, 0.0, 0.0])
    out = step_euler(dyn, x, np.zeros(9))
    assert np.allclose(out, [1.0, -0.49, math.pi, 0.0, 0.1, 0.0, 0.0])


def test_euler_pure_torque():
    dyn = system_matrices(P, 0.0)
    u = np.zeros(9)
    u[0] = 1.44
    out = step_euler(dyn, np.zeros(7), u)
    assert out[5] == pytest.approx(-0.1 * 1.44 / 12.22)
    assert out[5] == pytest.approx(-0.011784, abs=1e-6)
    assert out[6] == pytest.approx(0.1 * 1.44 / 0.047)
    assert out[6] == pytest.approx(3.0638, abs=1e-4)
    assert np.all(out[:5] == 0.0)


def test_euler_linear_in_input():
    dyn = system_matrices(P, 1.1)
    rng = np.random.default_rng(3)
    x = rng.normal(size=7)
    u1 = rng.uniform(0, 1, size=9)
    u2 = rng.uniform(0, 1, size=9)
    a, b = 0.3, 1.7
    base = step_euler(dyn, x, np.zeros(9))
    lhs = step_euler(dyn, x, a * u1 + b * u2)
    rhs = base + a * (step_euler(dyn, x, u1) - base) + b * (step_euler(dyn, x, u2) - base)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_plant_rest_is_fixed_point():
    x = np.array([0.4, 2.0, -1.0, 0.0, 0.0, 0.0, 5.0])
    out = step_plant(P, x, np.zeros(9), 0.001)
    assert np.allclose(out, x, atol=0)


def test_plant_matches_fine_euler_single_thruster():
    x = np.zeros(7)
    u = np.zeros(9)
    u[1] = 1.0
    plant = x.copy()
    for _ in range(100):
        plant = step_plant(P, plant, u, 0.001)
    oracle = fine_euler_batch(P, x[None, :], u[None, :], 0.1, 1e-5)[0]
    assert np.max(np.abs(plant - oracle)) < 1e-6
    # the two oracle implementations agree with each other as well
    loop = fine_euler(P, x, u, 0.1, 1e-3)
    vect = fine_euler_batch(P, x[None, :], u[None, :], 0.1, 1e-3)[0]
    assert np.max(np.abs(loop - vect)) < 1e-12


def test_plant_matches_fine_euler_randomized():
    rng = np.random.default_rng(42)
    k = 25
    X = np.column_stack([
        rng.uniform(-2, 2, size=(k, 2)),
        rng.uniform(-math.pi, math.pi, size=(k, 1)),
        rng.uniform(-0.3, 0.3, size=(k, 2)),
        rng.uniform(-0.3, 0.3, size=(k, 1)),
        rng.uniform(-20, 20, size=(k, 1)),
    ])
    U = np.column_stack([rng.uniform(-1.44, 1.44, size=(k, 1)),
                         rng.integers(0, 2, size=(k, 8)).astype(float)])
    oracle = fine_euler_batch(P, X, U, 0.1, 1e-5)
    for i in range(k):
        plant = X[i].copy()
        for _ in range(100):
            plant = step_plant(P, plant, U[i], 0.001)
        assert np.max(np.abs(plant - oracle[i])) < 1e-6


def test_momentum_conserved_with_thrusters_off():
    rng = np.random.default_rng(11)
    x = np.array([0.0, 0.0, 0.5, 0.0, 0.0, 0.1, -3.0])
    for _ in range(200):
        u = np.zeros(9)
        u[0] = rng.uniform(-1.44, 1.44)
        before = spin_momentum(P, x)
        x = step_plant(P, x, u, 0.001)
        after = spin_momentum(P, x)
        assert abs(after - before) < 1e-9


def test_plant_rejects_coarse_step():
    with pytest.raises(ValueError):
        step_plant(P, np.zeros(7), np.zeros(9), 0.02)


def test_wrap_angle():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(2 * math.pi) == pytest.approx(0.0)
    for k in range(-5, 6):
        angle = 0.3 + 2 * math.pi * k
        assert wrap_angle(angle) == pytest.approx(0.3)
