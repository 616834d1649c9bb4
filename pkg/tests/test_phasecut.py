"""Phase retrieval: instance generation, cost construction, rounding."""

import numpy as np
import pytest

from smoothsdp import (
    B_FLOOR,
    DiagonalConstraints,
    FieldTag,
    ModelError,
    PhasecutInstance,
    RankDeficiencyError,
    build_cost,
    build_sdp,
    certify,
    default_rank,
    generate_clean_instance,
    generate_instance,
    recovery_error,
    round_solution,
)
from smoothsdp.linalg import is_self_adjoint, operator_norm

from conftest import phasecut_point


def test_generate_instance_shapes_and_determinism():
    inst = generate_instance(20, oversampling=10.0, seed=3)
    assert inst.d == 20
    assert inst.n == 200
    assert inst.A.shape == (200, 20) and inst.A.dtype == np.complex128
    assert inst.b.shape == (200,) and inst.b.dtype == np.float64
    assert inst.z_true.shape == (20,)
    assert np.all(inst.b >= B_FLOOR)
    again = generate_instance(20, oversampling=10.0, seed=3)
    assert np.array_equal(inst.A, again.A)
    assert np.array_equal(inst.b, again.b)
    assert np.array_equal(inst.z_true, again.z_true)
    assert not np.array_equal(inst.A, generate_instance(20, seed=4).A)


def test_generate_instance_noise_and_validation():
    clean = generate_instance(6, oversampling=8.0, noise_sigma=0.0, seed=5)
    assert np.allclose(clean.b, np.maximum(np.abs(clean.A @ clean.z_true), B_FLOOR))
    noisy = generate_instance(6, oversampling=8.0, noise_sigma=0.5, seed=5)
    assert not np.allclose(noisy.b, clean.b)
    assert np.all(noisy.b >= B_FLOOR)
    for bad in (
        {"d": 0},
        {"oversampling": 0.0},
        {"noise_sigma": -0.1},
    ):
        kwargs = dict(d=6, oversampling=8.0, noise_sigma=0.0, seed=0)
        kwargs.update(bad)
        with pytest.raises(ModelError):
            generate_instance(**kwargs)


def test_generate_clean_instance_avoids_floor():
    inst = generate_clean_instance(5, oversampling=8.0, seed=0)
    amplitudes = np.abs(inst.A @ inst.z_true)
    assert np.min(amplitudes) > B_FLOOR
    assert np.array_equal(inst.b, amplitudes)


def test_instance_validation():
    rng = np.random.default_rng(6)
    a = (rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))) / np.sqrt(2)
    b = np.abs(a @ np.ones(3)) + 1.0
    PhasecutInstance(3, 8, 0.0, 0, a, b, np.ones(3, dtype=complex))
    with pytest.raises(ModelError):
        PhasecutInstance(3, 8, 0.0, 0, a, np.append(b[:-1], 0.0), np.ones(3, dtype=complex))
    with pytest.raises(ModelError):
        PhasecutInstance(3, 8, 0.0, 0, a[:, :2], b, np.ones(3, dtype=complex))
    with pytest.raises(ModelError):
        PhasecutInstance(3, 8, 0.0, 0, a, b, np.ones(4, dtype=complex))


def test_build_cost_properties():
    inst = generate_clean_instance(5, oversampling=8.0, seed=7)
    c = build_cost(inst)
    assert c.shape == (inst.n, inst.n)
    assert is_self_adjoint(c)
    scale = operator_norm(c)
    evals = np.linalg.eigvalsh(c)
    assert evals[0] >= -1e-10 * scale
    # the true measurement phases are (near) minimizers with value ~0
    u = (inst.A @ inst.z_true) / np.abs(inst.A @ inst.z_true)
    assert float(np.vdot(u, c @ u).real) <= 1e-10 * scale * inst.n


def test_build_cost_square_system_vanishes():
    inst = generate_clean_instance(4, oversampling=1.0, seed=8)
    assert inst.n == inst.d
    c = build_cost(inst)
    assert np.max(np.abs(c)) <= 1e-10 * max(1.0, float(np.max(inst.b)) ** 2)


def test_build_cost_rank_errors():
    inst = generate_clean_instance(4, oversampling=8.0, seed=9)
    flat = PhasecutInstance(
        4,
        inst.n,
        0.0,
        0,
        np.tile(inst.A[:, :1], (1, 4)),
        inst.b,
        inst.z_true,
    )
    with pytest.raises(RankDeficiencyError):
        build_cost(flat)
    skinny = PhasecutInstance(
        4, 3, 0.0, 0, inst.A[:3], inst.b[:3], inst.z_true
    )
    with pytest.raises(RankDeficiencyError):
        build_cost(skinny)


def test_build_sdp_structure():
    inst = generate_clean_instance(5, oversampling=8.0, seed=10)
    problem = build_sdp(inst)
    assert problem.field is FieldTag.COMPLEX
    assert isinstance(problem.constraints, DiagonalConstraints)
    assert np.array_equal(problem.b, np.ones(inst.n))
    assert problem.R == float(inst.n)
    assert problem.K == 1.0
    assert np.array_equal(problem.C, build_cost(inst))


def test_default_rank():
    assert default_rank(100) == 10
    assert default_rank(3000) == 55
    assert default_rank(1) == 1
    assert default_rank(2) == 2
    with pytest.raises(ModelError):
        default_rank(0)


def test_round_solution_rank_one_recovers_phases():
    inst, problem, _ = phasecut_point(4, seed=11)
    u_true = (inst.A @ inst.z_true) / np.abs(inst.A @ inst.z_true)
    y = (inst.b * u_true).reshape(-1, 1)  # rank-1 factor aligned with the truth
    # rescale rows to unit modulus so y is feasible for the diagonal constraints
    y = y / np.abs(y)
    sol = round_solution(inst, y)
    assert np.allclose(np.abs(sol.u), 1.0, atol=1e-12)
    phase = np.vdot(sol.u, u_true)
    phase /= abs(phase)
    assert np.allclose(sol.u * phase, u_true, atol=1e-10)
    assert recovery_error(sol.z_hat, inst.z_true) <= 1e-10
    assert sol.objective <= 1e-18 * inst.n


def test_round_solution_details():
    inst, _, point = phasecut_point(4, seed=12)
    sol = round_solution(inst, point.Y)
    assert np.allclose(np.abs(sol.u), 1.0, atol=1e-12)
    z_ls, *_ = np.linalg.lstsq(inst.A, inst.b * sol.u, rcond=None)
    assert np.allclose(sol.z_hat, z_ls, atol=1e-10)
    want = float(np.linalg.norm(inst.b * sol.u - inst.A @ sol.z_hat) ** 2)
    assert sol.objective == pytest.approx(want, rel=1e-12)
    with pytest.raises(ModelError):
        round_solution(inst, point.Y[:-1])

    zero_row = point.Y.copy()
    zero_row[0] = 0.0
    patched = round_solution(inst, zero_row)
    assert patched.u[0] == 1.0 + 0.0j


def test_recovery_error_phase_invariance():
    rng = np.random.default_rng(13)
    z = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    assert recovery_error(z, z) <= 1e-15
    assert recovery_error(1j * z, z) <= 1e-12
    theta = np.exp(1j * 2.2)
    assert recovery_error(theta * z, z) <= 1e-12
    shifted = z + 0.01 * (rng.standard_normal(6) + 1j * rng.standard_normal(6))
    err = recovery_error(shifted, z)
    assert 0.0 < err < 0.1
    assert recovery_error(np.zeros(6, dtype=complex), z) == 1.0
    with pytest.raises(ModelError):
        recovery_error(z, np.zeros(6, dtype=complex))
    with pytest.raises(ModelError):
        recovery_error(z[:4], z)


def test_end_to_end_recovery(solved_small):
    inst, _, result = solved_small
    sol = round_solution(inst, result.point.Y)
    assert recovery_error(sol.z_hat, inst.z_true) <= 1e-3
    # rounding cannot beat the SDP's certified lower bound
    cert = certify(result.point, sosp=result.sosp)
    assert sol.objective >= cert.dual_lower_bound - 1e-9
