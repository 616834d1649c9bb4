"""JSON encoding: arrays, problems, instances, factors, reports."""

import json

import numpy as np
import pytest

from smoothsdp import (
    DenseConstraints,
    DiagonalConstraints,
    FieldTag,
    ModelError,
    dumps_sorted,
    factor_from_json,
    factor_to_json,
    generate_instance,
    instance_from_json,
    instance_to_json,
    problem_from_json,
    problem_to_json,
    read_json,
    round_solution,
    solution_from_json,
    solution_to_json,
    write_json,
)
from smoothsdp.serialize import decode_array, encode_array

from conftest import random_dense_problem, random_diagonal_problem


def test_encode_array_layout():
    real = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert encode_array(real) == [1.0, 2.0, 3.0, 4.0]
    cplx = np.array([[1.0 + 2.0j, 3.0 - 4.0j]])
    assert encode_array(cplx) == [[1.0, 2.0], [3.0, -4.0]]


def test_decode_array_round_trip():
    rng = np.random.default_rng(80)
    real = rng.standard_normal((3, 5))
    back = decode_array(encode_array(real), (3, 5), FieldTag.REAL)
    assert np.array_equal(back, real) and back.dtype == np.float64
    cplx = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    back = decode_array(encode_array(cplx), (4, 2), FieldTag.COMPLEX)
    assert np.array_equal(back, cplx) and back.dtype == np.complex128


def test_decode_array_validation():
    with pytest.raises(ModelError):
        decode_array([1.0, 2.0, 3.0], (2, 2), FieldTag.REAL)
    with pytest.raises(ModelError):
        decode_array([[1.0, 2.0], [3.0]], (1, 2), FieldTag.COMPLEX)
    with pytest.raises(ModelError):
        decode_array([1.0, 2.0], (1, 2), FieldTag.COMPLEX)


def test_problem_round_trip_dense():
    problem, _ = random_dense_problem(5, 3, 2, FieldTag.COMPLEX, seed=81)
    back = problem_from_json(problem_to_json(problem))
    assert back.field is FieldTag.COMPLEX
    assert np.array_equal(back.C, problem.C)
    assert back.R == problem.R and back.K == problem.K
    assert np.array_equal(back.b, problem.b)
    assert isinstance(back.constraints, DenseConstraints)
    assert np.array_equal(
        back.constraints.matrices, problem.constraints.matrices
    )


def test_problem_round_trip_recovers_diagonal_form():
    problem, _ = random_diagonal_problem(6, 2, FieldTag.COMPLEX, seed=82)
    back = problem_from_json(problem_to_json(problem))
    assert isinstance(back.constraints, DiagonalConstraints)
    assert back.constraints.m == problem.m
    assert np.array_equal(back.C, problem.C)
    assert np.array_equal(back.b, problem.b)


def test_instance_round_trip():
    inst = generate_instance(4, oversampling=6.0, noise_sigma=0.2, seed=83)
    back = instance_from_json(instance_to_json(inst))
    assert back.d == inst.d and back.n == inst.n
    assert back.noise_sigma == inst.noise_sigma and back.seed == inst.seed
    assert np.array_equal(back.A, inst.A)
    assert np.array_equal(back.b, inst.b)
    assert np.array_equal(back.z_true, inst.z_true)

    blob = instance_to_json(inst)
    blob["z_true"] = None
    anon = instance_from_json(blob)
    assert anon.z_true is None


def test_factor_round_trip():
    rng = np.random.default_rng(84)
    y = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    back, field = factor_from_json(factor_to_json(y, FieldTag.COMPLEX))
    assert field is FieldTag.COMPLEX
    assert np.array_equal(back, y)
    y_real = rng.standard_normal((4, 3))
    back, field = factor_from_json(factor_to_json(y_real, FieldTag.REAL))
    assert field is FieldTag.REAL
    assert np.array_equal(back, y_real)


def test_solution_round_trip():
    inst = generate_instance(4, oversampling=6.0, seed=85)
    rng = np.random.default_rng(85)
    y = rng.standard_normal((inst.n, 2)) + 1j * rng.standard_normal((inst.n, 2))
    sol = round_solution(inst, y)
    u, z_hat, objective, err = solution_from_json(solution_to_json(sol, 0.125))
    assert np.array_equal(u, sol.u)
    assert np.array_equal(z_hat, sol.z_hat)
    assert objective == sol.objective
    assert err == 0.125
    _, _, _, no_err = solution_from_json(solution_to_json(sol))
    assert no_err is None


def test_dumps_sorted():
    text = dumps_sorted({"b": 1, "a": {"d": 2.5, "c": [1, 2]}})
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"b": 1, "a": {"d": 2.5, "c": [1, 2]}}
    assert dumps_sorted(json.loads(text)) == text
    with pytest.raises(ValueError):
        dumps_sorted({"x": float("nan")})


def test_write_and_read_json(tmp_path):
    path = tmp_path / "report.json"
    payload = {"values": [1.0, 2.0], "name": "case"}
    write_json(path, payload)
    assert read_json(path) == payload
    assert path.read_text().endswith("\n")
    with pytest.raises(OSError):
        write_json(tmp_path / "missing" / "report.json", payload)
