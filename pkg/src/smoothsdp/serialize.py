"""JSON codecs for problems, instances, and factors.

Matrices are encoded row-major; complex entries become [re, im] pairs and
real entries plain numbers.  Floats round-trip bitwise (shortest-repr
serialization), and every writer sorts keys, so identical data produces
identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import (
    DenseConstraints,
    DiagonalConstraints,
    FieldTag,
    ModelError,
    SdpProblem,
    diagonal_constraints_if_possible,
)
from .phasecut import PhasecutInstance


def encode_array(a: np.ndarray) -> list:
    """Row-major entry list: floats, or [re, im] pairs for complex data."""
    flat = np.asarray(a).ravel()
    if np.iscomplexobj(flat):
        return [[float(v.real), float(v.imag)] for v in flat]
    return [float(v) for v in flat]


def decode_array(entries: list, shape: tuple[int, ...], field: FieldTag) -> np.ndarray:
    expected = int(np.prod(shape))
    if len(entries) != expected:
        raise ModelError(f"expected {expected} entries for shape {shape}, got {len(entries)}")
    if field is FieldTag.COMPLEX:
        flat = np.empty(expected, dtype=np.complex128)
        for i, pair in enumerate(entries):
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
                raise ModelError("complex entries must be [re, im] pairs")
            flat[i] = complex(float(pair[0]), float(pair[1]))
    else:
        flat = np.asarray([float(v) for v in entries], dtype=np.float64)
    return flat.reshape(shape)


def _field_from_name(name: str) -> FieldTag:
    try:
        return FieldTag(name)
    except ValueError:
        raise ModelError(f"unknown field {name!r}; expected 'real' or 'complex'") from None


def problem_to_json(problem: SdpProblem) -> dict:
    mats = problem.constraints.to_dense(problem.field)
    return {
        "field": problem.field.value,
        "n": problem.n,
        "m": problem.m,
        "C": encode_array(problem.C),
        "A": [encode_array(mats[i]) for i in range(problem.m)],
        "b": encode_array(problem.b),
        "R": float(problem.R),
        "K": float(problem.K),
    }


def problem_from_json(obj: dict) -> SdpProblem:
    field = _field_from_name(obj["field"])
    n = int(obj["n"])
    m = int(obj["m"])
    c = decode_array(obj["C"], (n, n), field)
    if len(obj["A"]) != m:
        raise ModelError(f"expected {m} constraint matrices, got {len(obj['A'])}")
    mats = np.stack([decode_array(entries, (n, n), field) for entries in obj["A"]])
    constraints = diagonal_constraints_if_possible(mats) or DenseConstraints(mats)
    b = decode_array(obj["b"], (m,), FieldTag.REAL)
    return SdpProblem(field, c, constraints, b, float(obj["R"]), float(obj["K"]))


def instance_to_json(inst: PhasecutInstance) -> dict:
    return {
        "d": inst.d,
        "n": inst.n,
        "noise_sigma": inst.noise_sigma,
        "seed": inst.seed,
        "A": encode_array(inst.A),
        "b": encode_array(inst.b),
        "z_true": None if inst.z_true is None else encode_array(inst.z_true),
    }


def instance_from_json(obj: dict) -> PhasecutInstance:
    d = int(obj["d"])
    n = int(obj["n"])
    z = obj.get("z_true")
    return PhasecutInstance(
        d=d,
        n=n,
        noise_sigma=float(obj["noise_sigma"]),
        seed=int(obj["seed"]),
        A=decode_array(obj["A"], (n, d), FieldTag.COMPLEX),
        b=decode_array(obj["b"], (n,), FieldTag.REAL),
        z_true=None if z is None else decode_array(z, (d,), FieldTag.COMPLEX),
    )


def solution_to_json(sol, relative_error: float | None = None) -> dict:
    """Encode a rounded phase retrieval solution (a `PhasecutSolution`)."""
    return {
        "u": encode_array(sol.u),
        "z_hat": encode_array(sol.z_hat),
        "objective": sol.objective,
        "relative_error": relative_error,
    }


def solution_from_json(obj: dict) -> tuple[np.ndarray, np.ndarray, float, float | None]:
    """Decode a solution file; returns (u, z_hat, objective, relative_error)."""
    n = len(obj["u"])
    d = len(obj["z_hat"])
    err = obj.get("relative_error")
    return (
        decode_array(obj["u"], (n,), FieldTag.COMPLEX),
        decode_array(obj["z_hat"], (d,), FieldTag.COMPLEX),
        float(obj["objective"]),
        None if err is None else float(err),
    )


def factor_to_json(y: np.ndarray, field: FieldTag) -> dict:
    y = np.asarray(y)
    return {
        "n": int(y.shape[0]),
        "k": int(y.shape[1]),
        "field": field.value,
        "Y": encode_array(y),
    }


def factor_from_json(obj: dict) -> tuple[np.ndarray, FieldTag]:
    field = _field_from_name(obj["field"])
    shape = (int(obj["n"]), int(obj["k"]))
    return decode_array(obj["Y"], shape, field), field


def dumps_sorted(obj) -> str:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps_sorted(obj))


def read_json(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
