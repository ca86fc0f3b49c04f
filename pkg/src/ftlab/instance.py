"""Instance files: one system-environment problem as JSON.

    {
      "layout": {"system": {"sites": [{"label": "S1", "dim": 2}, ...]},
                 "environment": {"sites": [{"label": "E1", "dim": 2}, ...]}},
      "rho_S": [[[re, im], ...], ...],
      "rho_E": [matrix for E1, matrix for E2, ...],
      "U":     [matrix acting on (S1, E1), matrix acting on (S2, E2), ...]
    }

Matrices are row-major nested lists of [re, im] pairs. ``layout`` may be
omitted; labels then default to S1.., E1.. and dimensions are read off the
matrices.
"""
from __future__ import annotations

import json
from pathlib import Path

from .errors import FormatError, ValidationError
from .qcore import Layout, matrix_from_json, matrix_to_json
from .qstates import DensityState, UnitaryGate


def _state(data, layout: Layout, path: str) -> DensityState:
    m = matrix_from_json(data, path)
    try:
        return DensityState(m, layout)
    except ValidationError as exc:
        raise ValidationError(str(exc).split(": ", 1)[-1], path=path) from None


def parse_instance(data: dict) -> tuple[DensityState, list[DensityState], list[UnitaryGate]]:
    if not isinstance(data, dict):
        raise FormatError("instance must be a JSON object")
    for key in ("rho_S", "rho_E", "U"):
        if key not in data:
            raise FormatError(f"missing field {key!r}")
    if not isinstance(data["rho_E"], list) or not isinstance(data["U"], list):
        raise FormatError("'rho_E' and 'U' must be lists with one entry per site")
    n_sites = len(data["rho_E"])
    if len(data["U"]) != n_sites or n_sites == 0:
        raise FormatError(f"need equal, non-zero numbers of environment states and gates "
                          f"(got {n_sites} and {len(data['U'])})")

    env_mats = [matrix_from_json(m, f"rho_E[{j}]") for j, m in enumerate(data["rho_E"])]
    gate_mats = [matrix_from_json(m, f"U[{j}]") for j, m in enumerate(data["U"])]
    if "layout" in data:
        try:
            sys_layout = Layout.from_dict(data["layout"]["system"])
            env_layout = Layout.from_dict(data["layout"]["environment"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"layout: malformed ({exc})") from None
    else:
        env_dims = [m.shape[0] for m in env_mats]
        sys_dims = []
        for j, (u, e) in enumerate(zip(gate_mats, env_dims)):
            if u.shape[0] % e:
                raise ValidationError(f"dimension {u.shape[0]} not divisible by environment dimension {e}",
                                      path=f"U[{j}]")
            sys_dims.append(u.shape[0] // e)
        sys_layout = Layout.from_dims("S", sys_dims)
        env_layout = Layout.from_dims("E", env_dims)
    if len(sys_layout) != n_sites or len(env_layout) != n_sites:
        raise FormatError("layout: site counts do not match rho_E/U")

    rho_S = _state(data["rho_S"], sys_layout, "rho_S")
    rho_E = [_state(d, Layout((env_layout.sites[j],)), f"rho_E[{j}]") for j, d in enumerate(data["rho_E"])]
    gates = []
    for j, m in enumerate(gate_mats):
        try:
            gates.append(UnitaryGate(m, (sys_layout.labels[j], env_layout.labels[j])))
        except ValidationError as exc:
            raise ValidationError(str(exc).split(": ", 1)[-1], path=f"U[{j}]") from None
    return rho_S, rho_E, gates


def load_instance(path) -> tuple[DensityState, list[DensityState], list[UnitaryGate]]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    return parse_instance(data)


def instance_to_dict(rho_S: DensityState, rho_E, gates) -> dict:
    return {
        "layout": {
            "system": rho_S.layout.to_dict(),
            "environment": {"sites": [{"label": r.layout.labels[0], "dim": r.dim} for r in rho_E]},
        },
        "rho_S": matrix_to_json(rho_S.matrix),
        "rho_E": [matrix_to_json(r.matrix) for r in rho_E],
        "U": [matrix_to_json(g.matrix) for g in gates],
    }


def save_instance(path, rho_S: DensityState, rho_E, gates) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(rho_S, rho_E, gates)))
