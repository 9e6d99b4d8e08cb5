import json
import math
from pathlib import Path

import numpy as np
import pytest

from principal_forge.curve import FrenetCurve
from principal_forge.theta import solve_theta
from principal_forge.exception import TooFewSamples
from principal_forge.germ import build_mesh, build_germ
from principal_forge.hyperbolicity import Verdict, SweepRow
from principal_forge.artifacts import (
    write_obj,
    write_json,
    read_samples,
    round_floats,
    format_float,
    germ_descriptor,
    write_sweep_csv,
    write_theta_csv,
)


def test_round_floats():
    data = {
        "pi": math.pi,
        "numpy": np.float64(1 / 3),
        "count": np.int64(3),
        "flag": np.bool_(True),
        "missing": math.nan,
        "verdict": Verdict.HYPERBOLIC,
        "path": Path("out") / "report.json",
        "array": np.array([0.1, math.inf]),
        1: (1.0, None),
    }

    assert round_floats(data) == {
        "pi": 3.14159265359,
        "numpy": 0.333333333333,
        "count": 3,
        "flag": True,
        "missing": None,
        "verdict": "Hyperbolic",
        "path": "out/report.json",
        "array": [0.1, None],
        "1": [1.0, None],
    }
    assert format_float(1e-20) == "1e-20"


def test_json_is_reproducible(tmp_path: Path):
    data = {"lambda": -0.123456789012345, "name": "环面"}
    first = write_json(tmp_path / "a" / "report.json", data)
    second = write_json(tmp_path / "b.json", data)

    assert first.read_bytes() == second.read_bytes()
    assert json.loads(first.read_text(encoding="utf-8")) == {
        "lambda": -0.123456789012,
        "name": "环面",
    }


def test_sweep_csv_leaves_umbilic_rows_blank(tmp_path: Path):
    rows = [SweepRow(0.0, None, None, 512), SweepRow(0.5, 0.25, -1.0, 0)]
    path = write_sweep_csv(tmp_path / "sweep.csv", rows)

    assert path.read_text(encoding="utf-8") == (
        "theta0,lambda,dlambda,umbilic_count\n0,,,512\n0.5,0.25,-1,0\n"
    )


def test_theta_csv(tmp_path: Path, spherical: FrenetCurve):
    theta = solve_theta(spherical, 0.2)
    lines = (
        write_theta_csv(tmp_path / "theta.csv", spherical, theta)
        .read_text(encoding="utf-8")
        .splitlines()
    )

    assert lines[0] == "s,theta"
    assert lines[1] == "0,0.2"
    assert len(lines) == spherical.resolution + 1


def test_obj_faces_are_one_based(tmp_path: Path, spherical: FrenetCurve):
    mesh = build_mesh(build_germ(spherical, solve_theta(spherical, 0.2)), 16, 3)
    lines = write_obj(tmp_path / "strip.obj", mesh).read_text().splitlines()

    assert lines[0].startswith("# principal strip 16 x 3")
    vertices = [line for line in lines if line.startswith("v ")]
    faces = [list(map(int, line.split()[1:])) for line in lines if line[0] == "f"]
    assert len(vertices) == 48
    assert len(faces) == 32
    assert min(min(face) for face in faces) == 1
    assert max(max(face) for face in faces) == 48


def test_germ_descriptor(spherical: FrenetCurve):
    descriptor = germ_descriptor(build_germ(spherical, solve_theta(spherical, 0.2)))

    assert descriptor["schema_version"] == 1
    assert descriptor["curve"]["family"] == "spherical"
    assert descriptor["theta0"] == 0.2
    assert descriptor["profiles"]["eps"] == 0.0
    json.dumps(round_floats(descriptor))


def test_read_samples(tmp_path: Path):
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps([[0, 0, 0], [1, 0, 0]]))
    points, closed, tol = read_samples(bare)
    assert points.shape == (2, 3)
    assert closed and tol == 1e-9

    wrapped = tmp_path / "wrapped.json"
    wrapped.write_text(
        json.dumps({"points": [[0, 0, 0]], "closed": False, "tol": 1e-6})
    )
    points, closed, tol = read_samples(wrapped)
    assert points.shape == (1, 3)
    assert not closed and tol == 1e-6


@pytest.mark.parametrize("content", [None, "not json", '[["x", 0, 0]]'])
def test_read_samples_rejects(tmp_path: Path, content):
    path = tmp_path / "samples.json"
    if content is not None:
        path.write_text(content)

    with pytest.raises(TooFewSamples) as info:
        read_samples(path)
    assert info.value.exit_code == 3
