import json
import math

import pytest
from click.testing import CliRunner

from reinhardt import __version__, extremals
from reinhardt.cli import count_straight_edges, main
from reinhardt.errors import RankDeficiency

OCTAGON_DENSITY = (8 - math.sqrt(32) - math.log(2)) / (math.sqrt(8) - 1)


def run(tmp_path, *args, seed=0, formats=("csv", "json")):
    opts = ["--out", str(tmp_path), "--seed", str(seed)]
    for f in formats:
        opts += ["--format", f]
    return CliRunner().invoke(main, [*opts, *args])


def test_version_and_help():
    result = CliRunner().invoke(main, ["--version"])
    assert result.exit_code == 0 and __version__ in result.output
    assert CliRunner().invoke(main, ["--help"]).exit_code == 0


def test_octagon_json(tmp_path):
    result = run(tmp_path, "polygon", "--k", "1")
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "polygon_plus_1.json").read_text())
    assert data["polygon"]["density"] == pytest.approx(OCTAGON_DENSITY, abs=1e-9)
    assert round(data["polygon"]["density"], 6) == 0.902414
    assert data["provenance"]["version"] == __version__
    assert data["provenance"]["tolerances"] == {"abs": 1e-12, "rel": 1e-12}
    assert data["provenance"]["params"]["k"] == 1
    assert data["boundary"]["straight_edges"] == 8


def test_fourteen_gon_edges(tmp_path):
    result = run(tmp_path, "polygon", "--k", "2", formats=("json", "svg"))
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "polygon_plus_2.json").read_text())
    assert data["boundary"]["straight_edges"] == 14
    assert (tmp_path / "polygon_plus_2.svg").read_text().startswith("<svg")
    assert not (tmp_path / "polygon_plus_2.csv").exists()


def test_degenerate_minus_member(tmp_path):
    result = run(tmp_path, "polygon", "--k", "1", "--family", "minus")
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "polygon_minus_1.json").read_text())
    assert data["polygon"]["area"] == pytest.approx(math.sqrt(12))


def test_usage_errors(tmp_path):
    assert run(tmp_path, "polygon", "--k", "0").exit_code == 2
    assert run(tmp_path, "polygon").exit_code == 2
    assert run(tmp_path, "density-table", "--k-max", "0").exit_code == 2
    assert CliRunner().invoke(main, ["--tol-abs", "0", "polygon", "--k", "1"]).exit_code == 2


def test_contract_violation_exit_code(tmp_path, monkeypatch):
    def broken(*_args, **_kwargs):
        raise RankDeficiency("singular system")
    monkeypatch.setattr(extremals, "solve_polygon", broken)
    result = run(tmp_path, "polygon", "--k", "1")
    assert result.exit_code == 3
    assert "RankDeficiency" in result.output


def test_density_table(tmp_path):
    result = run(tmp_path, "density-table", "--k-max", "4")
    assert result.exit_code == 0, result.output
    rows = json.loads((tmp_path / "density_table.json").read_text())["rows"]
    octagon = next(r for r in rows if r[0] == 8)
    assert octagon[3] == pytest.approx(3.126, abs=1e-3)
    plus = [r[3] for r in rows if r[1] == "plus"]
    assert plus == sorted(plus) and max(plus) < math.pi
    assert all(r[3] > math.pi for r in rows if r[1] == "minus" and 2 <= r[2] <= 4)


def test_same_seed_gives_identical_bytes(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert run(out, "fuller", "basin", "--samples", "20", "--boundary-samples", "50",
                   seed=3).exit_code == 0
    for name in ("basin_iterates.csv", "basin.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_fuller_fixed(tmp_path):
    result = run(tmp_path, "fuller", "fixed")
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "fixed_points.json").read_text())
    assert f"{data['r_scale']:.12f}" == "6.274167399525"
    assert data["switch_time"] == pytest.approx(7.4, abs=0.01)
    assert "t_sw=7.4" in result.output


def test_fuller_special(tmp_path):
    result = run(tmp_path, "fuller", "special", "--t-max", "20", "--samples", "201")
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "special.json").read_text())
    assert data["crossing_time"] == pytest.approx(0.9, abs=0.05)


def test_fuller_basin_small(tmp_path):
    result = run(tmp_path, "fuller", "basin", "--samples", "25", "--boundary-samples", "100")
    assert result.exit_code == 0, result.output
    assert "converged: 25/25" in result.output


def test_fuller_spiral(tmp_path):
    result = run(tmp_path, "fuller", "spiral", "--samples", "50")
    assert result.exit_code == 0, result.output
    drift = json.loads((tmp_path / "spiral.json").read_text())["integrator_vs_closed_form"]
    assert drift < 1e-8
    assert (tmp_path / "log_spiral.csv").read_text().startswith("t,re_z1")


def test_count_straight_edges_on_a_square():
    import numpy as np
    side = np.linspace(0, 1, 10, endpoint=False)
    square = np.concatenate([np.column_stack([side, 0 * side]),
                             np.column_stack([1 + 0 * side, side]),
                             np.column_stack([1 - side, 1 + 0 * side]),
                             np.column_stack([0 * side, 1 - side])])
    assert count_straight_edges(square) == 4


def test_unstable_trace(tmp_path):
    result = run(tmp_path, "unstable")
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "unstable.json").read_text())
    assert data["boundary_hit"] == pytest.approx([0.21, -3.03], abs=0.02)
    header = (tmp_path / "unstable_curve.csv").read_text().splitlines()[0]
    assert header == "r,xt21,lt11,lt21"


def test_chaos_outputs(tmp_path):
    result = run(tmp_path, "chaos", "--t-max", "5", "--samples", "201")
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "chaos.json").read_text())
    assert set(summary) == {"3.0", "2.5", "provenance"}
    lines = (tmp_path / "chaos_A2.5.csv").read_text().splitlines()
    assert lines[0] == "t,abs_w_1,abs_w_2" and len(lines) == 202
