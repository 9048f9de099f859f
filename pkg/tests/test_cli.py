"""End-to-end tests of the command line interface.

Every test drives ``cli.main`` in-process with explicit argv lists and
checks exit codes, report contents, and the error channel.
"""

import json

import pytest

from polydeflate import cli
from polydeflate.polysys import parse_system

from conftest import FIXTURES


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def point_file(tmp_path, name, values):
    pairs = [[z.real, z.imag] for z in map(complex, values)]
    return write_json(tmp_path / name, pairs)


def fixture(name):
    return str(FIXTURES / name)


def strip_wall_time(path):
    return [line for line in path.read_text().splitlines()
            if "wall_time_seconds" not in line]


def test_solve_double_root(tmp_path, capsys):
    start = point_file(tmp_path, "p.json", [0.1])
    out = tmp_path / "report.json"
    rc = cli.main(["solve", "--system", fixture("square.ps"),
                   "--point", start, "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["status"] == "converged_regular"
    assert report["deflations"] == 1
    assert report["corank_sequence"] == [1, 0]
    assert report["corank_arrow"] == "1 -> 0"
    assert report["residual_final"] <= 1e-12
    assert abs(complex(*report["solution"][0])) <= 1e-12
    assert len(report["stages"]) == 1
    assert report["stages"][0]["corank_before"] == 1
    assert list(report)[-1] == "wall_time_seconds"
    assert "square: converged_regular" in capsys.readouterr().out


def test_solve_regular_root_no_deflation(tmp_path):
    system = tmp_path / "reg.ps"
    system.write_text("1\nx\nx^2 - 1;\n")
    start = point_file(tmp_path, "p.json", [1.2])
    out = tmp_path / "report.json"
    rc = cli.main(["solve", "--system", str(system),
                   "--point", start, "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["deflations"] == 0
    assert report["corank_sequence"] == [0]
    assert report["stages"] == []


def test_solve_with_reference_digits(tmp_path):
    start = point_file(tmp_path, "p.json", [1e-3, 0.7e-3, 1.2e-3])
    root = point_file(tmp_path, "root.json", [0.0, 0.0, 0.0])
    out = tmp_path / "report.json"
    rc = cli.main(["solve", "--system", fixture("cross_cubes.ps"),
                   "--point", start, "--reference", root, "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["correct_digits_final"] >= 12
    assert report["correct_digits_initial"] <= 4


def test_solve_nonconvergent_exits_two(tmp_path):
    # from a real start Newton on x^2 + 1 stays real and never converges
    system = tmp_path / "noroot.ps"
    system.write_text("1\nx\nx^2 + 1;\n")
    start = point_file(tmp_path, "p.json", [100.0])
    out = tmp_path / "report.json"
    rc = cli.main(["solve", "--system", str(system),
                   "--point", start, "--out", str(out)])
    assert rc == 2
    report = json.loads(out.read_text())
    assert report["status"] == "max_iter"


def test_solve_stage_cap_exits_two(tmp_path):
    start = point_file(tmp_path, "p.json", [1e-3, 1e-2])
    out = tmp_path / "report.json"
    rc = cli.main(["solve", "--system", fixture("axis_quartic.ps"),
                   "--point", start, "--max-deflations", "1",
                   "--out", str(out)])
    assert rc == 2
    report = json.loads(out.read_text())
    assert report["deflations"] == 1
    assert report["status"] == "stalled_singular"


def test_solve_emits_deflated_system(tmp_path):
    start = point_file(tmp_path, "p.json", [0.1])
    out = tmp_path / "report.json"
    emitted = tmp_path / "deflated.ps"
    rc = cli.main(["solve", "--system", fixture("square.ps"),
                   "--point", start, "--out", str(out),
                   "--emit-deflated", str(emitted)])
    assert rc == 0
    text = emitted.read_text()
    assert "# deflation stages: 1" in text
    reparsed = parse_system(text)
    assert reparsed.neqs == 3
    assert reparsed.nvars == 2


def test_solve_fan_out(tmp_path, capsys):
    starts = write_json(tmp_path / "starts.json",
                        [[[0.1, 0.0]], [[0.2, 0.0]], [[-0.15, 0.05]]])
    out = tmp_path / "reports.json"
    rc = cli.main(["solve", "--system", fixture("square.ps"),
                   "--points", starts, "--seed", "7", "--out", str(out)])
    assert rc == 0
    reports = json.loads(out.read_text())
    assert [r["seed"] for r in reports] == [7, 8, 9]
    assert all(r["status"] == "converged_regular" for r in reports)
    assert capsys.readouterr().out.count("converged_regular") == 3


def test_fan_out_rejects_emit_deflated(tmp_path, capsys):
    starts = write_json(tmp_path / "starts.json", [[[0.1, 0.0]]])
    rc = cli.main(["solve", "--system", fixture("square.ps"),
                   "--points", starts, "--out", str(tmp_path / "r.json"),
                   "--emit-deflated", str(tmp_path / "g.ps")])
    assert rc == 1
    assert "--emit-deflated" in capsys.readouterr().err


def test_solve_reports_are_deterministic(tmp_path):
    start = point_file(tmp_path, "p.json", [1e-3, 1.3e-3])
    first, second, other = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
    argv = ["solve", "--system", fixture("cubic_trio.ps"), "--point", start]
    assert cli.main(argv + ["--out", str(first)]) == 0
    assert cli.main(argv + ["--out", str(second)]) == 0
    assert cli.main(argv + ["--seed", "99", "--out", str(other)]) == 0
    assert strip_wall_time(first) == strip_wall_time(second)
    assert strip_wall_time(first) != strip_wall_time(other)


def test_parse_error_location_and_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.ps"
    bad.write_text("1\nx\nx^2 + ;\n")
    start = point_file(tmp_path, "p.json", [0.1])
    rc = cli.main(["solve", "--system", str(bad),
                   "--point", start, "--out", str(tmp_path / "r.json")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "line 3" in err
    assert "column 7" in err


def test_missing_system_file_exits_one(tmp_path, capsys):
    start = point_file(tmp_path, "p.json", [0.1])
    rc = cli.main(["solve", "--system", str(tmp_path / "absent.ps"),
                   "--point", start, "--out", str(tmp_path / "r.json")])
    assert rc == 1
    assert "absent.ps" in capsys.readouterr().err


def test_malformed_point_file_exits_one(tmp_path, capsys):
    bad_point = write_json(tmp_path / "p.json", [[1.0]])
    rc = cli.main(["solve", "--system", fixture("square.ps"),
                   "--point", bad_point, "--out", str(tmp_path / "r.json")])
    assert rc == 1
    assert "[re, im]" in capsys.readouterr().err


def test_wrong_point_length_exits_one(tmp_path, capsys):
    start = point_file(tmp_path, "p.json", [0.1, 0.2])
    rc = cli.main(["solve", "--system", fixture("square.ps"),
                   "--point", start, "--out", str(tmp_path / "r.json")])
    assert rc == 1
    assert "expected 1" in capsys.readouterr().err


def test_usage_error_exits_one(capsys):
    rc = cli.main(["solve", "--system", "whatever.ps"])
    assert rc == 1
    assert "required" in capsys.readouterr().err


def test_deflate_writes_expanded_system(tmp_path, capsys):
    start = point_file(tmp_path, "p.json", [1e-3])
    out = tmp_path / "deflated.ps"
    rc = cli.main(["deflate", "--system", fixture("square.ps"),
                   "--point", start, "--rank-tol", "1e-2",
                   "--seed", "11", "--out", str(out)])
    assert rc == 0
    text = out.read_text()
    assert "# deflation stages: 1" in text
    assert "# stage 1 rank: 0" in text
    reparsed = parse_system(text)
    assert reparsed.neqs == 3
    assert reparsed.nvars == 2
    assert "3 equations" in capsys.readouterr().out


def test_deflate_regular_point_exits_two(tmp_path, capsys):
    system = tmp_path / "reg.ps"
    system.write_text("1\nx\nx^2 - 1;\n")
    start = point_file(tmp_path, "p.json", [1.0])
    rc = cli.main(["deflate", "--system", str(system),
                   "--point", start, "--out", str(tmp_path / "g.ps")])
    assert rc == 2
    assert "full column rank" in capsys.readouterr().err


def test_multiplicity_double_root(tmp_path, capsys):
    point = point_file(tmp_path, "p.json", [0.0])
    rc = cli.main(["multiplicity", "--system", fixture("square.ps"),
                   "--point", point])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "2"


def test_multiplicity_regular_root(tmp_path, capsys):
    system = tmp_path / "reg.ps"
    system.write_text("1\nx\nx^2 - 1;\n")
    point = point_file(tmp_path, "p.json", [1.0])
    rc = cli.main(["multiplicity", "--system", str(system), "--point", point])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "1"


def test_multiplicity_order_cap_exits_three(tmp_path, capsys):
    point = point_file(tmp_path, "p.json", [0.0, 0.0])
    rc = cli.main(["multiplicity", "--system", fixture("cubic_trio.ps"),
                   "--point", point, "--max-order", "2"])
    assert rc == 3
    assert "did not stabilize" in capsys.readouterr().err


def test_multiplicity_rejects_non_root(tmp_path, capsys):
    point = point_file(tmp_path, "p.json", [1.0])
    rc = cli.main(["multiplicity", "--system", fixture("square.ps"),
                   "--point", point])
    assert rc == 1
    assert "not an approximate root" in capsys.readouterr().err


def test_bench_reports_ratio(tmp_path, capsys):
    rc = cli.main(["bench", "--system", fixture("bench9.ps"),
                   "--stages", "1", "--trials", "30"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "bench9 (9 equations, 9 variables)" in out
    assert "19 equations, 17 variables" in out
    assert "equivalence over 20 points" in out
    assert "ratio:" in out
    assert "below benchmark size" not in out


def test_bench_flags_small_systems(tmp_path, capsys):
    point = point_file(tmp_path, "p.json", [0.0])
    rc = cli.main(["bench", "--system", fixture("square.ps"),
                   "--point", point, "--stages", "1", "--trials", "10"])
    assert rc == 0
    assert "below benchmark size" in capsys.readouterr().out


def test_bench_rejects_unreachable_stage_count(tmp_path, capsys):
    point = point_file(tmp_path, "p.json", [0.0])
    rc = cli.main(["bench", "--system", fixture("square.ps"),
                   "--point", point, "--stages", "2", "--trials", "10"])
    assert rc == 2
    assert "regular after 1 stage(s)" in capsys.readouterr().err
