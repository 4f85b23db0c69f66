import csv
from pathlib import Path

import pytest

from vkc_tamp import cli
from vkc_tamp.domains.scenarios import fixture_path

DATA = Path(cli.__file__).parent / "data"


def _plan(capsys, problem, *extra):
    code = cli.main(["plan", str(DATA / "vkc-domain.pddl"), str(DATA / problem), *extra])
    return code, capsys.readouterr()


def test_plan_fixture_prints_four_line_plan(capsys):
    code, out = _plan(capsys, "rearrange-vkc-m2.pddl", "--algorithm", "iws")
    assert code == 0
    lines = out.out.strip().splitlines()
    assert lines[0].startswith("solved=true")
    assert len(lines[1:]) == 4 and all(l.startswith("(") for l in lines[1:])


def test_plan_unsolvable_exits_2(capsys):
    code, out = _plan(capsys, "rearrange-vkc-unsolvable.pddl")
    assert code == 2
    assert "solved=false" in out.out


def test_plan_malformed_exits_1_with_span(tmp_path, capsys):
    bad = tmp_path / "bad.pddl"
    bad.write_text("(define (problem p)\n  (:domain vkc)\n  (:init (free vkc)\n")
    code = cli.main(["plan", str(DATA / "vkc-domain.pddl"), str(bad)])
    err = capsys.readouterr().err
    assert code == 1
    assert f"{bad}:" in err and any(ch.isdigit() for ch in err.split(str(bad))[1])


def test_plan_writes_out_file(tmp_path, capsys):
    out = tmp_path / "plan.txt"
    code, _ = _plan(capsys, "rearrange-vkc-m2.pddl", "--out", str(out))
    assert code == 0 and len(out.read_text().splitlines()) == 4


def _rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_bench_rearrange_rows_and_reproducibility(tmp_path, capsys):
    args = ["bench-rearrange", "--m", "2", "--m", "4", "--trials", "5"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    rows = _rows(tmp_path / "a" / "bench.csv")
    assert len(rows) == 20
    assert len(_rows(tmp_path / "a" / "summary.csv")) == 4
    assert all(r["plan_length"] for r in rows)

    def strip(rs):
        return [{k: v for k, v in r.items() if k not in cli.WALL_TIME_COLUMNS} for r in rs]
    assert strip(rows) == strip(_rows(tmp_path / "b" / "bench.csv"))
    model = _rows(tmp_path / "a" / "model.csv")
    assert [r["instance"] for r in model] == ["m=2", "m=4"]


def test_motion_rrt_tiny_timeout_fails_gracefully(tmp_path, capsys):
    code = cli.main(["motion", "drawer", "--solver", "rrt", "--trials", "2", "--timeout-s", "0.001",
                     "--out", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "motion.csv")
    assert len(rows) == 2 and all(r["motion_success"] == "false" for r in rows)


def test_motion_rejects_conventional_variant(tmp_path, capsys):
    code = cli.main(["motion", "drawer", "--variant", "conventional", "--out", str(tmp_path)])
    assert code == 1


def test_multistep_step_curve(tmp_path, capsys):
    code = cli.main(["motion", "multistep", "--solver", "trajopt", "--trials", "1", "--out", str(tmp_path)])
    assert code == 0
    curve = _rows(tmp_path / "step_curve.csv")
    assert len(curve) == 8
    rates = [float(r["success_rate"]) for r in curve]
    assert rates == sorted(rates, reverse=True)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("VKC_THREADS", "1")
    assert cli._threads() == 1
    monkeypatch.setenv("VKC_THREADS", "3")
    assert cli._threads() <= 3


def test_validate_scene(capsys):
    assert cli.main(["validate-scene", str(fixture_path("drawer.scene"))]) == 0
    assert "drawer" in capsys.readouterr().out


def test_validate_scene_missing_file(tmp_path, capsys):
    assert cli.main(["validate-scene", str(tmp_path / "none.scene")]) == 1


def test_bad_trial_count(capsys):
    assert cli.main(["bench-rearrange", "--trials", "0"]) == 1
