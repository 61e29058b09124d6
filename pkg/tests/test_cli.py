import pytest

from payplace.cli import main
from payplace.simulator import read_trace


def test_run_builtin(tmp_path, capsys):
    out = tmp_path / "b.trc"
    assert main(["run", "--scenario", "appendix_b", "--trace", str(out)]) == 0
    trace = read_trace(out.read_text().splitlines())
    assert trace.ok and trace.scenario == "appendix_b"
    assert "0 violations" in capsys.readouterr().err


def test_run_file_and_list(tmp_path, capsys):
    from payplace.simulator import builtin
    path = tmp_path / "c.yaml"
    path.write_text(builtin("appendix_c").dump())
    assert main(["run", "--scenario", str(path), "--trace", str(tmp_path / "c.trc")]) == 0
    assert main(["run", "--list"]) == 0
    assert "appendix_c" in capsys.readouterr().out


def test_run_with_violation_exits_1(tmp_path):
    from payplace.simulator import builtin
    sc = builtin("appendix_b")
    sc.expect = [{"tick": 100, "kind": "withdrawal", "merchant": "p1", "value": 999}]
    path = tmp_path / "bad.yaml"
    path.write_text(sc.dump())
    assert main(["run", "--scenario", str(path), "--trace", str(tmp_path / "x")]) == 1


@pytest.mark.parametrize("text,key", [
    ("schema: payplace-scenario/1\nname: x\nseed: 1\n", "timing"),
    ("x: [", "<yaml>"),
    ("- 1\n", "<root>"),
])
def test_unreadable_scenario_exits_2(tmp_path, capsys, text, key):
    path = tmp_path / "s.yaml"
    path.write_text(text)
    assert main(["run", "--scenario", str(path)]) == 2
    err = capsys.readouterr().err
    assert key in err and "\n" == err[-1] and err.count("\n") == 1


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["run", "--scenario", "nope"]) == 2
    assert main(["cost"]) == 2
    assert main(["cost", "--fig", "7", "--param", "n=1"]) == 2
    assert main(["cost", "--param", "q=1"]) == 2
    assert main(["attacks", "--case", "nope"]) == 2


def test_attacks_report(tmp_path):
    out = tmp_path / "r.tsv"
    assert main(["attacks", "--report", str(out), "--case", "stale_commit", "--case", "rogue_key"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("case\t") and len(lines) == 3
    assert all(l.endswith("PASS") for l in lines[1:])


def test_cost_outputs(tmp_path, capsys):
    out = tmp_path / "f7.csv"
    assert main(["cost", "--fig", "7", "--out", str(out)]) == 0
    assert out.read_text().startswith("# payplace-cost/1\n")
    assert main(["cost", "--param", "n=100", "--param", "p_r=10"]) == 0
    assert "custom" in capsys.readouterr().out
    grid = tmp_path / "g.yaml"
    grid.write_text("points:\n  - {series: a, n: 10, p_r: 4, p_m: 2}\n  - {series: b, n: 10, p_r: 4}\n")
    assert main(["cost", "--grid", str(grid), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4
    grid.write_text("points:\n  - {bogus: 1}\n")
    assert main(["cost", "--grid", str(grid)]) == 2


def test_inspect(tmp_path, capsys):
    trc = tmp_path / "b.trc"
    main(["run", "--scenario", "appendix_b", "--trace", str(trc)])
    capsys.readouterr()
    assert main(["inspect", str(trc), "--action", "withdraw"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all("\twithdraw\t" in l for l in lines)
    assert main(["inspect", str(trc), "--since", "81", "--until", "81", "--data"]) == 0
    assert all(l.startswith("81\t") for l in capsys.readouterr().out.splitlines())
    assert main(["inspect", str(tmp_path / "missing.trc")]) == 2
    trc.write_text("not json\n")
    assert main(["inspect", str(trc)]) == 2


def test_byte_identical_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for p in (a, b):
        main(["run", "--scenario", "attack_double_spend", "--trace", str(p)])
    assert a.read_bytes() == b.read_bytes()
