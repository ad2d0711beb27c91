import json

import pytest

from markovtype import cli

FAST = {
    "gen": ["--space", "laakso:1"],
    "partition": ["--space", "grid:4,4", "--trials", "200"],
    "embed": ["--space", "grid:8,8", "--tau", "4", "--m", "16", "--audit"],
    "mtype": ["--space", "hypercube:4", "--t", "1:16"],
    "enflo": ["--dims", "2:5"],
    "mgverify": ["--space", "diamond:2", "--t", "2,6", "--trials", "64"],
    "tailverify": ["--space", "grid:4,4", "--t", "4", "--trials", "200", "--m", "16"],
}


def run(tmp_path, name, args):
    out = tmp_path / name
    code = cli.run([name, *args, "--out", str(out)])
    return code, out


@pytest.mark.parametrize("command", cli.COMMANDS)
def test_commands_succeed_and_write_manifest(tmp_path, command):
    code, out = run(tmp_path, command, FAST[command])
    assert code == cli.EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_status"] == 0 and manifest["files"]
    assert len(manifest["config_sha256"]) == 64
    assert set(manifest["versions"]) >= {"numpy", "python"}
    for name in manifest["files"]:
        assert (out / name).exists()


def test_mtype_csv_shape(tmp_path):
    _, out = run(tmp_path, "mtype", FAST["mtype"])
    lines = (out / "mtype.csv").read_text().splitlines()
    assert len(lines) == 17


def test_embed_audit_rows(tmp_path):
    _, out = run(tmp_path, "embed", FAST["embed"])
    assert len((out / "audit.csv").read_text().splitlines()) == 1 + 2016


def test_json_format(tmp_path):
    code, out = run(tmp_path, "mtype", FAST["mtype"] + ["--format", "json"])
    assert code == 0
    assert len(json.loads((out / "mtype.json").read_text())["rows"]) == 16


@pytest.mark.parametrize(
    "argv",
    [
        ["mtype", "--space", "nowhere:3"],
        ["mtype", "--t", "5:1"],
        ["tailverify", "--t", "3"],
        ["tailverify", "--p", "3"],
        ["partition", "--eps", "0.9"],
        ["bogus"],
        ["mtype", "--trials", "0"],
        ["gen", "--space", "grid:3"],
    ],
)
def test_config_errors_exit_3(tmp_path, argv):
    assert cli.run([*argv, "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_config_file_layering(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"space": "hypercube:3", "t": "1:4"}))
    code, out = run(tmp_path, "mtype", ["--config", str(cfg), "--t", "1:2"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["space"] == "hypercube:3" and manifest["config"]["t"] == [1, 2]


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"spcae": "grid:2,2"}))
    assert cli.run(["gen", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "spcae" in capsys.readouterr().err


def test_bad_config_json_names_line(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n"space": \n}')
    assert cli.run(["gen", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "c.json:3" in capsys.readouterr().err


def test_graph_file_parse_error(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("3 2\n0 1 1\n1 2 zz\n")
    assert cli.run(["gen", "--space", str(g), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "g.txt:3" in capsys.readouterr().err


def test_graph_file_input(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("3 2\n0 1 1\n1 2 2.5\n")
    code, out = run(tmp_path, "mtype", ["--space", str(g), "--t", "1:3"])
    assert code == 0


def test_invariant_violation_exit_2(tmp_path, monkeypatch):
    from markovtype.errors import InvariantViolation

    def boom(args):
        raise InvariantViolation("test invariant", "instance 7")

    monkeypatch.setitem(cli.HANDLERS, "gen", boom)
    code, out = run(tmp_path, "gen", [])
    assert code == cli.EXIT_INVARIANT
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["error"] == {"invariant": "test invariant", "instance": "instance 7"}


@pytest.mark.parametrize("command", ["partition", "mtype", "mgverify"])
def test_reruns_are_byte_identical(tmp_path, command):
    _, a = run(tmp_path / "a", command, FAST[command])
    _, b = run(tmp_path / "b", command, FAST[command])
    files = json.loads((a / "manifest.json").read_text())["files"]
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
