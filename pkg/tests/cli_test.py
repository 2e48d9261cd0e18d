import json

from quasilocal_lab.cli import build_parser, main


def _scene(tmp_path):
    path = tmp_path / "flat.json"
    path.write_text(
        json.dumps(
            {
                "name": "cli_flat",
                "data": {"catalog": "flat"},
                "grid": [8, 16],
                "surfaces": [{"id": "S1", "kind": "sphere", "radius": 2.0}],
                "tasks": [{"kind": "expansions", "surface": "S1"}],
            }
        )
    )
    return path


def test_parser_defaults():
    args = build_parser().parse_args(["run", "a.json", "b.json", "--threads", "2"])
    assert args.verb == "run"
    assert [str(p) for p in args.scenes] == ["a.json", "b.json"]
    assert args.threads == 2
    assert args.format is None


def test_describe(capsys):
    assert main(["describe", "BY"]) == 0
    assert "H0" in capsys.readouterr().out
    assert main(["describe"]) == 0
    assert "fillin" in capsys.readouterr().out


def test_unknown_topic_exit_code():
    assert main(["describe", "Hawking"]) == 2


def test_validate(tmp_path):
    assert main(["validate", str(_scene(tmp_path))]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["validate", str(bad)]) == 2


def test_run_json(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(_scene(tmp_path)), "--out", str(out), "--format", "json", "--seed", "3"]) == 0
    payload = json.loads((out / "cli_flat" / "task_00_expansions.json").read_text())
    assert payload["meta"]["seed"] == 3
    assert payload["results"][0]["classification"] == "untrapped"
