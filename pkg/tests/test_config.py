import json

from monoreg import config


def _isolate(monkeypatch, tmp_path):
    monkeypatch.delenv("MONOREG_CONFIG", raising=False)
    monkeypatch.setenv("HOME", str(tmp_path / "home"))
    monkeypatch.setattr(config, "WORKSPACE", str(tmp_path / "ws"))


def test_defaults_without_files(monkeypatch, tmp_path):
    _isolate(monkeypatch, tmp_path)
    loaded = config._load_config()
    assert loaded["cert_tol"] == 1e-9
    assert loaded["enum_cap"] == 2 ** 20
    assert loaded["point_budget"] == 14
    assert loaded["point_tol"] == 1e-4


def test_explicit_path_wins(monkeypatch, tmp_path):
    _isolate(monkeypatch, tmp_path)
    explicit = tmp_path / "mine.json"
    explicit.write_text(json.dumps({"cert_tol": "1e-6", "trials": 5.0, "colour": "blue"}))
    workspace = tmp_path / "ws" / ".monoreg"
    workspace.mkdir(parents=True)
    (workspace / "config.json").write_text(json.dumps({"trials": 99}))
    monkeypatch.setenv("MONOREG_CONFIG", str(explicit))
    loaded = config._load_config()
    assert loaded["cert_tol"] == 1e-6
    assert loaded["trials"] == 5 and isinstance(loaded["trials"], int)
    assert "colour" not in loaded


def test_workspace_file(monkeypatch, tmp_path):
    _isolate(monkeypatch, tmp_path)
    workspace = tmp_path / "ws" / ".monoreg"
    workspace.mkdir(parents=True)
    (workspace / "config.json").write_text(json.dumps({"univariate_mesh": 400}))
    assert config._load_config()["univariate_mesh"] == 400


def test_broken_file_falls_back(monkeypatch, tmp_path, capsys):
    _isolate(monkeypatch, tmp_path)
    broken = tmp_path / "broken.json"
    broken.write_text("[1, 2]")
    monkeypatch.setenv("MONOREG_CONFIG", str(broken))
    assert config._load_config()["seed"] == 0
    assert "Failed to load config" in capsys.readouterr().err
