import json
import shutil
from pathlib import Path

import pytest

from visvol.cli import main
from visvol.config import ConfigError, config_from_dict, parse_config, polygon_from_obj

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
TRI = [[0, 0, 0], [10, 0, 0], [5, 8, 0]]


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, "scene_path: s.obj\npolygon: [[0,0,0],[1,0,0],[0,1,0]]\nd_max: 100\n"))
    assert cfg.d_max == 100.0
    assert (cfg.n_phi, cfg.n_theta) == (160, 80)
    assert cfg.extraction_resolution == (96, 96, 96)
    assert cfg.backend == "raycast" and cfg.validate is False
    assert cfg.scene_path == tmp_path / "s.obj"


@pytest.mark.parametrize("extra, key", [
    ({"d_max": -5}, "d_max"),
    ({"d_max": "far"}, "d_max"),
    ({"n_phi": 3}, "n_phi"),
    ({"n_theta": 2.5}, "n_theta"),
    ({"extraction_resolution": [96, 96]}, "extraction_resolution"),
    ({"backend": "gpu"}, "backend"),
    ({"nav_constraints": {"altitude_band": [600, 500]}}, "nav_constraints.altitude_band"),
    ({"nav_constraints": {"box": {"min": [0, 0, 0], "max": [1, 1]}}}, "nav_constraints.box.max"),
    ({"nav_constraints": {"cylinder": 1}}, "nav_constraints.cylinder"),
    ({"validate": "yes"}, "validate"),
    ({"colour": "red"}, "colour"),
    ({"schema_version": 2}, "schema_version"),
    ({"polygon": [[0, 0, 0], [1, 0, 0]]}, "polygon"),
    ({"polygon": [[0, 0, 0], [1, 0], [0, 1, 0]]}, "polygon[1]"),
])
def test_validation_errors_name_key(extra, key):
    raw = {"polygon": TRI, "d_max": 10, **extra}
    with pytest.raises(ConfigError) as err:
        config_from_dict(raw)
    assert str(err.value).startswith(key + ":")


def test_missing_required_key():
    with pytest.raises(ConfigError, match="^d_max: missing"):
        config_from_dict({"polygon": TRI})


def test_duplicate_key(tmp_path):
    with pytest.raises(ConfigError, match="d_max: duplicate"):
        parse_config(write(tmp_path, "polygon: [[0,0,0],[1,0,0],[0,1,0]]\nd_max: 1\nd_max: 2\n"))


def test_altitude_band_forms():
    a = config_from_dict({"polygon": TRI, "d_max": 1, "nav_constraints": {"altitude_band": [1, 2]}})
    b = config_from_dict({"polygon": TRI, "d_max": 1,
                          "nav_constraints": {"altitude_band": {"z_lo": 1, "z_hi": 2}}})
    assert a.nav_altitude == b.nav_altitude == (1.0, 2.0)


def test_polygon_from_obj(tmp_path):
    (tmp_path / "poly.obj").write_text("# outline\nv 0 0 0\nv 4 0 0\nv 0 3 0\nl 1 2 3 1\n")
    assert polygon_from_obj(tmp_path / "poly.obj") == [(0, 0, 0), (4, 0, 0), (0, 3, 0)]
    cfg = parse_config(write(tmp_path, "polygon: {obj: poly.obj}\nd_max: 5\n"))
    assert cfg.polygon[1] == (4.0, 0.0, 0.0)


def run_cli(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_compute_two_buildings(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "compute", "--config", FIXTURES / "two_buildings" / "config.yaml",
                           "--output-dir", tmp_path, "--validate", "--seed", 1)
    assert code == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert {"sphere_0.obj", "sphere_1.obj", "sphere_2.obj", "volume.obj", "report.json"} <= names
    report = json.loads((tmp_path / "report.json").read_text())
    listed = {m["path"] for m in report["manifest"] if m["path"]}
    assert listed == names
    assert report["validation"]["seed"] == 1
    assert "timings" in report and "total" in report["timings"]
    code, out, _ = run_cli(capsys, "report", "--input", tmp_path / "report.json")
    assert code == 0 and "oracle agreement" in out


def test_malformed_yaml(tmp_path, capsys):
    cfg = write(tmp_path, "polygon: [[0,0,0],[1,0,0]\nd_max: 5\n")
    code, _, err = run_cli(capsys, "compute", "--config", cfg)
    assert code != 0 and "error [config]" in err and "<yaml>" in err


def test_errors_are_module_tagged(tmp_path, capsys):
    cfg = write(tmp_path, "scene_path: missing.obj\npolygon: [[0,0,0],[10,0,0],[5,8,0]]\nd_max: 5\n")
    code, _, err = run_cli(capsys, "compute", "--config", cfg, "--output-dir", tmp_path / "o")
    assert code != 0 and "error [mesh]" in err
    cfg = write(tmp_path, "polygon: [[0,0,0],[10,0,0],[5,2,0],[5,10,0]]\nd_max: 5\n", "nc.yaml")
    code, _, err = run_cli(capsys, "compute", "--config", cfg, "--output-dir", tmp_path / "o")
    assert code != 0 and "error [poly_vis]" in err and "reflex vertex 2" in err


def test_sphere_command(tmp_path, capsys):
    cfg = write(tmp_path, "polygon: [[0,0,0],[10,0,0],[5,8,0]]\nd_max: 5\nn_phi: 16\nn_theta: 8\n"
                          "dump_depth: true\n")
    code, out, _ = run_cli(capsys, "sphere", "--config", cfg, "--vertex-index", 2, "--output-dir", tmp_path)
    assert code == 0 and (tmp_path / "sphere_2.obj").is_file()
    assert (tmp_path / "depth_2.bin").stat().st_size == 16 * 8 * 4
    code, _, err = run_cli(capsys, "sphere", "--config", cfg, "--vertex-index", 3, "--output-dir", tmp_path)
    assert code != 0 and "out of range" in err


def test_empty_navigable_is_success(tmp_path, capsys):
    cfg = write(tmp_path, "polygon: [[0,0,0],[10,0,0],[5,8,0]]\nd_max: 20\nextraction_resolution: 24\n"
                          "n_phi: 32\nn_theta: 16\n"
                          "nav_constraints:\n  box: {min: [100,100,100], max: [110,110,110]}\n")
    code, out, _ = run_cli(capsys, "compute", "--config", cfg, "--output-dir", tmp_path / "o")
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["navigable"]["empty"] is True
    assert "navigable visibility volume is empty" in report["warnings"]
    assert not (tmp_path / "o" / "navigable.obj").exists()


def test_config_relative_paths(tmp_path):
    shutil.copytree(FIXTURES / "pillar", tmp_path / "pillar")
    cfg = parse_config(tmp_path / "pillar" / "config.yaml")
    assert cfg.scene_path == tmp_path / "pillar" / "scene.obj"
    assert cfg.output_dir == tmp_path / "pillar" / "out"
