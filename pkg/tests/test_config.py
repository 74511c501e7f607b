from pathlib import Path

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from polyxfem.benchmarks import bundled, bundled_config
from polyxfem.config import ConfigError, dump_config, load_config, parse_config

ROOT = Path(__file__).resolve().parents[1]

GOOD = """\
config_version: 1
name: small
geometry:
  domain: {x0: 0, y0: 0, x1: 2, y1: 2}
  crack: [[0, 1], [1, 1]]
mesh:
  kind: quad
  nx: 9
  ny: 9
material: {kind: neo_hookean_compressible, E: 50000.0, nu: 0.3}
loads:
  - {kind: traction, boundary_set: top, increment: 100.0, n_steps: 2}
supports:
  - {boundary_set: bottom, components: y}
  - {boundary_set: corner_bl, components: x}
"""


def errors_of(text):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "cfg.yaml")
    return exc.value


def test_parse_applies_defaults():
    cfg = parse_config(GOOD)
    assert cfg.name == "small"
    assert cfg.solver["tol"] == 6e-3
    assert cfg.solver["kinematics"] == "nonlinear"
    assert cfg.outputs["vtk"] is True


def test_round_trip_is_identity():
    cfg = parse_config(GOOD)
    again = parse_config(dump_config(cfg))
    assert again.to_dict() == cfg.to_dict()
    assert parse_config(dump_config(again)).to_dict() == cfg.to_dict()


@pytest.mark.parametrize("name", list(bundled()))
def test_bundled_configs_round_trip(name):
    cfg = bundled_config(name)
    assert parse_config(dump_config(cfg)).to_dict() == cfg.to_dict()


@pytest.mark.parametrize("name", list(bundled()))
def test_bench_directory_matches_bundled(name):
    on_disk = load_config(ROOT / "bench" / f"{name}.yaml")
    assert on_disk.to_dict() == bundled_config(name).to_dict()


def test_missing_version_rejected():
    err = errors_of(GOOD.replace("config_version: 1\n", ""))
    assert "config_version" in str(err)


def test_wrong_version_anchored():
    err = errors_of(GOOD.replace("config_version: 1", "config_version: 2"))
    assert err.errors[0][0] == 1
    assert str(err).startswith("cfg.yaml:1:")


def test_unknown_key_anchored_to_its_line():
    text = GOOD.replace("  nx: 9\n", "  nx: 9\n  nz: 3\n")
    err = errors_of(text)
    line = text.splitlines().index("  nz: 3") + 1
    assert err.errors[0][0] == line
    assert "nz" in err.errors[0][1]


def test_type_errors_reported_together():
    text = GOOD.replace("nu: 0.3", "nu: abc").replace("n_steps: 2", "n_steps: -1")
    err = errors_of(text)
    assert len(err.errors) >= 2
    assert all(ln is not None for ln, _ in err.errors)


def test_unknown_boundary_set():
    err = errors_of(GOOD.replace("boundary_set: top", "boundary_set: roof"))
    assert "roof" in str(err)


def test_crack_outside_refined_zone_rejected():
    text = GOOD.replace("""mesh:
  kind: quad
  nx: 9
  ny: 9""", """mesh:
  kind: voronoi
  n_seeds: 100
  refinement: {region: [0.0, 0.8, 0.5, 1.2], cell_size: 0.1}""")
    err = errors_of(text)
    assert "margin" in str(err)
    assert err.errors[0][0] == 5  # the crack line


def test_mismatched_step_counts_rejected():
    text = GOOD.replace("""supports:""", """  - {kind: traction, boundary_set: right, increment: 1.0, n_steps: 3, component: x}
supports:""")
    assert "n_steps" in str(errors_of(text))


def test_yaml_syntax_error_is_config_error():
    err = errors_of("config_version: 1\nname: [unclosed\n")
    assert err.errors[0][0] is not None


def test_load_config_reports_path(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(GOOD.replace("kind: quad", "kind: hexagons"))
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert str(p) in str(exc.value)


@settings(max_examples=30, deadline=None)
@given(tol=st.floats(1e-8, 1e-1), steps=st.integers(1, 50), inc=st.floats(-1e4, 1e4).filter(lambda v: v != 0),
       name=st.from_regex(r"[a-z][a-z0-9_]{0,12}", fullmatch=True))
def test_property_round_trip(tol, steps, inc, name):
    data = yaml.safe_load(GOOD)
    data["name"] = name
    data["solver"] = {"tol": tol}
    data["loads"][0].update(n_steps=steps, increment=inc)
    cfg = parse_config(yaml.safe_dump(data))
    assert parse_config(dump_config(cfg)).to_dict() == cfg.to_dict()
