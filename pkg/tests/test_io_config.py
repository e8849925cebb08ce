import json
import math

import numpy as np
import pytest

from nonlocal_atlas import build_mesh
from nonlocal_atlas.config import RunConfig, load_config
from nonlocal_atlas.errors import ConfigError
from nonlocal_atlas.io import dumps, fmt, read_field, write_csv, write_field


def test_float_format():
    assert fmt(0.1) == "1.000000000000e-01"
    assert fmt(math.inf) == "inf" and fmt(math.nan) == "nan"
    text = dumps({"a": 1.5, "b": [1, True, None], "c": math.inf})
    data = json.loads(text)
    assert data == {"a": 1.5, "b": [1, True, None], "c": "inf"}
    assert "1.500000000000e+00" in text


def test_field_round_trip(tmp_path):
    m = build_mesh(2, (1.0, 2.0), (12, 14))
    u = np.random.default_rng(1).uniform(size=m.size)
    write_field(tmp_path / "u.csv", m, u, {"s": 2.0})
    meta, back = read_field(tmp_path / "u.csv")
    assert meta["dim"] == 2 and meta["s"] == 2.0 and meta["n"] == [12, 14]
    np.testing.assert_allclose(back, u, rtol=1e-12)
    assert (tmp_path / "u.csv").read_text().splitlines()[1] == "index,x,y,value"


def test_csv_cells(tmp_path):
    write_csv(tmp_path / "t.csv", ["a", "b", "c"], [(1, True, 0.25)])
    assert (tmp_path / "t.csv").read_text() == "a,b,c\n1,1,2.500000000000e-01\n"


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_toml_and_json_agree(tmp_path):
    toml = '[mesh]\nn = 64\n[nonlinearity]\nkind = "power"\nparams = { p = 1.5 }\n'
    js = json.dumps({"mesh": {"n": 64}, "nonlinearity": {"kind": "power", "params": {"p": 1.5}}})
    a = load_config(_write(tmp_path, toml))
    b = load_config(_write(tmp_path, js, "c.json"))
    assert a.mesh == b.mesh and a.nonlinearity == b.nonlinearity


@pytest.mark.parametrize(
    "data,where",
    [
        ({"mesh": {"n": 64}, "bogus": {}}, "unknown config sections"),
        ({"nonlinearity": {"kind": "power"}}, "mesh"),
        ({"mesh": {"n": 64}, "tolerances": {"tol_x": 1}}, "tolerances"),
    ],
)
def test_schema_errors(data, where):
    with pytest.raises(ConfigError, match=where):
        RunConfig.from_dict(data)


def test_component_errors_carry_path():
    cfg = RunConfig.from_dict({"mesh": {"n": 64}, "nonlinearity": {"kind": "power", "params": {"p": 2.5}}})
    with pytest.raises(ConfigError, match="^nonlinearity"):
        cfg.components(need=("nl",))
    cfg = RunConfig.from_dict({"mesh": {"n": 3}})
    with pytest.raises(ConfigError, match="^mesh"):
        cfg.components(need=())


def test_unparsable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[mesh\n"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
