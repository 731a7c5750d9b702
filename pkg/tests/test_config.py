"""Tests for experiment configuration."""

import pytest

from gaplab.config import (
    ExperimentConfig,
    load_config,
    parse_config_text,
    parse_float_list,
    parse_patience,
)
from gaplab.errors import ConfigError
from gaplab.expansions import ExponentialPatience, HyperexponentialPatience, RhoConvention


def test_defaults():
    """Test default settings and default grids per model and command."""
    config = ExperimentConfig()
    assert config.model == "mmn-hw"
    assert config.x == (0.5, 1.0, 2.0)
    assert config.delta == 0.05
    assert config.grid_for("gap-table") == (1e2, 1e3, 1e4, 1e5, 1e6)

    diffusion = ExperimentConfig(model="mmna-diffusion", gamma=1.0)
    assert diffusion.grid_for("approx-check") == (1e2, 1e3, 1e4, 1e5)
    assert diffusion.grid_for("gap-table") == (1e2, 1e3, 1e4)
    assert ExperimentConfig(n_grid=(50.0, 500.0)).grid_for("gap-table") == (50.0, 500.0)


def test_validation():
    """Test that invalid values raise ConfigError naming the key."""
    cases = [
        ({"model": "mmx"}, "model"),
        ({"n_grid": (100.0, 10.0)}, "n_grid"),
        ({"n_grid": (0.0, 10.0)}, "n_grid"),
        ({"mu": 0.0}, "mu"),
        ({"gamma": -1.0}, "gamma"),
        ({"h": -1.0}, "h"),
        ({"c": 0.0}, "c"),
        ({"alpha": 1.0}, "alpha"),
        ({"delta": 0.0}, "delta"),
        ({"workers": 0}, "workers"),
        ({"patience": "weibull:2"}, "patience"),
    ]
    for kwargs, key in cases:
        with pytest.raises(ConfigError) as exc_info:
            ExperimentConfig(**kwargs)
        assert exc_info.value.key == key


def test_parse_float_list():
    """Test comma separated lists."""
    assert parse_float_list("100, 1e3,10000") == (100.0, 1000.0, 10000.0)
    with pytest.raises(ConfigError):
        parse_float_list("100,abc")
    with pytest.raises(ConfigError):
        parse_float_list(" , ")


def test_parse_patience():
    """Test exp and hyperexp patience specifications."""
    exp = parse_patience("exp:2")
    assert isinstance(exp, ExponentialPatience)
    assert exp.gamma == 2.0
    mixture = parse_patience("HyperExp: 0.3, 0.5, 4")
    assert isinstance(mixture, HyperexponentialPatience)
    assert (mixture.p, mixture.a, mixture.b) == (0.3, 0.5, 4.0)
    for raw in ("exp:1,2", "hyperexp:1.5,1,1", "exp"):
        with pytest.raises(ConfigError):
            parse_patience(raw)


def test_patience_and_gamma():
    """Test the exponential default and the gamma requirement."""
    assert ExperimentConfig(gamma=0.5).patience_dist().gamma == 0.5
    assert ExperimentConfig(patience="exp:3").require_gamma() == 3.0
    with pytest.raises(ConfigError):
        ExperimentConfig(model="mmng-fluid").patience_dist()
    with pytest.raises(ConfigError):
        ExperimentConfig(patience="hyperexp:0.5,1,2").require_gamma()


def test_parse_config_text():
    """Test comments, dashed keys and typed values."""
    text = """
    # fluid run
    model = mmng-fluid
    n-grid = 100, 1000   # two points
    gamma = 0.5
    rho_convention = Unit
    refined = yes
    window = 40
    """
    settings = parse_config_text(text)
    assert settings == {
        "model": "mmng-fluid",
        "n_grid": (100.0, 1000.0),
        "gamma": 0.5,
        "rho_convention": RhoConvention.UNIT,
        "refined": True,
        "window": 40,
    }


def test_parse_config_text_errors():
    """Test malformed lines, unknown keys and bad values."""
    with pytest.raises(ConfigError) as exc_info:
        parse_config_text("mu = 1\nnot a setting\n")
    assert exc_info.value.key == "line 2"
    with pytest.raises(ConfigError) as exc_info:
        parse_config_text("colour = red")
    assert exc_info.value.key == "colour"
    with pytest.raises(ConfigError):
        parse_config_text("window = 2.5")
    with pytest.raises(ConfigError):
        parse_config_text("refined = maybe")
    with pytest.raises(ConfigError):
        parse_config_text("rho_convention = sideways")


def test_load_config_precedence(tmp_path):
    """Test defaults < file < explicit overrides, with None overrides ignored."""
    path = tmp_path / "run.cfg"
    path.write_text("model = mmna-diffusion\ngamma = 2\nh = 3\n", encoding="utf-8")
    config = load_config(path, {"h": 5.0, "c": None, "n-grid": (10.0, 20.0)})
    assert config.model == "mmna-diffusion"
    assert config.gamma == 2.0
    assert config.h == 5.0
    assert config.c == 1.0
    assert config.n_grid == (10.0, 20.0)


def test_load_config_errors(tmp_path):
    """Test unreadable files and unknown override keys."""
    with pytest.raises(ConfigError) as exc_info:
        load_config(tmp_path / "missing.cfg")
    assert exc_info.value.key == "config"
    with pytest.raises(ConfigError):
        load_config(None, {"colour": "red"})
    with pytest.raises(ConfigError):
        load_config(None, {"mu": -1.0})
