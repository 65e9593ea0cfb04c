import math

import pytest

from pwbddc.config import (CaseConfig, evaluate_expression, parse_kappa, parse_theta,
                           read_config_file)
from pwbddc.errors import ConfigError


@pytest.mark.parametrize("text, m, value", [
    ("1+log(m)", 3, 1 + math.log(3)),
    ("4m", 2, 8.0),
    ("1000", 5, 1000.0),
    ("1e3", 1, 1000.0),
    ("2(m+1)", 2, 6.0),
    ("m^2", 3, 9.0),
    ("inf", 1, math.inf),
])
def test_theta_expressions(text, m, value):
    assert parse_theta(text, m) == pytest.approx(value)


def test_natural_log():
    assert parse_theta("1+log(m)", 3) == pytest.approx(2.0986122886681098)


@pytest.mark.parametrize("text, value", [("8pi", 8 * math.pi), ("2*pi", 2 * math.pi),
                                         ("25.1", 25.1), (3, 3.0)])
def test_kappa(text, value):
    assert parse_kappa(text) == pytest.approx(value)


@pytest.mark.parametrize("text", ["-1", "0", "inf", "8pie", "__import__('os')", "1+",
                                  "x", "log(0)"])
def test_bad_kappa(text):
    with pytest.raises(ConfigError):
        parse_kappa(text)


def test_expression_rejects_attribute_access():
    with pytest.raises(ConfigError):
        evaluate_expression("m.__class__", {"m": 1})


def test_case_config_defaults_and_values():
    cfg = CaseConfig()
    assert cfg.theta_values == (8.0, 1000.0)
    assert cfg.kappa_value == pytest.approx(8 * math.pi)
    assert cfg.eta_value is None
    assert CaseConfig(eta="2h", n=4, m=2).eta_value == pytest.approx(2 / 11)


@pytest.mark.parametrize("bad", [dict(levels=1), dict(p=0), dict(scaling="x"),
                                 dict(n=3, levels=3), dict(rtol=0), dict(rtol="abc"),
                                 dict(economic="maybe"), dict(theta_f="-2"),
                                 dict(n="two")])
def test_case_config_errors(bad):
    with pytest.raises(ConfigError):
        CaseConfig(**bad)


def test_four_levels_need_n_divisible_by_four():
    CaseConfig(n=4, levels=4)
    with pytest.raises(ConfigError):
        CaseConfig(n=2, levels=4)


def test_config_file(tmp_path):
    path = tmp_path / "case.cfg"
    path.write_text("# benchmark\nkappa = 4pi\ntheta-f = 1+log(m)\neconomic = no\n")
    values = read_config_file(path)
    assert values == {"kappa": "4pi", "theta_f": "1+log(m)", "economic": "no"}
    cfg = CaseConfig(**values)
    assert cfg.economic is False


@pytest.mark.parametrize("text", ["kappa 4pi\n", "colour = red\n"])
def test_bad_config_file(tmp_path, text):
    path = tmp_path / "case.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        read_config_file(path)
