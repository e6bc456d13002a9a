from fractions import Fraction

import pytest

from tnn.config import PRESETS, ConfigError, NetworkConfig, preset


def test_presets_carry_table_values():
    e3 = preset("ecccvt")
    assert [l.grid for l in e3.layers] == [26, 24, 22]
    assert [l.q for l in e3.layers] == [12, 20, 32]
    assert [l.theta for l in e3.layers] == [4, 8, 8]
    assert [l.mu_plus for l in e3.layers] == [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]
    assert [l.mu_search for l in e3.layers] == [Fraction(1, 1024), Fraction(1, 512), Fraction(1, 512)]
    assert (e3.voter.tau_eff, e3.voter.theta_hi, e3.voter.theta_lo) == (4, Fraction(3, 4), Fraction(1, 64))
    assert (preset("ecvt").voter.tau_eff, preset("eccvt").voter.tau_eff) == (2, 3)
    assert preset("ECVT").voter.theta_hi == Fraction(15, 32)
    assert preset("eccvt").voter.theta_hi == Fraction(21, 32)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("ecv")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_yaml_round_trip(name, tmp_path):
    cfg = PRESETS[name]
    path = tmp_path / "c.yaml"
    cfg.save(path)
    assert NetworkConfig.load(path) == cfg
    assert "1/1024" in path.read_text() or name != "ecvt"


def test_rejects_floats_and_unknown_keys():
    d = preset("ecvt").to_dict()
    d["layers"][0]["mu_plus"] = 0.5
    with pytest.raises(ConfigError, match="num/den"):
        NetworkConfig.from_dict(d)
    d = preset("ecvt").to_dict()
    d["colour"] = "blue"
    with pytest.raises(ConfigError, match="unknown"):
        NetworkConfig.from_dict(d)
    with pytest.raises(ConfigError):
        NetworkConfig.from_yaml("- just a list")
    with pytest.raises(ConfigError):
        NetworkConfig.from_yaml("a: [1")


def test_grid_and_range_validation():
    d = preset("eccvt").to_dict()
    d["layers"][1]["grid"] = 23
    with pytest.raises(ConfigError, match="grid"):
        NetworkConfig.from_dict(d)
    d = preset("ecvt").to_dict()
    d["voter"]["tau_eff"] = 9
    with pytest.raises(ConfigError):
        NetworkConfig.from_dict(d)
    d = preset("ecvt").to_dict()
    d["voter"]["theta_lo"] = "1/3"
    with pytest.raises(ConfigError):
        NetworkConfig.from_dict(d)


def test_overrides_and_voter_modes():
    cfg = preset("ecvt").with_overrides(neuron_model="if", voter_mode=1)
    assert cfg.neuron_model.value == "if" and cfg.voter.banks == ("lo",)
    assert preset("ecvt").with_overrides(voter_mode=2).voter.banks == ("hi", "lo")
    with pytest.raises(ConfigError):
        preset("ecvt").with_overrides(voter_mode="all")
