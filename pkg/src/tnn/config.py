"""Network configuration, presets and the YAML config file format.

Fractions are written as ``"num/den"`` strings so every learning increment
and threshold round-trips exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Any

import yaml

from .column import ColumnParams, StdpGate
from .core import DEFAULT_FRAC_BITS, DEFAULT_TAU_MAX, DEFAULT_W_MAX, NeuronModel, to_raw
from .decode import VoterParams
from .encode import DEFAULT_BINARIZE_THRESHOLD, GRID, LINES_PER_FIELD

N_CLASSES = 10

VOTER_MODES = ("lo", "hi", "both")


class ConfigError(ValueError):
    pass


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        raise ConfigError(f"write fractions as 'num/den' strings, not floats ({v})")
    return Fraction(str(v))


def _frac_str(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


@dataclass(frozen=True)
class LayerSpec:
    grid: int
    q: int
    theta: int
    mu_plus: Fraction
    mu_minus: Fraction
    mu_search: Fraction

    def __post_init__(self):
        for name in ("mu_plus", "mu_minus", "mu_search"):
            object.__setattr__(self, name, _frac(getattr(self, name)))


@dataclass(frozen=True)
class VoterSpec:
    tau_eff: int
    theta_hi: Fraction
    theta_lo: Fraction
    mode: str = "both"
    r: int = N_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "theta_hi", _frac(self.theta_hi))
        object.__setattr__(self, "theta_lo", _frac(self.theta_lo))
        mode = {1: "lo", 2: "both", "1": "lo", "2": "both"}.get(self.mode, self.mode)
        if mode not in VOTER_MODES:
            raise ConfigError(f"voter mode must be one of {VOTER_MODES} (or 1/2), got {self.mode!r}")
        object.__setattr__(self, "mode", mode)

    @property
    def banks(self) -> tuple[str, ...]:
        return {"lo": ("lo",), "hi": ("hi",), "both": ("hi", "lo")}[self.mode]


@dataclass(frozen=True)
class NetworkConfig:
    name: str
    layers: tuple[LayerSpec, ...]
    voter: VoterSpec
    tau_max: int = DEFAULT_TAU_MAX
    w_max: int = DEFAULT_W_MAX
    frac_bits: int = DEFAULT_FRAC_BITS
    neuron_model: NeuronModel = NeuronModel.RIF
    stdp_gate: StdpGate = StdpGate.POST_WTA
    binarize_threshold: int = DEFAULT_BINARIZE_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "neuron_model", NeuronModel(self.neuron_model))
        object.__setattr__(self, "stdp_gate", StdpGate(self.stdp_gate))
        self.validate()

    # -- derived ------------------------------------------------------------

    def layer_inputs(self, n: int) -> int:
        """Input lines per column of layer ``n`` (0-based)."""
        return LINES_PER_FIELD if n == 0 else 4 * self.layers[n - 1].q

    def column_params(self, n: int) -> ColumnParams:
        ls = self.layers[n]
        return ColumnParams(
            p=self.layer_inputs(n), q=ls.q, theta=ls.theta,
            mu_plus=ls.mu_plus, mu_minus=ls.mu_minus, mu_search=ls.mu_search,
            stdp_gate=self.stdp_gate, w_max=self.w_max, frac_bits=self.frac_bits,
            tau_max=self.tau_max, neuron_model=self.neuron_model,
        )

    def voter_params(self, bank: str) -> VoterParams:
        v = self.voter
        theta = v.theta_hi if bank == "hi" else v.theta_lo
        return VoterParams(q=self.layers[-1].q, r=v.r, tau_eff=v.tau_eff, theta_v=theta,
                           w_max=self.w_max, frac_bits=self.frac_bits)

    def validate(self) -> None:
        if not 1 <= len(self.layers) <= 3:
            raise ConfigError("a network has 1 to 3 column layers")
        if self.tau_max < 2:
            raise ConfigError("tau_max must be >= 2")
        if not 1 <= self.voter.tau_eff <= self.tau_max:
            raise ConfigError("tau_eff must lie in 1..tau_max")
        if not 0 < self.binarize_threshold <= 255:
            raise ConfigError("binarize_threshold must lie in 1..255")
        if self.layers[0].grid != GRID:
            raise ConfigError(f"layer 1 grid must be {GRID} (one column per 3x3 field)")
        for a, b in zip(self.layers, self.layers[1:]):
            if b.grid != a.grid - 2:
                raise ConfigError(f"grid {a.grid} must be followed by {a.grid - 2}, got {b.grid}")
        try:
            for n in range(len(self.layers)):
                self.column_params(n)
            for bank in ("hi", "lo"):
                self.voter_params(bank)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "tau_max": self.tau_max,
            "w_max": self.w_max,
            "frac_bits": self.frac_bits,
            "neuron_model": self.neuron_model.value,
            "stdp_gate": self.stdp_gate.value,
            "binarize_threshold": self.binarize_threshold,
            "layers": [
                {"grid": l.grid, "q": l.q, "theta": l.theta,
                 "mu_plus": _frac_str(l.mu_plus), "mu_minus": _frac_str(l.mu_minus),
                 "mu_search": _frac_str(l.mu_search)}
                for l in self.layers
            ],
            "voter": {"tau_eff": self.voter.tau_eff, "theta_hi": _frac_str(self.voter.theta_hi),
                      "theta_lo": _frac_str(self.voter.theta_lo), "mode": self.voter.mode,
                      "r": self.voter.r},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NetworkConfig":
        try:
            known = {f.name for f in fields(cls)}
            extra = set(d) - known
            if extra:
                raise ConfigError(f"unknown config keys: {sorted(extra)}")
            kw = dict(d)
            kw["layers"] = tuple(LayerSpec(**l) for l in d["layers"])
            kw["voter"] = VoterSpec(**d["voter"])
            return cls(**kw)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "NetworkConfig":
        try:
            d = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "NetworkConfig":
        with open(path) as fh:
            return cls.from_yaml(fh.read())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_yaml())

    def with_overrides(self, **kw) -> "NetworkConfig":
        voter_kw = {k[len("voter_"):]: kw.pop(k) for k in list(kw) if k.startswith("voter_")}
        cfg = replace(self, **kw)
        if voter_kw:
            cfg = replace(cfg, voter=replace(cfg.voter, **voter_kw))
        return cfg


# per-layer parameters; a system with n layers uses the first n and the
# voter row of its last layer
_LAYERS = (
    LayerSpec(26, 12, 4, Fraction(1, 2), Fraction(1, 2), Fraction(1, 1024)),
    LayerSpec(24, 20, 8, Fraction(1, 4), Fraction(1, 4), Fraction(1, 512)),
    LayerSpec(22, 32, 8, Fraction(1, 4), Fraction(1, 4), Fraction(1, 512)),
)
_VOTERS = (
    VoterSpec(2, Fraction(15, 32), Fraction(1, 32)),
    VoterSpec(3, Fraction(21, 32), Fraction(1, 64)),
    VoterSpec(4, Fraction(24, 32), Fraction(1, 64)),
)

PRESETS = {
    name: NetworkConfig(name=name, layers=_LAYERS[:n], voter=_VOTERS[n - 1])
    for n, name in ((1, "ecvt"), (2, "eccvt"), (3, "ecccvt"))
}


def preset(name: str) -> NetworkConfig:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
