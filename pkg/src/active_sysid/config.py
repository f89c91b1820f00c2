"""Experiment configuration: a JSON document plus dotted-key overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import ControlDomain, StrategySpec
from .dynamics import ModelSpec, random_model, regressor_dim
from .estimator import PosteriorState, default_prior, init

DEFAULTS = {
    "model": {
        "d": 3,
        "c": 2,
        "I": 1,
        "J": 0,
        "link": "identity",
        "seed": None,
        "spectral_radius": 0.9,
        "noise_scale": 0.1,
        "input_scale": 1.0,
    },
    "prior": {"kappa": 1e-2, "q_scale": 1.0, "n0": None, "M0": None, "K0": None, "Q0": None},
    "strategy": {
        "kind": "infomax",
        "tau": None,
        "seed": 0,
        "domain": {"kind": "box", "bound": 1.0, "tie_break": "lexicographic_min"},
    },
    "strategies": None,
    "tau": 500,
    "T": 2000,
    "replicas": 50,
    "seed": 0,
    "noise_estimate": "pre_update",
    "output": {"path": None, "format": "csv"},
}

OVERRIDE_KEYS = (
    "model.d", "model.c", "model.I", "model.J", "model.link", "model.seed",
    "model.spectral_radius", "model.noise_scale", "model.input_scale",
    "model.F", "model.B", "model.V",
    "prior.kappa", "prior.q_scale", "prior.n0", "prior.M0", "prior.K0", "prior.Q0",
    "strategy.kind", "strategy.tau", "strategy.seed",
    "strategy.domain.kind", "strategy.domain.bound", "strategy.domain.tie_break",
    "strategies", "tau", "T", "replicas", "seed", "noise_estimate",
    "output.path", "output.format",
)


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending dotted key."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def _merge(base: dict, extra: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError("unknown key", path)
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


def _model_extra_keys(doc: dict) -> dict:
    # explicit matrices are allowed alongside the generator keys
    model = doc.get("model")
    if isinstance(model, dict):
        return {k: model.pop(k) for k in ("F", "B", "V") if k in model}
    return {}


def parse_override(text: str):
    """``"a.b=value"`` -> ``("a.b", parsed)``; values parse as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form KEY=VALUE")
    key, raw = text.split("=", 1)
    key = key.strip()
    if key not in OVERRIDE_KEYS:
        raise ConfigError("unknown override key", key)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for text in overrides or ():
        key, value = parse_override(text)
        parts = key.split(".")
        node = doc
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return doc


def load_document(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def strategy_from_dict(raw: dict, where: str = "strategy") -> StrategySpec:
    raw = _merge(DEFAULTS["strategy"], raw, where + ".")
    try:
        dom = ControlDomain(**raw["domain"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where + ".domain") from exc
    try:
        return StrategySpec(kind=raw["kind"], domain=dom, tau=raw["tau"], seed=int(raw["seed"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where) from exc


@dataclass
class ExperimentConfig:
    model: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["model"]))
    prior: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["prior"]))
    strategy: StrategySpec = field(default_factory=StrategySpec)
    strategies: list | None = None
    tau: int = 500
    T: int = 2000
    replicas: int = 50
    seed: int = 0
    noise_estimate: str = "pre_update"
    output: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["output"]))
    explicit_model: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = copy.deepcopy(doc)
        explicit = _model_extra_keys(doc)
        merged = _merge({k: v for k, v in DEFAULTS.items() if k != "strategy"} | {"strategy": None}, doc)
        strategy = strategy_from_dict(doc.get("strategy") or {})
        strategies = None
        if merged["strategies"] is not None:
            if not isinstance(merged["strategies"], list) or not merged["strategies"]:
                raise ConfigError("must be a non-empty list of strategy objects", "strategies")
            strategies = [strategy_from_dict(s, f"strategies[{i}]") for i, s in enumerate(merged["strategies"])]
        cfg = cls(
            model=merged["model"],
            prior=merged["prior"],
            strategy=strategy,
            strategies=strategies,
            tau=merged["tau"],
            T=merged["T"],
            replicas=merged["replicas"],
            seed=merged["seed"],
            noise_estimate=merged["noise_estimate"],
            output=merged["output"],
            explicit_model=explicit,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for key in ("T", "replicas", "seed", "tau"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"must be an integer, got {value!r}", key)
        if self.T < 0:
            raise ConfigError("must be >= 0", "T")
        if self.replicas < 1:
            raise ConfigError("must be >= 1", "replicas")
        if self.noise_estimate not in ("pre_update", "post_update"):
            raise ConfigError("must be 'pre_update' or 'post_update'", "noise_estimate")
        for key in ("d", "c", "I", "J"):
            value = self.model.get(key)
            low = 0 if key in ("I", "J") else 1
            if isinstance(value, bool) or not isinstance(value, int) or value < low:
                raise ConfigError(f"must be an integer >= {low}, got {value!r}", f"model.{key}")
        if self.model["link"] not in ("identity", "tanh"):
            raise ConfigError("must be 'identity' or 'tanh'", "model.link")
        if self.output.get("format") not in ("csv",):
            raise ConfigError("only 'csv' traces are supported", "output.format")
        try:
            self.build_model(0)
            self.build_prior()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "model") from exc

    def to_dict(self) -> dict:
        def strat(s: StrategySpec):
            return {"kind": s.kind, "tau": s.tau, "seed": s.seed,
                    "domain": {"kind": s.domain.kind, "bound": s.domain.bound, "tie_break": s.domain.tie_break}}

        doc = {
            "model": dict(self.model, **self.explicit_model),
            "prior": dict(self.prior),
            "strategy": strat(self.strategy),
            "strategies": [strat(s) for s in self.strategies] if self.strategies else None,
            "tau": self.tau,
            "T": self.T,
            "replicas": self.replicas,
            "seed": self.seed,
            "noise_estimate": self.noise_estimate,
            "output": dict(self.output),
        }
        return doc

    def with_strategy(self, strategy: StrategySpec) -> "ExperimentConfig":
        new = copy.deepcopy(self)
        new.strategy = strategy
        return new

    # -- builders ----------------------------------------------------------

    def model_seed(self) -> int:
        return self.seed if self.model.get("seed") is None else int(self.model["seed"])

    def build_model(self, replica: int) -> ModelSpec:
        mdl = self.model
        if self.explicit_model:
            try:
                spec = ModelSpec(self.explicit_model["F"], self.explicit_model["B"],
                                 self.explicit_model["V"], mdl["link"])
            except KeyError as exc:
                raise ConfigError("explicit models need all of F, B and V", "model") from exc
            if (spec.d, spec.c, spec.I, spec.J) != (mdl["d"], mdl["c"], mdl["I"], mdl["J"]):
                raise ConfigError(
                    f"explicit matrices give d={spec.d}, c={spec.c}, I={spec.I}, J={spec.J}; "
                    "set model.d/c/I/J to match", "model")
            return spec
        # one plant per config; replicas differ only in noise and control streams
        rng = np.random.default_rng(np.random.SeedSequence([self.model_seed(), 0]))
        return random_model(
            mdl["d"], mdl["c"], mdl["I"], mdl["J"], rng,
            spectral_radius=float(mdl["spectral_radius"]),
            noise_scale=float(mdl["noise_scale"]),
            input_scale=float(mdl["input_scale"]),
            link=mdl["link"],
        )

    def build_prior(self) -> PosteriorState:
        d = self.model["d"]
        m = regressor_dim(d, self.model["c"], self.model["I"], self.model["J"])
        p = self.prior
        try:
            if any(p.get(k) is not None for k in ("M0", "K0", "Q0")):
                if any(p.get(k) is None for k in ("M0", "K0", "Q0")):
                    raise ConfigError("explicit priors need all of M0, K0 and Q0", "prior")
                s = init(p["M0"], p["K0"], p["Q0"], d + 2 if p["n0"] is None else p["n0"])
                if s.M.shape != (d, m):
                    raise ConfigError(f"M0 must be {d}x{m}", "prior.M0")
                return s
            return default_prior(d, m, kappa=float(p["kappa"]), q_scale=float(p["q_scale"]), n0=p["n0"])
        except ValueError as exc:
            raise ConfigError(str(exc), "prior") from exc

    def noise_rng(self, replica: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, replica, 1]))

    def control_rng(self, replica: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, replica, 2, self.strategy.seed]))


def load_config(path=None, overrides=()) -> ExperimentConfig:
    doc = load_document(path) if path is not None else {}
    return ExperimentConfig.from_dict(apply_overrides(doc, overrides))
