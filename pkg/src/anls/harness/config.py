"""Experiment configuration: parameter schema, validation and canonical JSON.

Every experiment has a fixed set of parameters.  Each parameter is also a
command-line flag (``max_freq`` <-> ``--max-freq``), so a config file and a
command line describe the same thing.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ParameterError


@dataclass(frozen=True)
class Param:
    type: type
    default: object
    help: str
    choices: tuple | None = None
    path: bool = False  # input path, resolved against the config location


def _p(type_, default, help_, choices=None, path=False):
    return Param(type_, default, help_, choices, path)


INF = math.inf

SCHEMA: dict[str, dict[str, Param]] = {
    "gen-potential": {
        "kind": _p(str, "white", "potential family", ("white", "osc", "custom")),
        "max_freq": _p(int, 256, "band limit M"),
        "kappa": _p(float, 0.49, "advertised regularity gap (osc: decay exponent)"),
        "field": _p(str, None, "field record to wrap (kind=custom)", path=True),
    },
    "spectrum": {
        "potential": _p(str, None, "potential record, or 'zero'", path=True),
        "max_freq": _p(int, 64, "Galerkin band M"),
    },
    "gamma-check": {
        "potential": _p(str, None, "potential record, or 'zero'", path=True),
        "max_freq": _p(int, 64, "band of the probe fields"),
        "samples": _p(int, 50, "number of random probe fields"),
    },
    "strichartz": {
        "potential": _p(str, "zero", "potential record, or 'zero'", path=True),
        "max_freq": _p(int, 128, "Galerkin band M (needs 2^(j+1) <= M)"),
        "kappa": _p(float, 0.49, "regularity gap in the data norm"),
        "eps": _p(float, 0.05, "epsilon in the data norm"),
        "blocks": _p(str, "2..6", "block range a..b"),
        "samples": _p(int, 50, "samples per block"),
        "n_time": _p(int, 256, "time quadrature nodes on [0, 1]"),
    },
    "evolve": {
        "potential": _p(str, "zero", "potential record, or 'zero'", path=True),
        "max_freq": _p(int, 32, "Galerkin band M"),
        "m": _p(int, 4, "power of the nonlinearity"),
        "lambda": _p(float, 1.0, "coupling (negative: focusing)"),
        "modes": _p(int, 8, "Galerkin dimension N"),
        "dt": _p(float, 1e-3, "time step"),
        "T": _p(float, 1.0, "final time"),
        "scheme": _p(str, "strang", "integrator", ("strang", "picard")),
        "u0": _p(str, None, "initial field record (default: a GFF sample)", path=True),
        "snap_every": _p(float, 0.1, "snapshot interval"),
        "allow_aliasing": _p(bool, False, "use a two-fold instead of an m-fold dealiased grid"),
    },
    "threshold": {
        "m": _p(int, 4, "power of the nonlinearity"),
        "kappa": _p(float, 0.5, "regularity gap"),
    },
    "gibbs-sample": {
        "potential": _p(str, "zero", "potential record, or 'zero'", path=True),
        "max_freq": _p(int, 32, "Galerkin band M"),
        "modes": _p(int, 16, "retained eigenmodes N"),
        "count": _p(int, 2000, "number of samples"),
        "lambda": _p(float, 1.0, "coupling"),
        "m": _p(int, 4, "power"),
        "B": _p(float, INF, "mass cutoff (inf: none)"),
    },
    "invariance": {
        "ensemble": _p(str, None, "ensemble directory written by gibbs-sample", path=True),
        "T": _p(float, 1.0, "final time"),
        "dt": _p(float, 1e-3, "time step"),
        "observables": _p(str, "l4,mode1,h14", "comma-separated subset of mass,l4,mode1,h14"),
        "bootstrap": _p(int, 1000, "bootstrap replicates"),
    },
    "regularity": {
        "potential": _p(str, None, "potential record", path=True),
        "samples": _p(int, 20, "GFF samples"),
        "profile": _p(str, "sharp", "block profile", ("sharp", "smooth")),
    },
}

EXPERIMENTS = tuple(SCHEMA)
TOP_KEYS = ("experiment", "parameters", "seed", "output_dir", "threads")


def coerce(name: str, spec: Param, value):
    if value is None:
        return None
    try:
        if spec.type is bool:
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                value = value.lower() in ("true", "1", "yes")
            out = bool(value)
        elif spec.type is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            out = int(value)
        elif spec.type is float:
            out = float(value)
        else:
            out = str(value)
    except (TypeError, ValueError):
        raise ParameterError(f"parameter {name!r}: cannot interpret {value!r} as {spec.type.__name__}") from None
    if spec.choices and out not in spec.choices:
        raise ParameterError(f"parameter {name!r}: {out!r} is not one of {spec.choices}")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully specified experiment: every parameter present, defaults filled in."""

    experiment: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str | None = None
    threads: int | None = None

    @classmethod
    def build(cls, experiment: str, parameters: dict | None = None, seed: int = 0,
              output_dir: str | None = None, threads: int | None = None, base_dir=None) -> "ExperimentConfig":
        if experiment not in SCHEMA:
            raise ParameterError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
        schema = SCHEMA[experiment]
        parameters = dict(parameters or {})
        unknown = sorted(set(parameters) - set(schema))
        if unknown:
            raise ParameterError(f"unknown parameter key(s) for {experiment}: {', '.join(map(repr, unknown))}")
        full = {}
        for name, spec in schema.items():
            value = coerce(name, spec, parameters.get(name, spec.default))
            if spec.path and value is not None and value != "zero" and base_dir is not None:
                value = str((Path(base_dir) / value).resolve())
            full[name] = value
        if isinstance(seed, bool) or int(seed) != seed or seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")
        if threads is not None and int(threads) < 1:
            raise ParameterError("threads must be >= 1")
        return cls(experiment, full, int(seed), output_dir, None if threads is None else int(threads))

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ParameterError("config must be a JSON object")
        unknown = sorted(set(data) - set(TOP_KEYS))
        if unknown:
            raise ParameterError(f"unknown config key(s): {', '.join(map(repr, unknown))}")
        if "experiment" not in data:
            raise ParameterError("config is missing the 'experiment' key")
        return cls.build(data["experiment"], data.get("parameters"), data.get("seed", 0),
                         data.get("output_dir"), data.get("threads"), base_dir)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "parameters": dict(self.parameters), "seed": self.seed,
                "output_dir": self.output_dir, "threads": self.threads}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str, base_dir=None) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data, base_dir)

    def digest(self) -> str:
        """Hash of what determines the outputs (excludes output_dir and threads)."""
        core = {"experiment": self.experiment, "parameters": self.parameters, "seed": self.seed}
        return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()

    def inputs(self) -> list[str]:
        schema = SCHEMA[self.experiment]
        return [v for k, v in sorted(self.parameters.items()) if schema[k].path and v not in (None, "zero")]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return ExperimentConfig.from_json(path.read_text(), base_dir=path.parent)
