"""Run configuration: one JSON file, validated, with a stable digest.

Example::

    {
      "seed": 7,
      "space": {"lambdas": [1.0, 0.5]},
      "domain": {"kind": "ball", "r": 1.0},
      "sim": {"dt": 0.001, "horizon": 5.0, "scheme": "projection", "paths": 1000},
      "quadrature": {"nodes_per_axis": 24},
      "verify": {"select": ["ibp", "revuz"]},
      "output": {"dir": "out"}
    }

Only ``seed`` is required.  The spectrum may instead be given as
``{"c": 1.0, "p": 2.0, "d": 3}`` for lambda_k = c k^{-p}.  Graph domains
read ``{"kind": "graph", "axis": 1, "profile": {"kind": "quadratic", "params": [...]}}``.
"""

import copy
import hashlib
import json
from dataclasses import dataclass

from .domain import Ball, GraphRegion, make_profile
from .engine import SimConfig
from .errors import ContractViolation
from .gaussian_space import GaussianSpace

VERIFIERS = (
    "ibp",
    "gauss_green",
    "energy",
    "stationarity",
    "revuz",
    "qv",
    "support",
    "telescoping",
    "consistency",
)

DEFAULTS = {
    "space": {"lambdas": [1.0]},
    "domain": {"kind": "graph", "axis": 1, "profile": {"kind": "constant", "params": [0.0]}},
    "sim": {
        "dt": 1e-3,
        "horizon": 5.0,
        "scheme": "projection",
        "epsilon": None,
        "clock": "dirichlet",
        "newton_tol": 1e-10,
        "max_newton_iters": 50,
        "paths": 1000,
        "start": "stationary",
        "save_paths": 4,
    },
    "quadrature": {"nodes_per_axis": 24, "line_nodes": 96},
    "verify": {"select": ["all"], "oracle_size": None, "qv_paths": 8, "qv_horizon": 10.0},
    "output": {"dir": "out"},
}

# sections that never influence numbers
_UNHASHED = ("output",)


class ConfigError(ContractViolation):
    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


def _merge(base, over, prefix=""):
    out = copy.deepcopy(base)
    for key, value in over.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(name, "unknown field")
        if isinstance(base[key], dict) and key not in ("domain", "space"):
            if not isinstance(value, dict):
                raise ConfigError(name, "expected an object")
            out[key] = _merge(base[key], value, name + ".")
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    raw: dict
    space: GaussianSpace
    domain: object
    sim: SimConfig

    @property
    def seed(self):
        return self.raw["seed"]

    @property
    def start(self):
        return self.raw["sim"]["start"]

    @property
    def quadrature(self):
        return self.raw["quadrature"]

    @property
    def verify(self):
        return self.raw["verify"]

    @property
    def output(self):
        return self.raw["output"]

    @property
    def hash(self):
        return config_hash(self.raw)


def canonical(raw):
    return json.dumps({k: v for k, v in raw.items() if k not in _UNHASHED}, sort_keys=True, separators=(",", ":"))


def config_hash(raw):
    return hashlib.sha256(canonical(raw).encode()).hexdigest()[:16]


def parse_space(spec):
    if not isinstance(spec, dict):
        raise ConfigError("space", "expected an object")
    if "lambdas" in spec:
        if set(spec) != {"lambdas"}:
            raise ConfigError("space", "give either lambdas or c, p, d")
        try:
            return GaussianSpace(tuple(float(v) for v in spec["lambdas"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError("space.lambdas", str(exc)) from exc
    if set(spec) == {"c", "p", "d"}:
        try:
            return GaussianSpace.power_law(float(spec["c"]), float(spec["p"]), int(spec["d"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError("space", str(exc)) from exc
    raise ConfigError("space", "give either lambdas or c, p, d")


def parse_domain(spec, space):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("domain", "expected an object with a kind")
    kind = spec["kind"]
    try:
        if kind == "ball":
            if set(spec) - {"kind", "r"}:
                raise ConfigError("domain", "ball takes only r")
            return Ball(float(spec.get("r", 1.0)))
        if kind == "graph":
            if set(spec) - {"kind", "axis", "profile"}:
                raise ConfigError("domain", "graph takes axis and profile")
            axis = int(spec.get("axis", 1))
            if not 1 <= axis <= space.dim:
                raise ConfigError("domain.axis", f"must lie in 1..{space.dim}")
            prof = spec.get("profile", {"kind": "constant", "params": [0.0]})
            profile = make_profile(prof.get("kind"), prof.get("params", []), space.dim - 1)
            return GraphRegion(axis, profile)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("domain", str(exc)) from exc
    raise ConfigError("domain.kind", f"unknown kind {kind!r}")


def parse_sim(spec, seed):
    keys = ("dt", "horizon", "scheme", "epsilon", "clock", "newton_tol", "max_newton_iters", "paths")
    for name in ("dt", "horizon", "epsilon", "newton_tol"):
        v = spec[name]
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise ConfigError(f"sim.{name}", "must be a number")
    for name in ("paths", "max_newton_iters", "save_paths"):
        if isinstance(spec[name], bool) or not isinstance(spec[name], int):
            raise ConfigError(f"sim.{name}", "must be an integer")
    try:
        return SimConfig(seed=seed, **{k: spec[k] for k in keys})
    except ContractViolation as exc:
        raise ConfigError(f"sim.{getattr(exc, 'field', '?')}", str(exc)) from exc


def from_dict(data, overrides=None):
    """Validate a config mapping; ``overrides`` patch sim fields and the seed."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    if "seed" not in data:
        raise ConfigError("seed", "required")
    rest = {k: v for k, v in data.items() if k != "seed"}
    raw = _merge(DEFAULTS, rest)
    raw["seed"] = data["seed"]
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            raw["seed"] = value
        else:
            raw["sim"][key] = value
    if isinstance(raw["seed"], bool) or not isinstance(raw["seed"], int) or raw["seed"] < 0:
        raise ConfigError("seed", "must be a nonnegative integer")
    space = parse_space(raw["space"])
    domain = parse_domain(raw["domain"], space)
    sim = parse_sim(raw["sim"], raw["seed"])
    start = raw["sim"]["start"]
    if start != "stationary":
        if not isinstance(start, list) or len(start) != space.dim:
            raise ConfigError("sim.start", f"must be 'stationary' or a list of {space.dim} numbers")
    q = raw["quadrature"]
    for name in ("nodes_per_axis", "line_nodes"):
        if isinstance(q[name], bool) or not isinstance(q[name], int) or q[name] < 8:
            raise ConfigError(f"quadrature.{name}", "must be an integer >= 8")
    sel = raw["verify"]["select"]
    if isinstance(sel, str):
        sel = [sel]
    unknown = [s for s in sel if s not in VERIFIERS + ("all",)]
    if unknown:
        raise ConfigError("verify.select", f"unknown verifiers {unknown}")
    raw["verify"]["select"] = list(sel)
    return RunConfig(raw, space, domain, sim)


def load(path, overrides=None):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return from_dict(data, overrides)
