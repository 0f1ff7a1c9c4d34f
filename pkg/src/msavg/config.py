"""Run configuration: strict TOML parsing into Scenario + SweepConfig.

Unknown keys are rejected, every applied default is recorded so the run
manifest can reproduce the run from the manifest alone, and coefficient
expression tables are compiled through a whitelisted AST walk rather than
eval.
"""

import ast
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields

import numpy as np

from . import convex, scenario as scenario_mod
from .bsvi import RegressionBasis
from .errors import ConfigurationError
from .experiments import SweepConfig

_ALLOWED_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh,
    "atan": np.arctan, "min": np.minimum, "max": np.maximum, "clip": np.clip,
}
_ALLOWED_CONSTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
    ast.Mod: lambda a, b: a % b,
}


def compile_expression(text, variables, location=""):
    """Compile an arithmetic expression over the named variables.

    Only literals, the listed variables, whitelisted functions/constants and
    basic arithmetic are allowed; anything else is rejected with a message
    naming the offending construct.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"bad expression {text!r}: {exc.msg}", location) from None

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            if node.id in _ALLOWED_CONSTS:
                return _ALLOWED_CONSTS[node.id]
            raise ConfigurationError(f"unknown name {node.id!r} in {text!r}", location)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            if node.func.id not in _ALLOWED_FUNCS or node.keywords:
                raise ConfigurationError(
                    f"function {node.func.id!r} not allowed in {text!r}", location
                )
            args = [ev(a, env) for a in node.args]
            return _ALLOWED_FUNCS[node.func.id](*args)
        raise ConfigurationError(
            f"construct {type(node).__name__} not allowed in {text!r}", location
        )

    # validate once against an empty sample so bad names fail at parse time
    ev(tree, {v: 0.0 for v in variables})

    def fn(**env):
        return ev(tree, env)

    return fn


@dataclass(frozen=True)
class RunConfig:
    scenario: scenario_mod.Scenario
    sweep: SweepConfig
    seed: int
    avg_t_hats: tuple
    avg_kinds: tuple
    homogenize_points: tuple
    defaults_applied: dict = field(repr=False)
    effective: dict = field(repr=False)


_SCHEMA = {
    "scenario": {"name", "g", "b", "sigma", "f1", "f2", "b_bar", "sigma_bar", "f1_bar",
                 "L1", "L2", "L3", "L4", "L5", "q1", "q2", "q3"},
    "phi": {"kind", "lower", "upper", "weight"},
    "sweep": {"epsilons", "gamma", "n_paths", "eta_osc", "n_picard", "t0", "T", "x0",
              "power_p", "basis_kind", "basis_degree", "basis_bins", "basis_range"},
    "avg": {"t_hats", "kinds"},
    "homogenize": {"points"},
    "output": {"seed"},
}


def _check_keys(section, table, loc):
    unknown = set(table) - _SCHEMA[section]
    if unknown:
        raise ConfigurationError(
            f"unknown key {sorted(unknown)[0]!r} in [{section}]", loc
        )


def _build_phi(table, dim_d, defaults):
    kind = table.get("kind")
    if kind is None:
        defaults["phi.kind"] = "zero"
        return convex.zero(dim_d)
    loc = "[phi]"
    if kind == "zero":
        return convex.zero(dim_d)
    if kind == "indicator_box":
        lo = table.get("lower", -np.inf)
        up = table.get("upper", np.inf)
        return convex.indicator_box(lo, up, dim_d)
    if kind == "scaled_abs":
        return convex.scaled_abs(table.get("weight", 1.0), dim_d)
    raise ConfigurationError(f"unknown phi kind {kind!r}", loc)


def _build_expression_scenario(table, phi_table, defaults):
    loc = "[scenario]"
    needed = {"b", "sigma", "g"}
    missing = needed - set(table)
    if missing:
        raise ConfigurationError(
            f"expression scenario needs key {sorted(missing)[0]!r}", loc
        )
    b_e = compile_expression(table["b"], {"s", "x"}, loc)
    s_e = compile_expression(table["sigma"], {"s", "x"}, loc)
    g_e = compile_expression(table["g"], {"x"}, loc)
    f1_e = compile_expression(table.get("f1", "0"), {"s", "x", "y"}, loc)
    f2_e = compile_expression(table.get("f2", "0"), {"z"}, loc)
    if "f1" not in table:
        defaults["scenario.f1"] = "0"
    if "f2" not in table:
        defaults["scenario.f2"] = "0"

    def broadcast_col(val, like):
        return np.broadcast_to(np.asarray(val, float), like.shape[0]).reshape(-1, 1)

    def b(s, x):
        return broadcast_col(b_e(s=s, x=x[:, 0]), x)

    def sigma(s, x):
        return broadcast_col(s_e(s=s, x=x[:, 0]), x).reshape(-1, 1, 1)

    def g(x):
        return broadcast_col(g_e(x=x[:, 0]), x)

    def f1(s, x, y):
        return broadcast_col(f1_e(s=s, x=x[:, 0], y=y[:, 0]), x)

    def f2(z):
        return broadcast_col(f2_e(z=z[:, 0, 0]), z)

    kwargs = {}
    for name in ("b_bar", "sigma_bar", "f1_bar"):
        if name in table:
            varnames = {"x"} if name != "f1_bar" else {"x", "y"}
            expr = compile_expression(table[name], varnames, loc)
            if name == "b_bar":
                kwargs[name] = lambda x, _e=expr: broadcast_col(_e(x=x[:, 0]), x)
            elif name == "sigma_bar":
                kwargs[name] = lambda x, _e=expr: broadcast_col(_e(x=x[:, 0]), x).reshape(-1, 1, 1)
            else:
                kwargs[name] = lambda x, y, _e=expr: broadcast_col(_e(x=x[:, 0], y=y[:, 0]), x)
    for cname in ("L1", "L2", "L3", "L4", "L5", "q1", "q2", "q3"):
        if cname in table:
            kwargs[cname] = table[cname]
    if "L5" in table and not (0 < table["L5"] < 1):
        raise ConfigurationError(
            f"L5={table['L5']} rejected: the z-driver contraction constant must lie in (0, 1)",
            loc,
        )
    phi = _build_phi(phi_table, 1, defaults)
    return scenario_mod.Scenario("expression", 1, 1, 1, b, sigma, f1, f2, g, phi, **kwargs)


def _build_scenario(table, phi_table, defaults):
    loc = "[scenario]"
    if "name" in table:
        extra = set(table) - {"name", "g"}
        if extra:
            raise ConfigurationError(
                f"builtin scenario takes only 'name' and 'g', got {sorted(extra)[0]!r}", loc
            )
        name = table["name"]
        opts = {}
        if "g" in table:
            opts["g"] = table["g"]
        scn = scenario_mod.get_builtin(name, **opts)
        if phi_table:
            scn = scn.with_phi_g(phi=_build_phi(phi_table, scn.dim_d, defaults))
        return scn
    return _build_expression_scenario(table, phi_table, defaults)


def _build_sweep(table, defaults):
    basis_kind = table.get("basis_kind", "polynomial")
    if "basis_kind" not in table:
        defaults["sweep.basis_kind"] = basis_kind
    if basis_kind == "polynomial":
        degree = table.get("basis_degree", 3)
        if "basis_degree" not in table:
            defaults["sweep.basis_degree"] = degree
        basis = RegressionBasis("polynomial", degree=degree)
    else:
        basis = RegressionBasis(
            "piecewise",
            n_bins=table.get("basis_bins", 16),
            bin_range=tuple(table.get("basis_range", (-5.0, 5.0))),
        )
    kwargs = {"basis": basis}
    mapping = {"epsilons": "epsilons", "gamma": "gamma", "n_paths": "n_paths",
               "eta_osc": "eta_osc", "n_picard": "n_picard", "t0": "t0", "T": "T",
               "x0": "x0", "power_p": "power_p"}
    for key, attr in mapping.items():
        if key in table:
            kwargs[attr] = tuple(table[key]) if key == "epsilons" else table[key]
    cfg = SweepConfig(**kwargs)
    for f in fields(SweepConfig):
        if f.name not in kwargs and f.name not in ("basis", "master_seed",
                                                   "kappa_probe_radius", "kappa_n_probe"):
            defaults[f"sweep.{f.name}"] = getattr(cfg, f.name)
    return cfg


def parse_config(text):
    """Parse a TOML run configuration; every failure names key and location."""
    seen = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            section = stripped
        elif "=" in stripped and not stripped.startswith("#"):
            key = stripped.split("=", 1)[0].strip()
            if (section, key) in seen:
                raise ConfigurationError(
                    f"duplicate key {key!r} in {section or 'top level'}", f"line {lineno}"
                )
            seen[(section, key)] = lineno
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config is not valid TOML: {exc}", "toml") from None
    unknown_sections = set(data) - set(_SCHEMA)
    if unknown_sections:
        raise ConfigurationError(f"unknown section [{sorted(unknown_sections)[0]}]", "top level")
    for section in data:
        if not isinstance(data[section], dict):
            raise ConfigurationError(f"{section!r} must be a table", "top level")
        _check_keys(section, data[section], f"[{section}]")

    defaults = {}
    scn = _build_scenario(data.get("scenario", {"name": "example71"}), data.get("phi", {}),
                          defaults)
    if "scenario" not in data:
        defaults["scenario.name"] = "example71"
    sweep = _build_sweep(data.get("sweep", {}), defaults)
    seed = data.get("output", {}).get("seed", 42)
    if "output" not in data or "seed" not in data.get("output", {}):
        defaults["output.seed"] = seed
    sweep = SweepConfig(**{**{f.name: getattr(sweep, f.name) for f in fields(SweepConfig)},
                           "master_seed": seed})

    avg = data.get("avg", {})
    t_hats = tuple(float(t) for t in avg.get("t_hats", (1.0, 10.0, 100.0)))
    kinds = tuple(avg.get("kinds", ("drift", "diffusion")))
    if "avg" not in data:
        defaults["avg.t_hats"] = list(t_hats)
        defaults["avg.kinds"] = list(kinds)
    points = tuple(
        (float(p[0]), float(p[1])) for p in data.get("homogenize", {}).get("points", ((0.0, 1.0),))
    )
    if "homogenize" not in data:
        defaults["homogenize.points"] = [list(p) for p in points]

    effective = {k: v for k, v in data.items()}
    return RunConfig(scn, sweep, int(seed), t_hats, kinds, points, defaults, effective)
