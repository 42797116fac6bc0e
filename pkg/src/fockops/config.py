"""Experiment configuration files.

One experiment per YAML (or JSON) document, discriminated by ``kind``.
Complex numbers are written as ``[re, im]``; a bare number is read as real.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .fock import LogQuadWeight
from .semigroup import SemigroupSpec, Variant
from .symbols import AffineSymbol

KINDS = ("classify", "norm", "power", "spectrum", "semigroup", "group", "sector")
FORMATS = ("json", "csv")
N_MIN, N_MAX = 4, 512


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None, source=None):
        self.field = field
        self.line = line
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True)
class Controls:
    N: int = 64
    N_ladder: tuple[int, ...] = (16, 32, 64, 128)
    n_max: int = 80
    tol: float = 1e-6
    M_max: int = 7
    t_grid: tuple[float, ...] = (0.5, 1.0, 2.0)
    h_ladder: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    probe: bool = False
    probe_n: int = 200
    probe_ladder: tuple[int, ...] = (4, 16, 64)
    probe_m: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    symbol: AffineSymbol | None = None
    weight: LogQuadWeight = field(default_factory=LogQuadWeight)
    semigroup: SemigroupSpec | None = None
    generator: tuple[complex, ...] = ()
    controls: Controls = Controls()
    out_path: str | None = None
    out_format: str = "json"
    raw: dict = field(default_factory=dict, compare=False)
    source: str | None = None


class _Lines:
    """Maps dotted field paths to source lines via the YAML node tree."""

    def __init__(self, text: str):
        try:
            self.root = yaml.compose(text)
        except yaml.YAMLError:
            self.root = None

    def line(self, path: str) -> int | None:
        node = self.root
        found = None
        for part in path.split("."):
            if not isinstance(node, yaml.MappingNode):
                break
            nxt = None
            for k, v in node.value:
                if k.value == part:
                    nxt = v
                    found = k.start_mark.line + 1
            if nxt is None:
                break
            node = nxt
        return found


def _complex(value: Any, path: str, err) -> complex:
    if isinstance(value, bool):
        raise err(f"expected a number or [re, im], got {value!r}", path)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        return complex(value[0], value[1])
    raise err(f"expected a number or [re, im], got {value!r}", path)


def _mapping(value, path, err) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise err("expected a mapping", path)
    return value


def _check_keys(d: dict, allowed, path, err):
    for k in d:
        if k not in allowed:
            raise err(f"unknown key {k!r}", f"{path}.{k}" if path else k)


_CONTROL_TYPES = {
    "N": int, "N_ladder": "ints", "n_max": int, "tol": float, "M_max": int,
    "t_grid": "floats", "h_ladder": "floats", "probe": bool, "probe_n": int,
    "probe_ladder": "ints", "probe_m": int,
}


def _controls(d: dict, err) -> Controls:
    _check_keys(d, _CONTROL_TYPES, "controls", err)
    out = {}
    for key, typ in _CONTROL_TYPES.items():
        if key not in d:
            continue
        v, path = d[key], f"controls.{key}"
        if typ is int:
            if isinstance(v, bool) or not isinstance(v, int):
                raise err(f"expected an integer, got {v!r}", path)
        elif typ is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise err(f"expected a number, got {v!r}", path)
            v = float(v)
        elif typ is bool:
            if not isinstance(v, bool):
                raise err(f"expected true/false, got {v!r}", path)
        else:
            if not isinstance(v, list) or not v:
                raise err("expected a nonempty list", path)
            conv = int if typ == "ints" else float
            if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v) or (
                conv is int and any(not isinstance(x, int) for x in v)
            ):
                raise err(f"expected a list of {typ}", path)
            v = tuple(conv(x) for x in v)
        out[key] = v
    c = Controls(**out)
    for key in ("N",):
        if not N_MIN <= c.N <= N_MAX:
            raise err(f"N must lie in [{N_MIN}, {N_MAX}]", "controls.N")
    if any(not N_MIN <= n <= N_MAX for n in c.N_ladder):
        raise err(f"ladder values must lie in [{N_MIN}, {N_MAX}]", "controls.N_ladder")
    if not c.tol > 0 or not math.isfinite(c.tol):
        raise err("tolerances must be > 0", "controls.tol")
    if any(not h > 0 for h in c.h_ladder):
        raise err("step sizes must be > 0", "controls.h_ladder")
    for key in ("n_max", "probe_n"):
        if getattr(c, key) < 1:
            raise err("must be >= 1", f"controls.{key}")
    if c.M_max < 0 or c.probe_m < 1:
        raise err("out of range", "controls.M_max" if c.M_max < 0 else "controls.probe_m")
    return c


def parse_config(text: str, source=None, overrides: dict | None = None) -> ExperimentConfig:
    lines = _Lines(text)

    def err(msg, path=None):
        return ConfigError(msg, path, lines.line(path) if path else None, source)

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(
            f"cannot parse config: {getattr(exc, 'problem', exc)}",
            line=mark.line + 1 if mark else None,
            source=source,
        ) from None
    if not data:
        raise ConfigError("empty config", source=source)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", source=source)
    _check_keys(data, {"kind", "symbol", "weight", "semigroup", "generator", "controls", "output"}, "", err)

    kind = data.get("kind")
    if kind not in KINDS:
        raise err(f"kind must be one of {', '.join(KINDS)}, got {kind!r}", "kind")

    controls = _controls(_mapping(data.get("controls"), "controls", err), err)
    if overrides:
        upd = {k: v for k, v in overrides.items() if v is not None}
        if upd:
            controls = _controls({**_mapping(data.get("controls"), "controls", err), **upd}, err)

    symbol = None
    if "symbol" in data:
        s = _mapping(data["symbol"], "symbol", err)
        _check_keys(s, {"a", "b"}, "symbol", err)
        if "a" not in s:
            raise err("missing multiplier a", "symbol")
        symbol = AffineSymbol(_complex(s["a"], "symbol.a", err), _complex(s.get("b", 0), "symbol.b", err))

    w = _mapping(data.get("weight"), "weight", err)
    _check_keys(w, {"p", "q", "r"}, "weight", err)
    weight = LogQuadWeight(*(_complex(w.get(k, 0), f"weight.{k}", err) for k in ("p", "q", "r")))

    spec = None
    if "semigroup" in data:
        g = _mapping(data["semigroup"], "semigroup", err)
        _check_keys(g, {"variant", "lambda", "C", "alpha_r", "gamma", "delta", "mu"}, "semigroup", err)
        try:
            variant = Variant(g.get("variant"))
        except ValueError:
            raise err(
                f"variant must be {Variant.WEIGHTED_CONTRACTIVE.value} or {Variant.WEIGHTED_UNITARY.value}",
                "semigroup.variant",
            ) from None
        if "lambda" not in g:
            raise err("missing lambda", "semigroup")
        kw = {k: _complex(g[k], f"semigroup.{k}", err) for k in ("C", "alpha_r", "gamma", "delta", "mu") if k in g}
        try:
            spec = SemigroupSpec(variant, _complex(g["lambda"], "semigroup.lambda", err), **kw)
        except ValueError as exc:
            raise err(str(exc), "semigroup") from None

    generator = ()
    if "generator" in data:
        G = data["generator"]
        if not isinstance(G, list) or not G:
            raise err("expected a nonempty list of coefficients", "generator")
        generator = tuple(_complex(x, "generator", err) for x in G)

    out = _mapping(data.get("output"), "output", err)
    _check_keys(out, {"path", "format"}, "output", err)
    fmt = out.get("format", "json")
    if fmt not in FORMATS:
        raise err(f"format must be json or csv, got {fmt!r}", "output.format")

    needs = {
        "classify": "symbol", "norm": "symbol", "power": "symbol", "spectrum": "symbol",
        "semigroup": "semigroup", "group": "semigroup", "sector": "generator",
    }[kind]
    if needs not in data:
        raise err(f"kind {kind!r} needs a {needs!r} section", needs)
    if kind == "group" and spec.variant is not Variant.WEIGHTED_UNITARY:
        raise err("group experiments need the WeightedUnitary family", "semigroup.variant")

    return ExperimentConfig(
        kind, symbol, weight, spec, generator, controls, out.get("path"), fmt, data, str(source) if source else None
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=path) from None
    return parse_config(text, path, overrides)
