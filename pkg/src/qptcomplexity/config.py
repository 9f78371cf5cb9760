"""Run configuration: typed schema per subcommand, INI-style files, CLI overrides.

Config files are plain text with section headers and ``key = value`` lines::

    [run]
    output_dir = results
    seed = 3

    [model]
    L = 12
    J = 0.2, 0.5, 1.0

Sections only group keys for readability; every key must be known to the
chosen subcommand.  List values are comma separated.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

__all__ = ["ConfigError", "Option", "RunConfig", "SCHEMAS", "load_config", "OUTPUT_ENV"]

OUTPUT_ENV = "QPTC_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str, line: int | None = None, source: str | None = None):
        self.field, self.line, self.source = field, line, source
        where = f"{source}:{line}: " if line is not None and source else (f"line {line}: " if line is not None else "")
        super().__init__(f"{where}{field}: {message}")


def _parse_bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_list(conv):
    def parse(s):
        if isinstance(s, (list, tuple)):
            return [conv(x) for x in s]
        parts = [p.strip() for p in str(s).split(",") if p.strip()]
        return [conv(p) for p in parts]
    return parse


def _int(s):
    v = float(s) if not isinstance(s, int) else s
    if int(v) != v:
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


PARSERS: dict[str, Callable[[Any], Any]] = {
    "int": _int,
    "float": float,
    "bool": _parse_bool,
    "str": str,
    "ints": _parse_list(_int),
    "floats": _parse_list(float),
}


@dataclass(frozen=True)
class Option:
    kind: str
    default: Any
    help: str = ""
    check: Callable[[Any], str | None] | None = None   # returns an error message or None
    choices: tuple | None = None


def _positive(v):
    vals = v if isinstance(v, list) else [v]
    return None if all(x > 0 for x in vals) else "must be positive"


def _nonneg(v):
    vals = v if isinstance(v, list) else [v]
    return None if all(x >= 0 for x in vals) else "must be non-negative"


def _sizes(minimum):
    def check(v):
        vals = v if isinstance(v, list) else [v]
        if not vals:
            return "must not be empty"
        return None if all(x >= minimum for x in vals) else f"must be >= {minimum}"
    return check


def _even_sizes(v):
    msg = _sizes(2)(v)
    if msg:
        return msg
    return None if all(x % 2 == 0 for x in v) else "chain lengths must be even"


def _unit(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


def _nonempty(v):
    return None if v else "must not be empty"


COMMON = {
    "output_dir": Option("str", "", "output directory (default: $QPTC_OUTPUT_DIR or ./results)"),
    "seed": Option("int", 0, "base random seed", _nonneg),
    "jobs": Option("int", 0, "worker processes (0: available parallelism)", _nonneg),
}

SCHEMAS: dict[str, dict[str, Option]] = {
    "ising-fs": {
        "L": Option("ints", [64, 128, 256, 512], "even chain lengths", _even_sizes),
        "J_min": Option("float", 0.0, "sweep start"),
        "J_max": Option("float", 2.0, "sweep end"),
        "dJ": Option("float", 1e-3, "sweep step", _positive),
        "J_R": Option("float", 0.0, "reference coupling"),
        "fit_L": Option("ints", [128, 256, 512, 1024, 2048, 4096, 8192], "sizes for the peak-exponent fit",
                        _even_sizes),
    },
    "ising-nielsen": {
        "L": Option("ints", [64, 128, 256, 512], "even chain lengths", _even_sizes),
        "J_min": Option("float", 0.0, "sweep start"),
        "J_max": Option("float", 2.0, "sweep end"),
        "dJ": Option("float", 2e-3, "sweep step", _positive),
        "J_R": Option("float", 0.0, "reference coupling"),
        "fit_L": Option("ints", [64, 128, 256, 512, 1024, 2048, 4096, 8192], "sizes for the log fit", _even_sizes),
    },
    "dicke": {
        "N": Option("ints", [10, 15, 20, 25, 30, 35, 40], "spin counts", _sizes(1)),
        "lam_min": Option("float", 0.30, "coupling sweep start", _nonneg),
        "lam_max": Option("float", 0.64, "coupling sweep end", _positive),
        "dlam": Option("float", 1e-3, "coupling step", _positive),
        "omega_c": Option("float", 1.0, "mode frequency", _positive),
        "omega_s": Option("float", 1.0, "spin frequency", _positive),
        "n_exc": Option("int", 30, "boson cutoff", _sizes(1)),
        "thermo_step": Option("float", 1e-3, "finite-difference step of the Gaussian metric", _positive),
    },
    "adiabatic-tfi": {
        "L": Option("ints", [8, 10, 12], "chain lengths", _sizes(2)),
        "J": Option("floats", [0.5, 0.8, 0.9, 1.1, 1.2, 1.5], "target couplings"),
        "h_x": Option("float", 1.0, "transverse field"),
        "boundary": Option("str", "open", "chain boundary", choices=("open", "periodic")),
        "T_min": Option("float", 0.5, "shortest protocol time", _positive),
        "T_max": Option("float", 50.0, "longest protocol time", _positive),
        "T_per_decade": Option("int", 6, "geometric grid density", _sizes(1)),
        "threshold": Option("float", 0.9, "fidelity threshold", _unit),
        "trace_T": Option("float", 10.0, "protocol time of the recorded traces", _positive),
        "samples": Option("int", 41, "gap/fidelity samples per trace", _sizes(2)),
    },
    "adiabatic-zzxz": {
        "L": Option("ints", [8, 10, 12], "chain lengths", _sizes(2)),
        "J": Option("floats", [0.5, 1.0, 1.5, 2.0, 2.5], "target couplings"),
        "h_x": Option("float", 1.0, "transverse field"),
        "h_z": Option("float", 0.75, "longitudinal field"),
        "boundary": Option("str", "open", "chain boundary", choices=("open", "periodic")),
        "cd_basis": Option("str", "local", "counter-diabatic families", choices=("local", "commutator")),
        "T_min": Option("float", 0.5, "shortest protocol time", _positive),
        "T_max": Option("float", 50.0, "longest protocol time", _positive),
        "T_per_decade": Option("int", 6, "geometric grid density", _sizes(1)),
        "threshold": Option("float", 0.9, "fidelity threshold", _unit),
        "trace_T": Option("float", 10.0, "protocol time of the recorded traces", _positive),
        "samples": Option("int", 41, "gap/fidelity samples per trace", _sizes(2)),
    },
    "adiabatic-alt": {
        "mode": Option("str", "ramp_hx", "switching path", choices=("ramp_hx", "ramp_J", "zzxz_odd")),
        "L": Option("ints", [11, 12], "chain lengths", _sizes(2)),
        "J": Option("floats", [1.0], "coupling (fixed for ramp_hx, target otherwise)"),
        "h_x": Option("floats", [0.25, 0.5, 1.0, 2.0], "target transverse fields for ramp_hx", _positive),
        "h_z": Option("float", 0.75, "longitudinal field for zzxz_odd"),
        "boundary": Option("str", "open", "chain boundary", choices=("open", "periodic")),
        "T_min": Option("float", 0.5, "shortest protocol time", _positive),
        "T_max": Option("float", 50.0, "longest protocol time", _positive),
        "T_per_decade": Option("int", 6, "geometric grid density", _sizes(1)),
        "threshold": Option("float", 0.9, "fidelity threshold", _unit),
        "trace_T": Option("float", 10.0, "protocol time of the recorded traces", _positive),
        "samples": Option("int", 41, "gap/fidelity samples per trace", _sizes(2)),
    },
    "vqe-tfi": {
        "L": Option("int", 12, "qubits", _sizes(2)),
        "J": Option("floats", [0.2, 0.5, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.5, 2.0, 2.5], "couplings"),
        "h_x": Option("float", 1.0, "transverse field"),
        "bias": Option("float", 0.001, "longitudinal bias"),
        "d_max": Option("int", 8, "maximum depth", _nonneg),
        "threshold": Option("float", 0.9, "fidelity threshold", _unit),
        "restarts": Option("int", 4, "random starts per depth", _sizes(1)),
    },
    "vqe-zzxz": {
        "L": Option("int", 12, "qubits", _sizes(2)),
        "J": Option("floats", [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5], "couplings"),
        "h_x": Option("float", 1.0, "transverse field"),
        "h_z": Option("float", 0.75, "longitudinal field"),
        "d_max": Option("int", 8, "maximum depth", _nonneg),
        "threshold": Option("float", 0.9, "fidelity threshold", _unit),
        "restarts": Option("int", 4, "random starts per depth", _sizes(1)),
    },
    "scaling-fit": {
        "input": Option("str", "", "CSV with a size column and an observable column", _nonempty),
        "size_column": Option("str", "N", "column holding system sizes"),
        "value_column": Option("str", "y", "column holding the observable"),
        "law": Option("str", "power_offset", "scaling law",
                      choices=("power_offset", "position", "power", "linear_log")),
        "x_c": Option("str", "", "fixed critical value for the position law (empty: fitted)"),
    },
}

for _schema in SCHEMAS.values():
    for _k, _opt in COMMON.items():
        _schema.setdefault(_k, _opt)


@dataclass
class RunConfig:
    subcommand: str
    values: dict
    sources: dict = field(default_factory=dict)   # key -> "default" | "file:line" | "cli"

    def __getitem__(self, key):
        return self.values[key]

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    @property
    def output_dir(self) -> Path:
        out = self.values.get("output_dir") or os.environ.get(OUTPUT_ENV) or "results"
        return Path(out)

    def canonical(self) -> dict:
        v = {k: val for k, val in self.values.items() if k not in ("output_dir", "jobs")}
        return {"subcommand": self.subcommand, "values": v}

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _key_lines(text: str) -> dict:
    lines = {}
    for no, raw in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*([A-Za-z_][\w\-]*)\s*[=:]", raw)
        if m and not raw.lstrip().startswith(("#", ";", "[")):
            lines.setdefault(m.group(1), no)
    return lines


def _coerce(schema, key, raw, where=None, source=None):
    if key not in schema:
        raise ConfigError(key, "unknown key for this subcommand", where, source)
    opt = schema[key]
    try:
        val = PARSERS[opt.kind](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"expected {opt.kind}: {exc}", where, source) from None
    if opt.choices and val not in opt.choices:
        raise ConfigError(key, f"must be one of {', '.join(opt.choices)}", where, source)
    if opt.check:
        msg = opt.check(val)
        if msg:
            raise ConfigError(key, msg, where, source)
    return val


def load_config(subcommand: str, path: str | os.PathLike | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file, then ``overrides`` (already-typed or string values)."""
    if subcommand not in SCHEMAS:
        raise ConfigError("subcommand", f"unknown subcommand {subcommand!r}")
    schema = SCHEMAS[subcommand]
    values = {k: (list(o.default) if isinstance(o.default, list) else o.default) for k, o in schema.items()}
    sources = {k: "default" for k in schema}
    if path is not None:
        text = Path(path).read_text()
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text if text.lstrip().startswith("[") else "[run]\n" + text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError("file", str(exc).splitlines()[0], source=str(path)) from None
        lines = _key_lines(text)
        for section in parser.sections():
            for key, raw in parser.items(section):
                line = lines.get(key)
                values[key] = _coerce(schema, key, raw, line, str(path))
                sources[key] = f"{path}:{line if line is not None else '?'}"
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        values[key] = _coerce(schema, key, raw)
        sources[key] = "cli"
    for lo, hi in (("J_min", "J_max"), ("lam_min", "lam_max"), ("T_min", "T_max")):
        if lo in values and values[lo] >= values[hi]:
            raise ConfigError(hi, f"must exceed {lo}")
    return RunConfig(subcommand, values, sources)
