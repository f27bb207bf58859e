"""Run configuration: an INI-style document with JSON value literals.

Sections ``[system]``, ``[data]``, ``[grid]``, ``[tolerances]`` and
``[sweep]``. Scalars and matrices are JSON (``A1 = [[0, 1], [1, 0]]``);
bare words are strings. Matrices may continue over indented lines.
"""

import configparser
import dataclasses
import json
import re
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .errors import ParseError, SchemaError
from .grid import GridSpec
from .profiles import DataSpec
from .system import RelaxationSystem

SECTIONS = ("system", "data", "grid", "tolerances", "sweep")
LAYER_SOURCES = ("coupled", "zero")

# config key -> DataSpec attribute
DATA_KEYS = {
    "u0": "u0_kind", "u0_vector": "u0_vector", "u0_center": "u0_center",
    "u0_width": "u0_width", "b": "b_kind", "b_vector": "b_vector",
    "b_rise": "b_rise", "b_add_trace": "b_add_trace",
    "tangential_modes": "tangential_modes", "tangential_period": "tangential_period",
}
GRID_KEYS = tuple(f.name for f in dataclasses.fields(GridSpec) if f.name != "tol_layer")


@dataclass
class Tolerances:
    tol_zero: float = la.TOL_ZERO
    tol_sym: float = la.TOL_SYM
    tol_congruence: float = 1e-10
    tol_invert: float = 1e-8
    tol_compat: float = 1e-10
    tol_layer: float = 1e-12
    gkc_threshold: float = 1e-6
    ukc_threshold: float = 1e-6


TOL_KEYS = tuple(f.name for f in dataclasses.fields(Tolerances))


@dataclass
class RunConfig:
    name: str
    d: int
    n: int
    r: int
    A: list
    Q: list
    B: list
    A0: list = None
    data: DataSpec = field(default_factory=DataSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    tolerances: Tolerances = field(default_factory=Tolerances)
    epsilons: list = field(default_factory=lambda: [1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
    layer_source: str = "coupled"
    frequency_grid: str = "21,21,9,13"
    path: str = None

    def system(self):
        return RelaxationSystem(A=tuple(np.asarray(a, float) for a in self.A),
                                Q=np.asarray(self.Q, float), B=np.asarray(self.B, float),
                                A0=None if self.A0 is None else np.asarray(self.A0, float),
                                r=self.r, name=self.name)

    def grid_spec(self):
        return dataclasses.replace(self.grid, tol_layer=self.tolerances.tol_layer)


def _line_index(text):
    """Map ``(section, key)`` to the 1-based line of its definition."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            out[(section, None)] = i
            continue
        m = re.match(r"^([A-Za-z_][\w]*)\s*[=:]", line)
        if m and section is not None:
            out[(section, m.group(1).lower())] = i
    return out


def _value(raw, section, key, lines):
    raw = " ".join(raw.split())
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        if re.fullmatch(r"[A-Za-z_][\w\-.]*|\d+(\s*,\s*\d+)+", raw):
            return raw.replace(" ", "")
        raise ParseError(f"cannot parse value {raw!r}",
                         line=lines.get((section, key)), field=f"{section}.{key}") from None


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_matrix(v):
    return (isinstance(v, list) and v and all(isinstance(r, list) for r in v)
            and all(_is_num(x) for r in v for x in r)
            and len({len(r) for r in v}) == 1)


def _is_vector(v):
    return isinstance(v, list) and all(_is_num(x) for x in v)


def parse_text(text, path=None):
    """Parse a configuration document into a validated :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError(f"malformed line {exc.errors[0][1] if exc.errors else ''}".strip(),
                         line=lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", line=exc.lineno,
                         field=f"{exc.section}.{exc.option}") from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section {exc.section!r}", line=exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("content before the first section header", line=exc.lineno) from None
    lines = _line_index(text)
    raw = {s: {k: _value(v, s, k, lines) for k, v in cp[s].items()} for s in cp.sections()}
    return _build(raw, path)


def load_config(path):
    """Read and validate a configuration file.

    Raises
    ------
    ParseError
        Syntax problems, with line and field where known.
    SchemaError
        Every violated schema constraint at once.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text, str(path))


def _build(raw, path):
    errs = []
    for s in raw:
        if s not in SECTIONS:
            errs.append(f"unknown section [{s}]")
    sysd = raw.get("system", {})
    if "system" not in raw:
        errs.append("missing section [system]")

    def take(sec, key, check, msg, default=None, required=False):
        d = raw.get(sec, {})
        if key not in d:
            if required:
                errs.append(f"{sec}.{key}: required")
            return default
        v = d[key]
        if not check(v):
            errs.append(f"{sec}.{key}: {msg}")
            return default
        return v

    is_int = lambda v: isinstance(v, int) and not isinstance(v, bool)
    name = take("system", "name", lambda v: isinstance(v, str), "must be a word", "")
    d = take("system", "d", lambda v: is_int(v) and v >= 1, "must be a positive integer",
             None, True)
    n = take("system", "n", lambda v: is_int(v) and v >= 1, "must be a positive integer",
             None, True)
    r = take("system", "r", lambda v: is_int(v) and v >= 0, "must be a nonnegative integer",
             None, True)
    if n is not None and r is not None and r > n:
        errs.append(f"system.r: {r} exceeds n = {n}")

    def square(key, required=True):
        v = take("system", key, _is_matrix, "must be a rectangular numeric matrix",
                 None, required)
        if v is not None and n is not None and (len(v) != n or len(v[0]) != n):
            errs.append(f"system.{key}: shape {len(v)}x{len(v[0])}, expected {n}x{n}")
            return None
        return v

    A = []
    if d is not None:
        A = [square(f"a{j}") for j in range(1, d + 1)]
    extra = sorted(k for k in sysd if re.fullmatch(r"a\d+", k)
                   and (d is None or not 1 <= int(k[1:]) <= d))
    for k in extra:
        errs.append(f"system.{k}: more coefficient matrices than d = {d}")
    Q = square("q")
    A0 = square("a0", required=False)
    B = take("system", "b", _is_matrix, "must be a rectangular numeric matrix", None, True)
    if B is not None and n is not None and len(B[0]) != n:
        errs.append(f"system.b: {len(B[0])} columns, expected n = {n}")
    for k in sysd:
        if k not in ("name", "d", "n", "r", "q", "a0", "b") and not re.fullmatch(r"a\d+", k):
            errs.append(f"system.{k}: unknown key")
    if Q is not None and r is not None:
        rq = int(np.linalg.matrix_rank(np.asarray(Q, float), tol=la.TOL_ZERO
                                       * max(1.0, la.norm(np.asarray(Q, float)))))
        if rq != r:
            errs.append(f"system.r: declared {r} but rank Q = {rq}")

    data = DataSpec()
    for k, v in raw.get("data", {}).items():
        if k not in DATA_KEYS:
            errs.append(f"data.{k}: unknown key")
            continue
        attr = DATA_KEYS[k]
        default = getattr(data, attr)
        if isinstance(default, bool):
            ok = isinstance(v, bool)
        elif isinstance(default, list):
            ok = _is_vector(v)
        elif isinstance(default, str):
            ok = isinstance(v, str)
        else:
            ok = _is_num(v)
        if not ok:
            errs.append(f"data.{k}: wrong type {type(v).__name__}")
            continue
        setattr(data, attr, float(v) if isinstance(default, float) else v)

    grid = GridSpec()
    for k, v in raw.get("grid", {}).items():
        if k not in GRID_KEYS:
            errs.append(f"grid.{k}: unknown key")
            continue
        default = getattr(grid, k)
        if isinstance(default, list):
            ok = _is_vector(v)
        elif isinstance(default, int):
            ok = is_int(v)
        else:
            ok = _is_num(v)
        if not ok:
            errs.append(f"grid.{k}: wrong type {type(v).__name__}")
            continue
        setattr(grid, k, float(v) if isinstance(default, float) else v)
    if d is not None:
        errs.extend(grid.validate(d))

    tol = Tolerances()
    for k, v in raw.get("tolerances", {}).items():
        if k not in TOL_KEYS:
            errs.append(f"tolerances.{k}: unknown key")
        elif not (_is_num(v) and v > 0):
            errs.append(f"tolerances.{k}: must be a positive number")
        else:
            setattr(tol, k, float(v))

    sweep = raw.get("sweep", {})
    eps = RunConfig.__dataclass_fields__["epsilons"].default_factory()
    layer_source, fgrid = "coupled", "21,21,9,13"
    for k, v in sweep.items():
        if k == "epsilons":
            if not (_is_vector(v) and v and all(e > 0 for e in v)):
                errs.append("sweep.epsilons: must be a nonempty list of positive numbers")
            elif any(a <= b for a, b in zip(v, v[1:])):
                errs.append("sweep.epsilons: must be strictly descending")
            else:
                eps = [float(e) for e in v]
        elif k == "layer_source":
            if v not in LAYER_SOURCES:
                errs.append(f"sweep.layer_source: must be one of {LAYER_SOURCES}")
            else:
                layer_source = v
        elif k == "frequency_grid":
            v = str(v)
            if not re.fullmatch(r"\d+,\d+,\d+,\d+", v):
                errs.append("sweep.frequency_grid: expected four integers n_re,n_im,n_omega,n_eta")
            else:
                fgrid = v
        else:
            errs.append(f"sweep.{k}: unknown key")

    if n is not None and r is not None and A and A[0] is not None:
        m = n - r
        n_plus = int(np.sum(np.linalg.eigvalsh(0.5 * (np.asarray(A[0], float)
                                                       + np.asarray(A[0], float).T))
                            > la.TOL_ZERO))
        if A0 is None:
            errs.extend(data.validate(m, n_plus))
        if B is not None and len(B) != n_plus:
            errs.append(f"system.b: {len(B)} rows, expected n_plus = {n_plus}")

    if errs:
        raise SchemaError(errs)
    return RunConfig(name=name, d=d, n=n, r=r, A=A, Q=Q, B=B, A0=A0, data=data, grid=grid,
                     tolerances=tol, epsilons=eps, layer_source=layer_source,
                     frequency_grid=fgrid, path=path)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list) and v and isinstance(v[0], list):
        rows = ",\n    ".join(json.dumps([float(x) for x in r]) for r in v)
        return "[" + rows + "]"
    return json.dumps(v)


def print_config(cfg):
    """Deterministic echo that parses back to an equal configuration."""
    out = ["[system]"]
    if cfg.name:
        out.append(f"name = {cfg.name}")
    out += [f"d = {cfg.d}", f"n = {cfg.n}", f"r = {cfg.r}"]
    for j, a in enumerate(cfg.A, start=1):
        out.append(f"A{j} = {_fmt(a)}")
    out.append(f"Q = {_fmt(cfg.Q)}")
    if cfg.A0 is not None:
        out.append(f"A0 = {_fmt(cfg.A0)}")
    out.append(f"B = {_fmt(cfg.B)}")
    out += ["", "[data]"]
    for k, attr in DATA_KEYS.items():
        out.append(f"{k} = {_fmt(getattr(cfg.data, attr))}")
    out += ["", "[grid]"]
    for k in GRID_KEYS:
        out.append(f"{k} = {_fmt(getattr(cfg.grid, k))}")
    out += ["", "[tolerances]"]
    for k in TOL_KEYS:
        out.append(f"{k} = {_fmt(getattr(cfg.tolerances, k))}")
    out += ["", "[sweep]", f"epsilons = {_fmt(cfg.epsilons)}",
            f"layer_source = {cfg.layer_source}",
            f"frequency_grid = {json.dumps(cfg.frequency_grid)}"]
    return "\n".join(out) + "\n"


def apply_grid_overrides(cfg, spec):
    """Apply ``key=value,key=value`` overrides to the grid block."""
    errs = []
    for item in filter(None, (s.strip() for s in spec.split(","))):
        if "=" not in item:
            errs.append(f"--grid: expected key=value, got {item!r}")
            continue
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in GRID_KEYS or isinstance(getattr(cfg.grid, k), list):
            errs.append(f"--grid: unknown or non-scalar grid key {k!r}")
            continue
        try:
            val = type(getattr(cfg.grid, k))(float(v)) if isinstance(getattr(cfg.grid, k), float) \
                else int(v)
        except ValueError:
            errs.append(f"--grid: bad value for {k}: {v!r}")
            continue
        setattr(cfg.grid, k, val)
    errs.extend(cfg.grid.validate(cfg.d))
    if errs:
        raise SchemaError(errs)
    return cfg
