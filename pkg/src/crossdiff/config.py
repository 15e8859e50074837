"""Run configuration: TOML parsing, validation, rendering and the experiment presets."""

from __future__ import annotations

import copy
import difflib
import json
import logging
import math
import re
from dataclasses import asdict, dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import CrossDiffError, ParseError, ValidationError
from .expressions import compile_expression
from .field import project_initial
from .interaction import build_interaction
from .mesh import build_mesh
from .scheme import MeanFunction, ModelConfig
from .solver import SolverConfig

log = logging.getLogger(__name__)

TOP_KEYS = {"name", "experiment", "scale", "beta"}
SECTIONS = {
    "model": {"gamma", "A", "mean", "allow_semidefinite"},
    "mesh": {"type", "n", "domain"},
    "time": {"T", "dt", "steps"},
    "initial": {"u"},
    "solver": {"newton_tol", "max_newton_iters"},
    "output": {"dir", "snapshot_stride"},
    "diagnostics": {"C_P", "C_user", "window_fraction"},
    "study": {"p_list", "p_ref", "dt_base"},
}


@dataclass(frozen=True)
class RunConfig:
    gamma: float
    A: tuple
    T: float
    initial: tuple
    mesh_type: str = "interval"
    mesh_n: tuple = (64,)
    mesh_domain: tuple = (0.0, 1.0)
    mean: str = "arithmetic"
    allow_semidefinite: bool = False
    dt: float | None = None
    steps: int | None = None
    name: str = "custom"
    snapshot_stride: int = 1
    output_dir: str = "out"
    newton_tol: float = 1e-12
    max_newton_iters: int = 50
    C_P: float = 1.0
    C_user: float = 1.0
    window_fraction: float = 0.2
    p_list: tuple = ()
    p_ref: int | None = None
    dt_base: float = 0.1

    @property
    def n(self) -> int:
        return len(self.A)

    @property
    def time_step(self) -> float:
        return self.T / self.steps if self.steps is not None else self.dt

    @property
    def n_steps(self) -> int:
        """Number of steps; a horizon that is not a multiple of ``dt`` is rounded up."""
        if self.steps is not None:
            return self.steps
        r = self.T / self.dt
        k = round(r)
        if abs(r - k) <= 1e-9 * max(r, 1.0):
            return max(int(k), 1)
        k = math.ceil(r)
        log.info("T/dt = %.6g is not an integer; running %d steps to t = %.6g", r, k, k * self.dt)
        return k

    @property
    def final_time(self) -> float:
        return self.n_steps * self.time_step

    def mesh_spec(self) -> dict:
        return {"type": self.mesh_type, "n": list(self.mesh_n), "domain": list(self.mesh_domain)}

    def build_mesh(self):
        return build_mesh(self.mesh_spec())

    def model(self) -> ModelConfig:
        A = build_interaction(self.A, allow_semidefinite=self.allow_semidefinite)
        return ModelConfig(self.gamma, A, MeanFunction(self.mean))

    def initial_functions(self):
        dim = 1 if self.mesh_type == "interval" else 2
        return [compile_expression(e, dim) for e in self.initial]

    def build(self):
        """``(model, mesh, projected initial field)``."""
        mesh = self.build_mesh()
        return self.model(), mesh, project_initial(mesh, self.initial_functions())

    def solver_config(self) -> SolverConfig:
        return SolverConfig(newton_tol=self.newton_tol, max_newton_iters=self.max_newton_iters)


# ---------------------------------------------------------------- presets

_EXP1_A = [[2.0, 1.0, 0.5], [1.0, 3.0, 1.5], [0.5, 1.5, 1.0]]


def _beta_matrix(beta):
    return [[float(beta), 2.0], [2.0, 1.0]]


PRESET_SUMMARY = {
    1: "1D, 3 species: Omega=(0,1), gamma=1/2, A=[[2,1,1/2],[1,3,3/2],[1/2,3/2,1]], "
       "u0=(cos(pi x)+2, 2-cos(2 pi x), 2), dx=1/12800 (desk 1/640), dt=1/128, T=0.1",
    2: "2D, 2 species: Omega=(0,1)^2, gamma=1/2, A=[[1,1/2],[1/2,1]], "
       "u0=(1_(0,1/2)^2, 1_(1/2,1)^2), dx=sqrt(2)*2^-5 (32x32), dt=1/256, T=0.2",
    3: "exponential decay: Omega=(0,1), gamma=0.1, A=[[beta,2],[2,1]] (beta=5 or 4.01), "
       "u0=(2-cos(pi x), 2+cos(pi x)), dx=2^-7, dt=(10*2^7)^-1, T=3",
    4: "temporal order: A, u0 as in 3, gamma=0, beta in {5,4}, dx=2^-9 (desk 2^-7), "
       "dt=(100*2^p)^-1, p=1..8 (desk 1..6), reference p=9 (desk 8), T=0.02",
}


def preset(number: int, scale: str = "desk", beta: float | None = None) -> dict:
    """Raw (sectioned) configuration mapping for experiment ``number``."""
    if scale not in ("desk", "paper"):
        raise ValidationError("scale", f"must be 'desk' or 'paper', got {scale!r}")
    desk = scale == "desk"
    if beta is not None and number not in (3, 4):
        raise ValidationError("beta", "only experiments 3 and 4 take beta")
    if number == 1:
        return {
            "name": f"experiment-1-{scale}",
            "model": {"gamma": 0.5, "A": _EXP1_A, "mean": "arithmetic"},
            "mesh": {"type": "interval", "n": [640 if desk else 12800], "domain": [0.0, 1.0]},
            "time": {"T": 0.1, "dt": 1 / 128},
            "initial": {"u": ["cos(pi*x) + 2", "2 - cos(2*pi*x)", "2"]},
        }
    if number == 2:
        return {
            "name": f"experiment-2-{scale}",
            "model": {"gamma": 0.5, "A": [[1.0, 0.5], [0.5, 1.0]], "mean": "arithmetic"},
            "mesh": {"type": "rect", "n": [32, 32], "domain": [0.0, 1.0, 0.0, 1.0]},
            "time": {"T": 0.2, "dt": 1 / 256},
            "initial": {"u": ["box(0, 0.5, 0, 0.5)", "box(0.5, 1, 0.5, 1)"]},
        }
    if number == 3:
        beta = 5.0 if beta is None else beta
        return {
            "name": f"experiment-3-beta{beta:g}",
            "model": {"gamma": 0.1, "A": _beta_matrix(beta), "mean": "arithmetic"},
            "mesh": {"type": "interval", "n": [128], "domain": [0.0, 1.0]},
            "time": {"T": 3.0, "dt": 1 / 1280},
            "initial": {"u": ["2 - cos(pi*x)", "2 + cos(pi*x)"]},
            "output": {"snapshot_stride": 128},
        }
    if number == 4:
        beta = 5.0 if beta is None else beta
        p_max, p_ref = (6, 8) if desk else (8, 9)
        return {
            "name": f"experiment-4-beta{beta:g}-{scale}",
            "model": {"gamma": 0.0, "A": _beta_matrix(beta), "mean": "arithmetic",
                      "allow_semidefinite": True},
            "mesh": {"type": "interval", "n": [128 if desk else 512], "domain": [0.0, 1.0]},
            "time": {"T": 0.02, "dt": 0.01 / 2**p_ref},
            "initial": {"u": ["2 - cos(pi*x)", "2 + cos(pi*x)"]},
            "study": {"p_list": list(range(1, p_max + 1)), "p_ref": p_ref, "dt_base": 0.01},
        }
    raise ValidationError("experiment", f"unknown preset {number!r}; choose 1-4")


# ---------------------------------------------------------------- parsing

_LOC_RE = re.compile(r"at line (\d+), column (\d+)")


def _locate_key(text, section, key):
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[\s*([A-Za-z_][\w]*)\s*\]", s)
        if m:
            current = m.group(1)
            continue
        m = re.match(r"([A-Za-z_][\w]*)\s*=", s)
        if m and m.group(1) == key and current == section:
            return lineno, line.index(key) + 1
    return None, None


def _unknown(text, section, key, known):
    line, col = _locate_key(text, section, key)
    where = f"[{section}]" if section else "top level"
    hint = difflib.get_close_matches(key, sorted(known), n=1)
    msg = f"unknown key {key!r} at {where}"
    if hint:
        msg += f"; did you mean {hint[0]!r}?"
    return ParseError(msg, line, col)


def _check_keys(raw, text):
    for key, val in raw.items():
        if key in SECTIONS:
            if not isinstance(val, dict):
                raise ParseError(f"{key!r} must be a table [{key}]", *_locate_key(text, None, key))
            for sub in val:
                if sub not in SECTIONS[key]:
                    raise _unknown(text, key, sub, SECTIONS[key])
        elif key not in TOP_KEYS:
            candidates = TOP_KEYS | set(SECTIONS) | set().union(*SECTIONS.values())
            raise _unknown(text, None, key, candidates)


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict):
            sec = dict(out.get(key, {}))
            if key == "time" and ("dt" in val or "steps" in val):
                sec.pop("dt", None)
                sec.pop("steps", None)
            sec.update(val)
            out[key] = sec
        else:
            out[key] = val
    return out


def _get(raw, section, key, default=None, required=False):
    sec = raw.get(section, {}) if section else raw
    if key in sec:
        return sec[key]
    if required:
        raise ValidationError(key, "missing")
    return default


def _number(value, name, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(name, "must be finite")
    if positive and value <= 0:
        raise ValidationError(name, "must be > 0")
    if nonneg and value < 0:
        raise ValidationError(name, "must be >= 0")
    return value


def _integer(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ValidationError(name, f"expected an integer >= {minimum}, got {value!r}")
    return value


def from_mapping(raw: dict) -> RunConfig:
    """Validate an (already preset-expanded) sectioned mapping."""
    gamma = _number(_get(raw, "model", "gamma", required=True), "gamma", nonneg=True)
    A = _get(raw, "model", "A", required=True)
    try:
        A = tuple(tuple(_number(a, "A") for a in row) for row in A)
    except TypeError:
        raise ValidationError("A", "must be a list of rows") from None
    mean = _get(raw, "model", "mean", "arithmetic")
    allow_semi = _get(raw, "model", "allow_semidefinite", False)
    if not isinstance(allow_semi, bool):
        raise ValidationError("allow_semidefinite", "must be true or false")
    if mean not in ("arithmetic", "maximum"):
        raise ValidationError("mean", f"must be 'arithmetic' or 'maximum', got {mean!r}")
    try:
        build_interaction(A, allow_semidefinite=allow_semi)
    except CrossDiffError as exc:
        raise ValidationError("A", str(exc)) from None

    mesh_type = _get(raw, "mesh", "type", required=True)
    if mesh_type not in ("interval", "rect"):
        raise ValidationError("type", f"mesh type must be 'interval' or 'rect', got {mesh_type!r}")
    dim = 1 if mesh_type == "interval" else 2
    mesh_n = tuple(_integer(v, "n", 2) for v in _get(raw, "mesh", "n", required=True))
    mesh_domain = tuple(_number(v, "domain") for v in _get(raw, "mesh", "domain", required=True))
    if len(mesh_n) != dim or len(mesh_domain) != 2 * dim:
        raise ValidationError("n", f"{mesh_type} mesh needs {dim} cell count(s) and {2 * dim} bounds")
    if any(mesh_domain[2 * a] >= mesh_domain[2 * a + 1] for a in range(dim)):
        raise ValidationError("domain", "lower bounds must be below upper bounds")

    T = _number(_get(raw, "time", "T", required=True), "T", positive=True)
    dt, steps = _get(raw, "time", "dt"), _get(raw, "time", "steps")
    if (dt is None) == (steps is None):
        raise ValidationError("dt", "give exactly one of dt or steps")
    if dt is not None:
        dt = _number(dt, "dt", positive=True)
    if steps is not None:
        steps = _integer(steps, "steps", 1)

    initial = _get(raw, "initial", "u", required=True)
    if isinstance(initial, str) or not all(isinstance(e, (str, int, float)) for e in initial):
        raise ValidationError("u", "initial data must be a list with one expression per species")
    initial = tuple(str(e) for e in initial)
    if len(initial) != len(A):
        raise ValidationError("u", f"{len(initial)} initial expressions for {len(A)} species")
    for e in initial:
        try:
            compile_expression(e, dim)
        except CrossDiffError as exc:
            raise ValidationError("u", str(exc)) from None

    p_list = tuple(_integer(p, "p_list", 0) for p in _get(raw, "study", "p_list", []))
    p_ref = _get(raw, "study", "p_ref")
    if p_ref is not None:
        p_ref = _integer(p_ref, "p_ref", 0)
        if p_list and p_ref <= max(p_list):
            raise ValidationError("p_ref", "must exceed every entry of p_list")
    window = _number(_get(raw, "diagnostics", "window_fraction", 0.2), "window_fraction")
    if not 0 <= window < 1:
        raise ValidationError("window_fraction", "must lie in [0, 1)")
    name = _get(raw, None, "name", "custom")
    if not isinstance(name, str):
        raise ValidationError("name", "must be a string")
    out_dir = _get(raw, "output", "dir", "out")
    if not isinstance(out_dir, str):
        raise ValidationError("dir", "must be a string")

    return RunConfig(
        gamma=gamma, A=A, T=T, initial=initial,
        mesh_type=mesh_type, mesh_n=mesh_n, mesh_domain=mesh_domain,
        mean=mean, allow_semidefinite=allow_semi, dt=dt, steps=steps, name=name,
        snapshot_stride=_integer(_get(raw, "output", "snapshot_stride", 1), "snapshot_stride", 1),
        output_dir=out_dir,
        newton_tol=_number(_get(raw, "solver", "newton_tol", 1e-12), "newton_tol", positive=True),
        max_newton_iters=_integer(_get(raw, "solver", "max_newton_iters", 50), "max_newton_iters", 1),
        C_P=_number(_get(raw, "diagnostics", "C_P", 1.0), "C_P", positive=True),
        C_user=_number(_get(raw, "diagnostics", "C_user", 1.0), "C_user", positive=True),
        window_fraction=window,
        p_list=p_list, p_ref=p_ref,
        dt_base=_number(_get(raw, "study", "dt_base", 0.1), "dt_base", positive=True),
    )


def expand(raw: dict, scale: str | None = None) -> dict:
    """Expand an ``experiment = N`` reference; explicit keys override the preset."""
    if "experiment" not in raw:
        return raw
    number = raw["experiment"]
    if isinstance(number, bool) or not isinstance(number, int):
        raise ValidationError("experiment", f"must be an integer, got {number!r}")
    scale = scale or raw.get("scale", "desk")
    beta = raw.get("beta")
    if beta is not None:
        beta = _number(beta, "beta")
    base = preset(number, scale, beta)
    rest = {k: v for k, v in raw.items() if k not in ("experiment", "scale", "beta")}
    return _merge(base, rest)


def parse_config(text: str, scale: str | None = None) -> RunConfig:
    """Parse TOML ``text`` into a validated :class:`RunConfig`.

    ``scale`` overrides the ``scale`` key of a preset reference.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LOC_RE.search(str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ParseError(f"invalid TOML: {str(exc).split(' (at')[0]}", line, col) from None
    _check_keys(raw, text)
    return from_mapping(expand(raw, scale))


def load_config(path, scale: str | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), scale)


def to_mapping(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    raw = {
        "name": d["name"],
        "model": {"gamma": d["gamma"], "A": [list(r) for r in d["A"]], "mean": d["mean"],
                  "allow_semidefinite": d["allow_semidefinite"]},
        "mesh": {"type": d["mesh_type"], "n": list(d["mesh_n"]), "domain": list(d["mesh_domain"])},
        "time": {"T": d["T"]},
        "initial": {"u": list(d["initial"])},
        "solver": {"newton_tol": d["newton_tol"], "max_newton_iters": d["max_newton_iters"]},
        "output": {"dir": d["output_dir"], "snapshot_stride": d["snapshot_stride"]},
        "diagnostics": {"C_P": d["C_P"], "C_user": d["C_user"],
                        "window_fraction": d["window_fraction"]},
        "study": {"p_list": list(d["p_list"]), "dt_base": d["dt_base"]},
    }
    if d["dt"] is not None:
        raw["time"]["dt"] = d["dt"]
    else:
        raw["time"]["steps"] = d["steps"]
    if d["p_ref"] is not None:
        raw["study"]["p_ref"] = d["p_ref"]
    return raw


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    return "[" + ", ".join(_toml_value(x) for x in v) + "]"


def render_config(cfg: RunConfig) -> str:
    """Fully expanded TOML text; ``parse_config(render_config(c)) == c``."""
    raw = to_mapping(cfg)
    lines = [f"{k} = {_toml_value(v)}" for k, v in raw.items() if not isinstance(v, dict)]
    for sec, body in raw.items():
        if isinstance(body, dict):
            lines.append(f"\n[{sec}]")
            lines.extend(f"{k} = {_toml_value(v)}" for k, v in body.items())
    return "\n".join(lines) + "\n"
