"""Problem configuration files.

Plain INI text (UTF-8, ``#`` comments).  Sections are named after the
modules they configure; unknown sections or keys are rejected and every
error names the key and its line.  Example::

    [app_cli]
    preset = cantilever2d

    [core_mesh]
    dims = 96 48

    [filter]
    tau = 1.0

    [optimizer]
    t_stop = 0.92
"""

import configparser
from dataclasses import dataclass, field, fields

import numpy as np

from .elasticity import Material
from .optimizer import MAX_ITER, RELAX, TOL_C, TOL_CHI, TOL_LAMBDA, make_schedule
from .problems import PRESETS


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and line."""


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _auto_or_float(text):
    return "auto" if text.strip().lower() == "auto" else float(text)


def _relax(text):
    return "harmonic" if text.strip().lower() == "harmonic" else float(text)


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> parser
SCHEMA = {
    "app_cli": {"preset": str, "output_dir": str, "timing": _bool},
    "core_mesh": {"dims": _ints, "lengths": _floats},
    "elasticity": {
        "E": float, "nu": float, "alpha": float, "m": int, "solver": str,
        "load_height": float, "traction": float, "support_width": float,
        "k_in": float, "k_out": float, "f_in": float, "f_out": float, "port": float,
    },
    "filter": {"tau": _floats},
    "optimizer": {
        "n": int, "K": float, "t0": float, "T": float, "t_stop": float, "times": _floats,
        "tol_chi": float, "tol_lambda": float, "tol_c": float, "max_iter": int,
        "relax": _relax,
    },
    "levelset": {"k": _auto_or_float, "rho": float},
}

# preset-specific keys accepted in [elasticity]
PRESET_KEYS = {
    "cantilever2d": {"load_height", "traction"},
    "cantilever3d": {"load_height", "traction"},
    "bridge3d": {"support_width", "traction"},
    "gripper2d": {"k_in", "k_out", "f_in", "f_out", "port"},
}

PRESET_DEFAULTS = {
    "cantilever2d": {"dims": (96, 48), "lengths": (2.0, 1.0), "tau": (1.0,)},
    "cantilever3d": {"dims": (24, 12, 6), "lengths": (2.0, 1.0, 0.5), "tau": (1.0,)},
    "bridge3d": {"dims": (60, 51, 10), "lengths": (1.0, 0.85, 1.0 / 6.0), "tau": (0.316,)},
    "gripper2d": {"dims": (80, 40), "lengths": (1.0e-4, 5.0e-5), "tau": (0.5,),
                  "nu": 0.31, "alpha": 1e-2, "m": 3},
}


@dataclass
class ProblemConfig:
    """Validated configuration with defaults filled in."""

    preset: str = "cantilever2d"
    dims: tuple = None
    lengths: tuple = None
    E: float = 210e9
    nu: float = 0.3
    alpha: float = 1e-6
    m: int = 5
    solver: str = "direct"
    preset_options: dict = field(default_factory=dict)
    tau: tuple = None
    n: int = 40
    K: float = -4.5
    t0: float = 0.0
    T: float = 1.0
    t_stop: float = None
    times: tuple = None
    tol_chi: float = TOL_CHI
    tol_lambda: float = TOL_LAMBDA
    tol_c: float = TOL_C
    max_iter: int = MAX_ITER
    relax: object = RELAX
    k: object = "auto"
    rho: float = 1.0
    output_dir: str = None
    timing: bool = False

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        d = PRESET_DEFAULTS[self.preset]
        if self.dims is None:
            self.dims = d["dims"]
        if self.lengths is None:
            self.lengths = d["lengths"]
        if self.tau is None:
            self.tau = d["tau"]

    @property
    def material(self):
        return Material(E=self.E, nu=self.nu, alpha=self.alpha, m=self.m)

    def schedule(self):
        if self.times is not None:
            from .optimizer import TimeSchedule
            return TimeSchedule(tuple(self.times))
        s = make_schedule(self.n, self.K, self.t0, self.T)
        return s.truncate(self.t_stop) if self.t_stop is not None else s

    def tau_value(self):
        return self.tau[0] if len(self.tau) == 1 else self.tau

    def build_problem(self):
        """Instantiate the preset with this configuration."""
        factory = PRESETS[self.preset]
        kwargs = dict(self.preset_options)
        if len(self.dims) != len(self.lengths):
            raise ConfigError("dims and lengths must have the same number of entries")
        return factory(*self.dims, lengths=tuple(self.lengths), material=self.material,
                       solver=self.solver, **kwargs)

    def check(self):
        """Invariant checks; raises :class:`ConfigError`."""
        for name in ("tol_chi", "tol_lambda", "tol_c"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.relax != "harmonic" and not 0.0 < self.relax <= 1.0:
            raise ConfigError("relax must be 'harmonic' or lie in (0, 1]")
        if self.solver not in ("direct", "cg"):
            raise ConfigError("solver must be 'direct' or 'cg'")
        if any(t < 0 for t in self.tau):
            raise ConfigError("tau must be >= 0")
        return self


def _line_numbers(text):
    """Map ``(section, key)`` to 1-based line numbers."""
    out = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out[(section, None)] = i
            continue
        for sep in ("=", ":"):
            if sep in line:
                out[(section, line.split(sep, 1)[0].strip().lower())] = i
                break
    return out


def parse_config_text(text, source="<string>"):
    """Parse configuration text into a :class:`ProblemConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    lines = _line_numbers(text)
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            line = lines.get((section, None), "?")
            raise ConfigError(f"{source}:{line}: unknown section [{section}]")
        keys = {k.lower(): k for k in SCHEMA[section]}
        for key, raw in parser.items(section):
            line = lines.get((section, key.lower()), "?")
            if key.lower() not in keys:
                raise ConfigError(f"{source}:{line}: unknown key {key!r} in [{section}]")
            name = keys[key.lower()]
            try:
                values[name] = SCHEMA[section][name](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{source}:{line}: bad value for {name!r}: {raw!r} ({exc})"
                                  ) from exc
            values.setdefault("_lines", {})[name] = line

    lines_of = values.pop("_lines", {})
    preset = values.get("preset", "cantilever2d")
    if preset not in PRESETS:
        raise ConfigError(f"{source}:{lines_of.get('preset', '?')}: unknown preset {preset!r}")
    for key, val in PRESET_DEFAULTS[preset].items():
        if key not in ("dims", "lengths", "tau"):
            values.setdefault(key, val)
    options = {}
    for key in SCHEMA["elasticity"]:
        if key in ("E", "nu", "alpha", "m", "solver"):
            continue
        if key in values:
            if key not in PRESET_KEYS[preset]:
                raise ConfigError(f"{source}:{lines_of.get(key, '?')}: key {key!r} does not "
                                  f"apply to preset {preset!r}")
            options[key] = values.pop(key)
    known = {f.name for f in fields(ProblemConfig)}
    cfg = ProblemConfig(preset_options=options, **{k: v for k, v in values.items() if k in known})
    try:
        return cfg.check()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_config(path):
    """Read and validate a configuration file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config_text(text, source=str(path))


def default_config(preset="cantilever2d"):
    return parse_config_text(f"[app_cli]\npreset = {preset}\n")


def schedule_array(cfg):
    return np.asarray(cfg.schedule().times)
