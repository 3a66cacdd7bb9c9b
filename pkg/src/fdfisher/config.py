"""Flat ``key = value`` simulation configs."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

EQUATIONS = ("fdfp", "heat", "model", "landau")
INITS = ("equilibrium", "fd_profile", "scaled_equilibrium", "periodic_wave")

DEFAULT_KIND = {
    ("fdfp", 1): "line-1d",
    ("fdfp", 2): "tensor-2d",
    ("heat", 1): "torus-1d",
    ("heat", 2): "torus-2d",
    ("model", 2): "polar-2d",
    ("landau", 2): "polar-2d",
}


class ConfigError(ValueError):
    pass


@dataclass
class SimulationConfig:
    equation: str = "fdfp"
    dimension: int = 1
    epsilon: float = 0.0
    beta: float | None = None
    mass: float | None = None
    grid_kind: str | None = None
    grid_extent: float = 8.0
    grid_n: int = 256
    grid_m: int = 128
    grid_center: tuple = ()
    init: str = "equilibrium"
    init_alpha: float = 1.0
    init_u: tuple = (0.0, 0.0)
    init_scale: float = 1.0
    t_end: float = 1.0
    samples: int = 10
    dt: float | None = None
    output_csv: str | None = None
    output_json: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.equation not in EQUATIONS:
            raise ConfigError(f"equation: expected one of {EQUATIONS}, got {self.equation!r}")
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension: expected 1 or 2, got {self.dimension}")
        if self.equation in ("model", "landau") and self.dimension != 2:
            raise ConfigError(f"dimension: equation {self.equation} needs dimension = 2")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon: must be a finite number >= 0, got {self.epsilon}")
        if self.beta is not None and self.mass is not None:
            raise ConfigError("beta/mass: give exactly one of beta and mass, not both")
        if self.beta is not None and not self.beta > 0:
            raise ConfigError(f"beta: must be > 0, got {self.beta}")
        if self.mass is not None and not self.mass > 0:
            raise ConfigError(f"mass: must be > 0, got {self.mass}")
        if self.grid_kind is None:
            self.grid_kind = DEFAULT_KIND[(self.equation, self.dimension)]
        if self.init not in INITS:
            raise ConfigError(f"init: expected one of {INITS}, got {self.init!r}")
        if not self.t_end > 0:
            raise ConfigError(f"time.t_end: must be > 0, got {self.t_end}")
        if self.samples < 1:
            raise ConfigError(f"time.samples: must be >= 1, got {self.samples}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"time.dt: must be > 0, got {self.dt}")
        if not self.init_alpha > 0:
            raise ConfigError(f"init.alpha: must be > 0, got {self.init_alpha}")
        if not self.init_scale > 0:
            raise ConfigError(f"init.scale: must be > 0, got {self.init_scale}")

    @property
    def sample_times(self) -> list:
        return [self.t_end * k / self.samples for k in range(self.samples + 1)]

    def as_dict(self) -> dict:
        return asdict(self)


# key -> (attribute, converter)
_KEYS = {
    "equation": ("equation", str),
    "dimension": ("dimension", int),
    "epsilon": ("epsilon", float),
    "beta": ("beta", float),
    "mass": ("mass", float),
    "grid.kind": ("grid_kind", str),
    "grid.extent": ("grid_extent", float),
    "grid.n": ("grid_n", int),
    "grid.m": ("grid_m", int),
    "init": ("init", str),
    "init.alpha": ("init_alpha", float),
    "init.scale": ("init_scale", float),
    "time.t_end": ("t_end", float),
    "time.samples": ("samples", int),
    "time.dt": ("dt", float),
    "output.csv": ("output_csv", str),
    "output.json": ("output_json", str),
}


def parse_config_text(text: str, base_dir: Path | None = None) -> SimulationConfig:
    values: dict = {}
    u = [0.0, 0.0]
    center: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key in ("init.u1", "init.u2"):
                u[int(key[-1]) - 1] = float(value)
            elif key in ("grid.center1", "grid.center2"):
                center[int(key[-1]) - 1] = float(value)
            elif key in _KEYS:
                attr, conv = _KEYS[key]
                if attr in values:
                    raise ConfigError(f"line {lineno}: duplicate key {key}")
                values[attr] = conv(value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    values["init_u"] = tuple(u)
    if center:
        dim = values.get("dimension", 1)
        values["grid_center"] = tuple(center.get(i, 0.0) for i in range(dim))
    for out in ("output_csv", "output_json"):
        if base_dir is not None and values.get(out) and not Path(values[out]).is_absolute():
            values[out] = str(Path(base_dir) / values[out])
    return SimulationConfig(**values)


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, base_dir=path.parent)
