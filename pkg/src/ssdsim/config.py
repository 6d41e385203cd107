"""Scenario configuration: dataclasses, validation, and TOML round-tripping."""

from __future__ import annotations

import math

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .anisotropy import builtin_names, get_anisotropy
from .films import InitialFilmSpec, build_initial_film
from .substrate import (
    CircleSubstrate,
    LineSubstrate,
    Substrate,
    cosine_substrate,
    sine_substrate,
    smoothed_corner_substrate,
)

__all__ = [
    "SolverConfig",
    "PinchConfig",
    "ScenarioConfig",
    "build_substrate",
    "build_scenario",
    "load_config",
    "save_config",
    "config_to_dict",
    "config_from_dict",
]

DEFAULT_SIGMA = -math.sqrt(3.0) / 2.0

_SUBSTRATE_FIELDS = {
    "line": {"origin", "direction"},
    "circle": {"radius", "center", "theta0", "spin"},
    "cos": {"amplitude", "wavenumber"},
    "sin": {"amplitude", "wavenumber"},
    "smoothed_corner": {"radius"},
}


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_iters: int = 100
    perturb_scale: float = 1e-8
    seed: int = 0
    extra_iterations: int = 2


@dataclass(frozen=True)
class PinchConfig:
    enabled: bool = False
    threshold_factor: float = 0.2


@dataclass(frozen=True)
class ScenarioConfig:
    substrate: dict
    anisotropy: str
    films: tuple[InitialFilmSpec, ...]
    n_elements: int
    dt: float
    t_end: float
    sigma: float = DEFAULT_SIGMA
    eta: float = 100.0
    scheme: str = "corrected"
    solver: SolverConfig = field(default_factory=SolverConfig)
    pinch: PinchConfig = field(default_factory=PinchConfig)
    preset: str | None = None
    out_dir: str | None = None
    snapshot_every: int | None = None
    notes: str = ""

    def __post_init__(self):
        validate_config(self)

    def replace(self, **kwargs) -> "ScenarioConfig":
        return replace(self, **kwargs)


def validate_config(cfg: ScenarioConfig) -> None:
    kind = cfg.substrate.get("kind")
    if kind not in _SUBSTRATE_FIELDS:
        raise ValueError(
            f"substrate.kind must be one of {sorted(_SUBSTRATE_FIELDS)}, got {kind!r}"
        )
    extra = set(cfg.substrate) - _SUBSTRATE_FIELDS[kind] - {"kind"}
    if extra:
        raise ValueError(f"unknown substrate field(s) {sorted(extra)} for kind {kind!r}")
    if cfg.anisotropy not in builtin_names():
        raise ValueError(
            f"anisotropy must be one of {builtin_names()}, got {cfg.anisotropy!r}"
        )
    if not cfg.films:
        raise ValueError("films must contain at least one film")
    if cfg.n_elements < 4:
        raise ValueError(f"n_elements must be >= 4, got {cfg.n_elements}")
    if not cfg.dt > 0.0:
        raise ValueError(f"dt must be > 0, got {cfg.dt}")
    if cfg.t_end < 0.0:
        raise ValueError(f"t_end must be >= 0, got {cfg.t_end}")
    if cfg.scheme not in ("corrected", "uncorrected"):
        raise ValueError(f"scheme must be 'corrected' or 'uncorrected', got {cfg.scheme!r}")
    if not cfg.solver.tol > 0.0:
        raise ValueError(f"solver.tol must be > 0, got {cfg.solver.tol}")
    if cfg.solver.max_iters < 1:
        raise ValueError("solver.max_iters must be >= 1")
    if cfg.snapshot_every is not None and cfg.snapshot_every < 1:
        raise ValueError("snapshot_every must be >= 1")


def build_substrate(spec: dict) -> Substrate:
    kind = spec["kind"]
    if kind == "line":
        return LineSubstrate(
            origin=spec.get("origin", (0.0, 0.0)),
            direction=spec.get("direction", (1.0, 0.0)),
        )
    if kind == "circle":
        return CircleSubstrate(
            radius=spec["radius"],
            center=spec.get("center", (0.0, 0.0)),
            theta0=spec.get("theta0", 0.0),
            spin=spec.get("spin", 1),
        )
    if kind == "cos":
        return cosine_substrate(
            amplitude=spec.get("amplitude", 4.0),
            wavenumber=spec.get("wavenumber", 0.25),
        )
    if kind == "sin":
        return sine_substrate(
            amplitude=spec.get("amplitude", 3.0),
            wavenumber=spec.get("wavenumber", 2.0 * math.pi / 15.0),
        )
    if kind == "smoothed_corner":
        return smoothed_corner_substrate(radius=spec.get("radius", 1.0))
    raise ValueError(f"unknown substrate kind {kind!r}")


def build_scenario(cfg: ScenarioConfig):
    """Instantiate (substrate, anisotropy, initial island states)."""
    sub = build_substrate(cfg.substrate)
    aniso = get_anisotropy(cfg.anisotropy)
    states = [build_initial_film(f, sub, cfg.n_elements) for f in cfg.films]
    return sub, aniso, states


# ---------------------------------------------------------------------------
# dict / TOML round trip


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out = {
        "anisotropy": cfg.anisotropy,
        "sigma": cfg.sigma,
        "eta": cfg.eta,
        "n_elements": cfg.n_elements,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "scheme": cfg.scheme,
        "substrate": dict(cfg.substrate),
        "solver": asdict(cfg.solver),
        "pinch": asdict(cfg.pinch),
        "films": [
            {k: v for k, v in asdict(f).items() if v is not None}
            for f in cfg.films
        ],
    }
    for key in ("preset", "out_dir", "snapshot_every"):
        value = getattr(cfg, key)
        if value is not None:
            out[key] = value
    if cfg.notes:
        out["notes"] = cfg.notes
    return out


def config_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    films = tuple(
        InitialFilmSpec(
            kind=f["kind"],
            c_l=float(f.get("c_l", 0.0)),
            c_r=float(f.get("c_r", 0.0)),
            thickness=float(f.get("thickness", 1.0)),
            side=int(f.get("side", 1)),
            nodes=_nested_tuple(f["nodes"]) if "nodes" in f else None,
        )
        for f in data.pop("films")
    )
    solver = SolverConfig(**data.pop("solver", {}))
    pinch = PinchConfig(**data.pop("pinch", {}))
    substrate = dict(data.pop("substrate"))
    if "center" in substrate:
        substrate["center"] = tuple(float(v) for v in substrate["center"])
    if "origin" in substrate:
        substrate["origin"] = tuple(float(v) for v in substrate["origin"])
    if "direction" in substrate:
        substrate["direction"] = tuple(float(v) for v in substrate["direction"])
    known = {
        "anisotropy", "sigma", "eta", "n_elements", "dt", "t_end", "scheme",
        "preset", "out_dir", "snapshot_every", "notes",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config field(s): {sorted(unknown)}")
    return ScenarioConfig(
        substrate=substrate, films=films, solver=solver, pinch=pinch, **data
    )


def _nested_tuple(rows):
    return tuple(tuple(float(v) for v in row) for row in rows)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError("non-finite floats are not representable in config files")
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__} to TOML")


def _emit_table(lines: list[str], table: dict) -> None:
    for key, value in table.items():
        lines.append(f"{key} = {_toml_value(value)}")


def save_config(cfg: ScenarioConfig, path) -> None:
    data = config_to_dict(cfg)
    lines: list[str] = []
    scalars = {
        k: v for k, v in data.items()
        if k not in ("substrate", "solver", "pinch", "films")
    }
    _emit_table(lines, scalars)
    for name in ("substrate", "solver", "pinch"):
        lines.append("")
        lines.append(f"[{name}]")
        _emit_table(lines, data[name])
    for film in data["films"]:
        lines.append("")
        lines.append("[[films]]")
        _emit_table(lines, film)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_config(path) -> ScenarioConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return config_from_dict(data)
