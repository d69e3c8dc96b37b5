"""Scenario configuration: presets, file parsing, nondimensionalization.

Scenario files are flat ``key = value`` text ('#' comments).  A file may start
from one of the built-in presets (``preset = high_discharge``) and override
individual keys.  Unknown keys are rejected with a suggestion; all validation
failures are reported together.
"""

from __future__ import annotations

import dataclasses
import difflib
import logging
from dataclasses import dataclass, field

from . import units
from .geometry import CellDimensions, scaled_dimensions
from .materials import MaterialSet, default_materials
from .mesh import MeshSpec
from .state import GuardPolicy
from .units import ScaleSet

log = logging.getLogger(__name__)

PRESET_PARAMS = {
    "low_discharge": dict(i_app=5.0, t_end=14400.0, dt=6.0),
    "high_discharge": dict(i_app=20.0, t_end=3600.0, dt=4.0),
    "low_charge": dict(i_app=-5.0, t_end=14400.0, dt=6.0),
    "high_charge": dict(i_app=-20.0, t_end=3600.0, dt=4.0),
}


@dataclass
class ScenarioConfig:
    """Full description of one run (SI units throughout)."""

    name: str = "custom"
    i_app: float = 5.0                  # A/m^2; positive discharges the cell
    t_end: float = 14400.0              # s
    dt: float = 6.0                     # s
    soc_init_anode: float = 0.5
    soc_init_cathode: float = 0.5
    model: str = "full"                 # 'full' | 'electrochemical'
    heat_convention: str = "physical"   # 'physical' | 'reversed'
    kappa_d_factor: float = 1.0
    mesh: MeshSpec = field(default_factory=MeshSpec.production)
    dims: CellDimensions = field(default_factory=CellDimensions)
    scales: ScaleSet = field(default_factory=ScaleSet)
    guard_eps_e: float | None = None    # mol/m^3; None -> policy default
    guard_eps_s: float | None = None
    guard_action: str = "clamp"
    extra_fp_iters: int = 4
    fp_tol: float = 1e-8
    warmup_steps: int = 2
    snapshot_every: float = 60.0        # simulated seconds
    threads: int = 1
    solver: str = "direct"
    solver_rtol: float = 1e-10
    material_overrides: dict = field(default_factory=dict)

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)

    def validate(self) -> list[str]:
        """All invariant violations at once (empty list = valid)."""
        errs = []
        if self.dt <= 0.0:
            errs.append("dt must be positive")
        if self.t_end < 0.0:
            errs.append("t_end must be nonnegative")
        if self.t_end > 0.0:
            if self.dt > self.t_end:
                errs.append("dt must not exceed t_end")
            n = round(self.t_end / self.dt)
            if n < 1 or abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
                errs.append("t_end must be an integer number of dt steps")
        for nm in ("soc_init_anode", "soc_init_cathode"):
            v = getattr(self, nm)
            if not 0.0 < v < 1.0:
                errs.append(f"{nm} = {v:g} must lie in (0, 1)")
        if self.model not in ("full", "electrochemical"):
            errs.append(f"model must be 'full' or 'electrochemical', "
                        f"got {self.model!r}")
        if self.heat_convention not in ("physical", "reversed"):
            errs.append("heat_convention must be 'physical' or 'reversed'")
        if self.kappa_d_factor < 0.0:
            errs.append("kappa_d_factor must be nonnegative")
        if self.extra_fp_iters < 0:
            errs.append("extra_fp_iters must be nonnegative")
        if self.warmup_steps < 0:
            errs.append("warmup_steps must be nonnegative")
        if self.snapshot_every <= 0.0:
            errs.append("snapshot_every must be positive")
        if self.threads < 1:
            errs.append("threads must be >= 1")
        if self.guard_action not in ("clamp", "abort"):
            errs.append("guard_action must be 'clamp' or 'abort'")
        if self.solver not in ("direct", "cg"):
            errs.append("solver must be 'direct' or 'cg'")
        for nm in ("guard_eps_e", "guard_eps_s"):
            v = getattr(self, nm)
            if v is not None and v <= 0.0:
                errs.append(f"{nm} must be positive")
        return errs

    def materials(self) -> MaterialSet:
        return apply_material_overrides(default_materials(),
                                        self.material_overrides)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mesh"] = dataclasses.asdict(self.mesh)
        d["dims"] = dataclasses.asdict(self.dims)
        d["scales"] = dataclasses.asdict(self.scales)
        return d


def preset(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESET_PARAMS:
        raise KeyError(f"unknown preset {name!r}; available: "
                       f"{sorted(PRESET_PARAMS)}")
    cfg = ScenarioConfig(name=name, **PRESET_PARAMS[name])
    return cfg.replace(**overrides) if overrides else cfg


PRESETS = tuple(PRESET_PARAMS)


def apply_material_overrides(mats: MaterialSet, overrides: dict) -> MaterialSet:
    """Apply dotted-path overrides like {'anode.youngs': 2e9, 'k_bv': ...}."""
    if not overrides:
        return mats
    groups: dict[str, dict] = {"anode": {}, "cathode": {}, "electrolyte": {}}
    top: dict[str, float] = {}
    for key, value in overrides.items():
        head, _, tail = key.partition(".")
        if tail and head in groups and hasattr(getattr(mats, head), tail):
            groups[head][tail] = value
        elif not tail and not callable(getattr(mats, head, None)) \
                and hasattr(mats, head):
            top[head] = value
        else:
            raise KeyError(f"unknown material override {key!r}")
    kw = dict(top)
    for gname, sub in groups.items():
        if sub:
            kw[gname] = dataclasses.replace(getattr(mats, gname), **sub)
    return dataclasses.replace(mats, **kw)


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

class ConfigError(ValueError):
    pass


def _float(v):
    return float(v)


def _int(v):
    return int(v)


def _str(v):
    return str(v)


def _int_tuple(v):
    return tuple(int(s) for s in v.replace(",", " ").split())


# key -> (target attribute or handler name, converter)
_KEYS = {
    "name": ("name", _str),
    "i_app": ("i_app", _float),
    "t_end": ("t_end", _float),
    "tend": ("t_end", _float),
    "dt": ("dt", _float),
    "soc_init_anode": ("soc_init_anode", _float),
    "soc_init_cathode": ("soc_init_cathode", _float),
    "model": ("model", _str),
    "heat_convention": ("heat_convention", _str),
    "kappa_d_factor": ("kappa_d_factor", _float),
    "guard_eps_e": ("guard_eps_e", _float),
    "guard_eps_s": ("guard_eps_s", _float),
    "guard_action": ("guard_action", _str),
    "extra_fp_iters": ("extra_fp_iters", _int),
    "fp_tol": ("fp_tol", _float),
    "warmup_steps": ("warmup_steps", _int),
    "snapshot_every": ("snapshot_every", _float),
    "threads": ("threads", _int),
    "solver": ("solver", _str),
    "solver_rtol": ("solver_rtol", _float),
}

_MESH_KEYS = {
    "mesh.nx": ("nx_blocks", _int_tuple),
    "mesh.ny": ("ny_blocks", _int_tuple),
    "mesh.layers": ("n_layers", _int),
    "mesh.grading": ("grading", _float),
    "mesh.degree": ("degree", _int),
    "mesh.normal_degree": ("normal_degree", _int),
    "mesh.max_aspect": ("max_aspect", _float),
}

_DIM_KEYS = {f"dims.{n}": (n, _float)
             for n in ("h_s", "h_e", "length", "gap", "cap")}

_SCALE_KEYS = {f"scale.{n}": (n, _float)
               for n in ("length", "time", "potential", "temperature",
                         "concentration", "stress")}


def parse_scenario(path) -> ScenarioConfig:
    """Parse a scenario file (or return a preset when given a preset name)."""
    if isinstance(path, str) and path in PRESET_PARAMS:
        return preset(path)

    raw: list[tuple[int, str, str]] = []
    errors: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                errors.append(f"line {lineno}: expected 'key = value', "
                              f"got {stripped!r}")
                continue
            key, _, value = stripped.partition("=")
            raw.append((lineno, key.strip(), value.strip()))

    cfg = ScenarioConfig(name="custom")
    for lineno, key, value in raw:
        if key == "preset":
            try:
                cfg = preset(value)
            except KeyError as exc:
                errors.append(f"line {lineno}: {exc.args[0]}")
            break

    mesh_kw: dict = {}
    dim_kw: dict = {}
    scale_kw: dict = {}
    plain_kw: dict = {}
    mesh_preset: str | None = None
    overrides: dict = {}
    all_keys = (set(_KEYS) | set(_MESH_KEYS) | set(_DIM_KEYS)
                | set(_SCALE_KEYS) | {"preset", "soc_init", "mesh.preset"})

    for lineno, key, value in raw:
        try:
            if key == "preset":
                continue
            if key == "soc_init":
                v = _float(value)
                plain_kw["soc_init_anode"] = v
                plain_kw["soc_init_cathode"] = v
            elif key == "mesh.preset":
                mesh_preset = value
            elif key in _KEYS:
                attr, conv = _KEYS[key]
                plain_kw[attr] = conv(value)
            elif key in _MESH_KEYS:
                attr, conv = _MESH_KEYS[key]
                mesh_kw[attr] = conv(value)
            elif key in _DIM_KEYS:
                attr, conv = _DIM_KEYS[key]
                dim_kw[attr] = conv(value)
            elif key in _SCALE_KEYS:
                attr, conv = _SCALE_KEYS[key]
                scale_kw[attr] = conv(value)
            elif key.startswith("mat."):
                overrides[key[4:]] = _float(value)
            else:
                hint = difflib.get_close_matches(key, all_keys, n=1)
                suffix = f" (did you mean {hint[0]!r}?)" if hint else ""
                errors.append(f"line {lineno}: unknown key {key!r}{suffix}")
        except (TypeError, ValueError) as exc:
            errors.append(f"line {lineno}: bad value for {key!r}: {exc}")

    if not errors:
        try:
            if mesh_preset is not None:
                base_mesh = {"coarse": MeshSpec.coarse,
                             "production": MeshSpec.production}.get(mesh_preset)
                if base_mesh is None:
                    errors.append(f"mesh.preset must be 'coarse' or 'production', "
                                  f"got {mesh_preset!r}")
                else:
                    cfg = cfg.replace(mesh=base_mesh())
            if mesh_kw and not errors:
                cfg = cfg.replace(
                    mesh=dataclasses.replace(cfg.mesh, **mesh_kw))
            if dim_kw:
                cfg = cfg.replace(
                    dims=dataclasses.replace(cfg.dims, **dim_kw))
            if scale_kw:
                cfg = cfg.replace(
                    scales=dataclasses.replace(cfg.scales, **scale_kw))
            if overrides:
                merged = dict(cfg.material_overrides)
                merged.update(overrides)
                cfg = cfg.replace(material_overrides=merged)
            if plain_kw:
                cfg = cfg.replace(**plain_kw)
        except ValueError as exc:
            errors.append(str(exc))

    if not errors:
        errors.extend(cfg.validate())
        try:
            cfg.materials()
        except (KeyError, ValueError) as exc:
            errors.append(f"material overrides: {exc}")
    if errors:
        raise ConfigError(f"invalid scenario {path!r}:\n  "
                          + "\n  ".join(errors))
    return cfg


# ---------------------------------------------------------------------------
# Nondimensionalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaledScenario:
    """All run inputs converted to the internal unit system."""

    scales: ScaleSet
    mats: MaterialSet
    dims: CellDimensions
    i_app: float
    dt: float
    t_end: float
    snapshot_every: float
    guard: GuardPolicy


def nondimensionalize(config: ScenarioConfig,
                      mats: MaterialSet | None = None) -> ScaledScenario:
    """Rescale every run input into the internal unit system.

    The rescaling is a pure change of units: re-dimensionalizing any value
    with the same ScaleSet reproduces the SI input exactly (one rounding).
    """
    scales = config.scales
    mats_si = mats if mats is not None else config.materials()
    mats_s = mats_si.scaled(scales)
    conc = scales.factor(units.CONCENTRATION)
    if config.guard_eps_e is not None:
        eps_e = config.guard_eps_e / conc
    else:
        eps_e = 1e-3 * mats_s.c_e_init
    if config.guard_eps_s is not None:
        eps_s = config.guard_eps_s / conc
    else:
        eps_s = 1e-4 * min(mats_s.anode.c_max, mats_s.cathode.c_max)
    return ScaledScenario(
        scales=scales,
        mats=mats_s,
        dims=scaled_dimensions(config.dims, scales.length),
        i_app=scales.to_internal(config.i_app, units.CURRENT_DENSITY),
        dt=scales.to_internal(config.dt, units.TIME),
        t_end=scales.to_internal(config.t_end, units.TIME),
        snapshot_every=scales.to_internal(config.snapshot_every, units.TIME),
        guard=GuardPolicy(eps_e=eps_e, eps_s=eps_s,
                          action=config.guard_action),
    )
