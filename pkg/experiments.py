"""Experiment configs, built-in figure presets and table builders.

A config document is versioned JSON with the sections ``model``, ``solver``,
``experiment`` and ``output``; see ``config_to_dict`` for the full layout.
Tables are pandas frames written as CSV or as one JSON object with metadata
and rows. Nothing here draws random numbers, so a config fully determines its
output bytes.
"""
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import pandas as pd
from loguru import logger

from config import CONFIG_VERSION, EOC_FLOOR, MAX_WORKERS, OUTPUT_DIR, T_END, TAU_REF
from energy import energy_balance_report
from exceptions import ConfigError
from manufactured import (ManufacturedCase, convergence_table, linf_error, nodal_error, records_to_frame,
                          rigid_body_case, sampling_grid, toda_case, wave_case, wrap_manufactured)
from models import (RigidBodyParams, TodaParams, WaveParams, make_damped_wave, make_rigid_body, make_toda,
                    one_minus_sin, sin2t, wave_reference_initial_state, zero_control)
from phsystem import PHSystem, SolverConfig
from solver import TimePartition, integrate

MODES = ("converge", "converge_nodal", "energy", "run")
MODELS = ("toda", "rigid_body", "wave")
FORMATS = ("csv", "json")
NORMS = ("plain", "mass")

_MODEL_DEFAULTS = {
    "toda": {"N": 5, "gamma": 0.1},
    "rigid_body": {"inertias": [1.0, 1.0, 1.0], "axis": [1.0, 1.0, 1.0]},
    "wave": {"N": 10, "ell": 10.0, "gamma": 0.1, "nu": 0.0, "rf_quad_nodes": 10},
}
_CONTROLS = {
    "toda": {"sin2t": sin2t, "zero": zero_control},
    "rigid_body": {"sin2t": sin2t, "zero": zero_control},
    "wave": {"one_minus_sin": one_minus_sin, "zero": zero_control},
}
_DEFAULT_CONTROL = {"toda": "sin2t", "rigid_body": "sin2t", "wave": "one_minus_sin"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    solver: SolverConfig
    mode: str = "converge"
    model_params: dict = field(default_factory=dict)
    taus: tuple = (0.25, 0.125, 0.0625, 0.03125, 0.015625)
    t_end: float = T_END
    tau_ref: float = TAU_REF
    control: Optional[str] = None
    initial: str = "reference"
    norm: Optional[str] = None
    label: str = "experiment"
    output_path: Optional[str] = None
    output_format: str = "csv"
    max_workers: int = MAX_WORKERS
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"must be one of {MODELS}, got {self.model!r}", field="model.name")
        if self.mode not in MODES:
            raise ConfigError(f"must be one of {MODES}, got {self.mode!r}", field="experiment.mode")
        params = dict(_MODEL_DEFAULTS[self.model])
        unknown = set(self.model_params) - set(params)
        if unknown:
            raise ConfigError(f"unknown parameters {sorted(unknown)}", field="model")
        params.update(self.model_params)
        object.__setattr__(self, "model_params", params)
        if self.control is None:
            object.__setattr__(self, "control", _DEFAULT_CONTROL[self.model])
        if self.control not in _CONTROLS[self.model]:
            raise ConfigError(f"must be one of {sorted(_CONTROLS[self.model])} for {self.model}, "
                              f"got {self.control!r}", field="experiment.control")
        if self.norm is None:
            object.__setattr__(self, "norm", "mass" if self.model == "wave" else "plain")
        if self.norm not in NORMS:
            raise ConfigError(f"must be one of {NORMS}, got {self.norm!r}", field="experiment.norm")
        if self.initial not in ("reference", "zero"):
            raise ConfigError(f"must be 'reference' or 'zero', got {self.initial!r}", field="experiment.initial")
        taus = tuple(float(t) for t in self.taus)
        if not taus or any(not (t > 0 and math.isfinite(t)) for t in taus):
            raise ConfigError("needs at least one positive step size", field="experiment.taus")
        if len(set(taus)) != len(taus):
            raise ConfigError("step sizes must be distinct", field="experiment.taus")
        if self.mode in ("converge", "converge_nodal") and len(taus) < 2:
            raise ConfigError("convergence sweeps need at least two step sizes", field="experiment.taus")
        object.__setattr__(self, "taus", taus)
        if not self.t_end > 0:
            raise ConfigError("must be positive", field="experiment.T")
        if not self.tau_ref > 0:
            raise ConfigError("must be positive", field="experiment.tau_ref")
        if self.output_format not in FORMATS:
            raise ConfigError(f"must be one of {FORMATS}, got {self.output_format!r}", field="output.format")
        if self.max_workers < 1:
            raise ConfigError("must be >= 1", field="experiment.max_workers")
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}", field="version")


# ---------------------------------------------------------------------------
# (De)serialization
# ---------------------------------------------------------------------------

def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "version": cfg.version,
        "label": cfg.label,
        "model": {"name": cfg.model, **cfg.model_params},
        "solver": cfg.solver.to_dict(),
        "experiment": {
            "mode": cfg.mode,
            "T": cfg.t_end,
            "taus": list(cfg.taus),
            "tau_ref": cfg.tau_ref,
            "control": cfg.control,
            "initial": cfg.initial,
            "norm": cfg.norm,
            "max_workers": cfg.max_workers,
        },
        "output": {"path": cfg.output_path, "format": cfg.output_format},
    }


def _section(doc: dict, name: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError("must be an object", field=name)
    return value


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build and validate a config from its document form."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    model = dict(_section(doc, "model"))
    if "name" not in model:
        raise ConfigError("missing model name", field="model.name")
    name = model.pop("name")
    solver_doc = dict(_section(doc, "solver"))
    if "k" not in solver_doc:
        raise ConfigError("missing polynomial degree", field="solver.k")
    try:
        solver = SolverConfig(**solver_doc)
    except TypeError as exc:
        raise ConfigError(str(exc), field="solver") from exc
    exp = _section(doc, "experiment")
    known = {"mode", "T", "taus", "tau", "tau_ref", "control", "initial", "norm", "max_workers"}
    unknown = set(exp) - known
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="experiment")
    taus = exp.get("taus", [exp["tau"]] if "tau" in exp else None)
    out = _section(doc, "output")
    kwargs: dict[str, Any] = {
        "model": name,
        "model_params": model,
        "solver": solver,
        "mode": exp.get("mode", "converge"),
        "t_end": exp.get("T", T_END),
        "tau_ref": exp.get("tau_ref", TAU_REF),
        "control": exp.get("control"),
        "initial": exp.get("initial", "reference"),
        "norm": exp.get("norm"),
        "max_workers": exp.get("max_workers", MAX_WORKERS),
        "label": doc.get("label", "experiment"),
        "output_path": out.get("path"),
        "output_format": out.get("format", "csv"),
        "version": doc.get("version", CONFIG_VERSION),
    }
    if taus is not None:
        if not isinstance(taus, (list, tuple)):
            raise ConfigError("must be a list of numbers", field="experiment.taus")
        kwargs["taus"] = tuple(taus)
    return ExperimentConfig(**kwargs)


def load_config(path: str) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno) from exc
    try:
        return config_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg: ExperimentConfig, path: str) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Systems from configs
# ---------------------------------------------------------------------------

def _params(cfg: ExperimentConfig):
    p = cfg.model_params
    try:
        if cfg.model == "toda":
            return TodaParams(n=int(p["N"]), gamma=p["gamma"])
        if cfg.model == "rigid_body":
            return RigidBodyParams(inertias=tuple(p["inertias"]), axis=tuple(p["axis"]))
        return WaveParams(n=int(p["N"]), ell=float(p["ell"]), gamma=float(p["gamma"]), nu=float(p["nu"]),
                          rf_quad_nodes=int(p["rf_quad_nodes"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="model") from exc


def build_system(cfg: ExperimentConfig) -> tuple[PHSystem, np.ndarray]:
    """The controlled model and its initial state (reference data or zero)."""
    params = _params(cfg)
    u = _CONTROLS[cfg.model][cfg.control]
    if cfg.model == "toda":
        system = make_toda(params, u)
        z0 = np.zeros(system.dim)
    elif cfg.model == "rigid_body":
        system = make_rigid_body(params, u)
        z0 = np.array([0.0, 0.5, 1.0])
    else:
        system = make_damped_wave(params, u, u)
        z0 = wave_reference_initial_state(params)
    if cfg.initial == "zero":
        z0 = np.zeros(system.dim)
    return system, z0


def build_case(cfg: ExperimentConfig) -> ManufacturedCase:
    params = _params(cfg)
    if cfg.model == "toda":
        return toda_case(params)
    if cfg.model == "rigid_body":
        return rigid_body_case(params)
    return wave_case(params)


# ---------------------------------------------------------------------------
# Work units and tables
# ---------------------------------------------------------------------------

def solve_manufactured(cfg: ExperimentConfig, tau: float) -> dict:
    """One point of a convergence sweep: errors of the manufactured run with step tau."""
    case = build_case(cfg)
    system = wrap_manufactured(case)
    partition = TimePartition.from_step(cfg.t_end, tau)
    sol = integrate(system, system.initial_state, partition, cfg.solver)
    mass = system.mass_matrix() if cfg.norm == "mass" else None
    err_nodal = nodal_error(sol, case.z_exact, cfg.norm, mass)
    err_inf = None
    if cfg.mode == "converge":
        err_inf = linf_error(sol, case.z_exact, cfg.tau_ref, cfg.norm, mass)
    logger.info(f"[{cfg.label}] tau={tau:.6g}: err_inf={err_inf}, err_nodal={err_nodal:.3e}")
    return {"tau": float(tau), "err_inf": err_inf, "err_nodal": err_nodal}


def convergence_frame(results: list[dict], floor: float = EOC_FLOOR) -> pd.DataFrame:
    records = convergence_table([r["tau"] for r in results], [r["err_inf"] for r in results],
                                [r["err_nodal"] for r in results], floor=floor)
    return records_to_frame(records)


def run_convergence(cfg: ExperimentConfig, map_fn: Callable = map) -> pd.DataFrame:
    """Serial (or caller-mapped) convergence sweep over cfg.taus."""
    results = list(map_fn(lambda tau: solve_manufactured(cfg, tau), cfg.taus))
    return convergence_frame(results)


def _single_partition(cfg: ExperimentConfig) -> TimePartition:
    if len(cfg.taus) != 1:
        logger.warning(f"[{cfg.label}] several step sizes given, using the first one ({cfg.taus[0]})")
    return TimePartition.from_step(cfg.t_end, cfg.taus[0])


def run_energy(cfg: ExperimentConfig) -> pd.DataFrame:
    """Energy audit table (i, t_i, H, dissipation, supply, E)."""
    system, z0 = build_system(cfg)
    sol = integrate(system, z0, _single_partition(cfg), cfg.solver)
    return energy_balance_report(system, sol, cfg.solver).to_frame()


def run_trajectory(cfg: ExperimentConfig) -> pd.DataFrame:
    """Trajectory sampled every tau_ref: t, z_1..z_dim, H."""
    system, z0 = build_system(cfg)
    sol = integrate(system, z0, _single_partition(cfg), cfg.solver)
    times = sampling_grid(0.0, cfg.t_end, cfg.tau_ref)
    states = sol(times)
    frame = pd.DataFrame({"t": times})
    for i in range(system.dim):
        frame[f"z_{i + 1}"] = states[i]
    frame["H"] = np.asarray(system.hamiltonian(states), dtype=float)
    return frame


def run_mode(cfg: ExperimentConfig, map_fn: Callable = map) -> pd.DataFrame:
    if cfg.mode in ("converge", "converge_nodal"):
        return run_convergence(cfg, map_fn)
    if cfg.mode == "energy":
        return run_energy(cfg)
    return run_trajectory(cfg)


def _jsonable(value):
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, (np.integer,)):
        return int(value)
    value = float(value)
    return value if math.isfinite(value) else None


def output_path(cfg: ExperimentConfig) -> Path:
    if cfg.output_path:
        return Path(cfg.output_path)
    return Path(OUTPUT_DIR) / f"{cfg.label}.{cfg.output_format}"


def write_table(frame: pd.DataFrame, cfg: ExperimentConfig, path: Optional[Path] = None) -> Path:
    """Write the table as CSV or as {"metadata": ..., "rows": [...]} JSON."""
    path = Path(path) if path is not None else output_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    if cfg.output_format == "csv":
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    else:
        rows = [{key: _jsonable(val) for key, val in row.items()} for row in frame.to_dict(orient="records")]
        doc = {"metadata": {"label": cfg.label, "mode": cfg.mode, "columns": list(frame.columns),
                            "config": config_to_dict(cfg)},
               "rows": rows}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.success(f"Wrote {len(frame)} rows to {path}")
    return path


# ---------------------------------------------------------------------------
# Built-in presets, one per figure of the study
# ---------------------------------------------------------------------------

def _halvings(start: float = 0.25, count: int = 5) -> tuple:
    return tuple(start / 2 ** i for i in range(count))


def _make(preset: str, model: str, mode: str, k: int, s_q: int, s_pi: int, taus=None,
          suffix: str = "", **model_params) -> ExperimentConfig:
    label = f"{preset}_k{k}_sq{s_q}_spi{s_pi}{suffix}"
    return ExperimentConfig(
        model=model, mode=mode, model_params=model_params,
        solver=SolverConfig(k=k, s_q=s_q, s_pi=s_pi),
        taus=taus or (_halvings() if mode.startswith("converge") else (1e-2,)),
        label=label,
    )


def _toda_presets() -> dict:
    return {
        "toda_varying_degree": lambda: [
            _make("toda_varying_degree", "toda", "converge", k, k, k) for k in (1, 2, 3, 4)],
        "toda_varying_degree_different_sampling": lambda: [
            _make("toda_varying_degree_different_sampling", "toda", "converge_nodal", k, k, k) for k in (1, 2, 3, 4)],
        "toda_varying_quadrature": lambda: [
            _make("toda_varying_quadrature", "toda", "converge", 3, s_q, 3) for s_q in (1, 2, 3, 4, 5)],
        "toda_varying_projection": lambda: [
            _make("toda_varying_projection", "toda", "converge", 3, 3, s_pi) for s_pi in (1, 2, 3, 4, 5)],
        "toda_energybalance": lambda: [
            _make("toda_energybalance", "toda", "energy", k, k, s_pi)
            for k in (1, 2, 3, 4) for s_pi in sorted({k, max(k, 3)})],
    }


def _rigid_body_presets() -> dict:
    return {
        "rigid_body_varying_degree": lambda: [
            _make("rigid_body_varying_degree", "rigid_body", "converge", k, k, k) for k in (1, 2, 3, 4)],
        "rigid_body_varying_degree_different_sampling": lambda: [
            _make("rigid_body_varying_degree_different_sampling", "rigid_body", "converge_nodal", k, k, k)
            for k in (1, 2, 3, 4)],
        "rigid_body_energybalance": lambda: [
            _make("rigid_body_energybalance", "rigid_body", "energy", k, k, k) for k in (1, 2, 3, 4)],
    }


def _wave_presets() -> dict:
    presets = {}
    for nu in (0, 1):
        tag = f"damped_wave_nu{nu}"
        presets[f"{tag}_varying_degree"] = (lambda tag=tag, nu=nu: [
            _make(f"{tag}_varying_degree", "wave", "converge", k, k, 2 * k, nu=float(nu)) for k in (2, 4, 6)])
        presets[f"{tag}_varying_degree_different_sampling"] = (lambda tag=tag, nu=nu: [
            _make(f"{tag}_varying_degree_different_sampling", "wave", "converge_nodal", k, k, 2 * k, nu=float(nu))
            for k in (2, 4, 6)])
        presets[f"{tag}_varying_discretization"] = (lambda tag=tag, nu=nu: [
            _make(f"{tag}_varying_discretization", "wave", "converge", 4, 4, 8, suffix=f"_N{n}", N=n, nu=float(nu))
            for n in (8, 16, 32, 64)])
        presets[f"{tag}_energybalance"] = (lambda tag=tag, nu=nu: [
            _make(f"{tag}_energybalance", "wave", "energy", k, k, 2 * k, nu=float(nu)) for k in (1, 2, 3, 4)])
    return presets


PRESETS: dict[str, Callable[[], list[ExperimentConfig]]] = {
    **_toda_presets(), **_rigid_body_presets(), **_wave_presets()}


def preset_configs(name: str) -> list[ExperimentConfig]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}", field="preset")
    return PRESETS[name]()


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Apply non-None overrides; solver keys go to the SolverConfig, model keys to model_params."""
    solver_keys = {"k", "s_q", "s_pi", "newton_tol", "newton_max_iter", "use_projection",
                   "newton_start"}
    model_keys = {"N", "gamma", "nu", "ell", "inertias", "axis", "rf_quad_nodes"}
    solver_updates = {k: v for k, v in overrides.items() if k in solver_keys and v is not None}
    model_updates = {k: v for k, v in overrides.items() if k in model_keys and v is not None}
    rest = {k: v for k, v in overrides.items()
            if k not in solver_keys | model_keys and v is not None}
    solver = cfg.solver
    if solver_updates:
        doc = solver.to_dict()
        if "k" in solver_updates:
            # derived quadrature sizes follow a new degree unless given explicitly
            doc.pop("s_q")
            doc.pop("s_pi")
        doc.update(solver_updates)
        solver = SolverConfig(**doc)
    params = dict(cfg.model_params)
    if "model" in rest and rest["model"] != cfg.model:
        params = {}
        rest.setdefault("control", None)
        rest.setdefault("norm", None)
    params.update(model_updates)
    return replace(cfg, solver=solver, model_params=params, **rest)
