"""Experiment configuration: INI files with one section per module.

A config file is flat, human-editable text.  Every key is optional and
falls back to the module defaults, unknown sections or keys are
rejected, and values are range-checked by the dataclasses they feed.
Angles may be given in radians (canonical, written to snapshots) or
degrees (convenience key with a ``_deg`` suffix).
"""

import configparser
import io
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

from .arena import Arena
from .curriculum import CurriculumConfig, DEFAULT_CURRICULUM
from .dynamics import ModelParams
from .errors import ConfigError
from .landing_env import InclinedLandingEnv, LandingConfig
from .ppo import PpoConfig
from .setpoint_env import SetpointConfig, SetpointEnv

TASKS = ("landing2d", "setpoint3d")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text: str) -> Optional[float]:
    if text.strip().lower() in ("none", ""):
        return None
    return float(text)


# section -> key -> parser; the sole source of truth for accepted keys
_SCHEMA: Dict[str, Dict[str, Callable[[str], object]]] = {
    "experiment": {
        "task": str,
        "seed": int,
        "output_dir": str,
    },
    "model": {
        "mass": float,
        "gravity": float,
        "attitude_gain": float,
        "attitude_tau": float,
        "thrust_pole": float,
        "thrust_gain_filter": float,
        "thrust_gain_direct": float,
        "drag_enabled": _parse_bool,
        "drag_cx": float,
        "drag_cy": float,
        "drag_cz": float,
    },
    "arena": {
        "x_min": float, "x_max": float,
        "y_min": float, "y_max": float,
        "z_min": float, "z_max": float,
    },
    "curriculum": {
        "d_start": float,
        "d_final": float,
        "d_episodes": int,
        "tilt_final": float,
        "tilt_final_deg": float,
        "tilt_episodes": int,
        "tilt_start_timesteps": int,
        "platform_timesteps": int,
        "init_halfwidth_x": float,
        "init_halfwidth_z": float,
        "init_growth_x": float,
        "init_growth_z": float,
        "init_max_x": float,
        "init_max_z": float,
        "gamma_start": float,
        "gamma_final": float,
        "gamma_ramp_start": int,
        "gamma_ramp_length": int,
    },
    "ppo": {
        "n_steps": int,
        "n_envs": int,
        "minibatch_size": int,
        "epochs": int,
        "clip_range": float,
        "learning_rate": float,
        "gamma": float,
        "gae_lambda": float,
        "value_coef": float,
        "entropy_coef": float,
        "max_grad_norm": float,
        "total_timesteps": int,
        "stop_success_rate": _parse_optional_float,
    },
    "landing": {
        "goal_x": float,
        "goal_z": float,
        "episode_steps": int,
        "boundary_margin": float,
        "platform_top_length": float,
        "platform_base_depth": float,
    },
    "setpoint": {
        "goal_x": float,
        "goal_y": float,
        "goal_z": float,
        "episode_steps": int,
        "reset_margin": float,
        "hold_radius": float,
        "hold_steps": int,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "landing2d"
    seed: int = 0
    output_dir: str = "runs"
    model: ModelParams = ModelParams()
    arena: Arena = Arena()
    curriculum: CurriculumConfig = DEFAULT_CURRICULUM
    ppo: PpoConfig = PpoConfig()
    landing: LandingConfig = LandingConfig()
    setpoint: SetpointConfig = SetpointConfig()

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(
                f"experiment.task must be one of {TASKS}, got {self.task!r}")

    def make_env(self, seed: int):
        """Environment factory for the configured task."""
        if self.task == "landing2d":
            return InclinedLandingEnv(config=self.landing, params=self.model,
                                      arena=self.arena, seed=seed)
        return SetpointEnv(config=self.setpoint, params=self.model,
                           arena=self.arena, seed=seed)

    @property
    def uses_curriculum(self) -> bool:
        return self.task == "landing2d"


def _read_sections(text: str, source: str) -> Dict[str, Dict[str, object]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc
    values: Dict[str, Dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {source}")
        values[section] = {}
        for key, raw in parser[section].items():
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key {key!r} in section [{section}] of {source}")
            try:
                values[section][key] = _SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for [{section}] {key} in {source}: {exc}") \
                    from exc
    return values


def _build(section: str, cls, kwargs: dict, source: str):
    try:
        return cls(**kwargs)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"invalid [{section}] settings in {source}: {exc}") \
            from exc


def _curriculum_kwargs(raw: Dict[str, object], source: str) -> dict:
    if "tilt_final" in raw and "tilt_final_deg" in raw:
        raise ConfigError(
            f"[curriculum] tilt_final and tilt_final_deg both set in {source}")
    out = dict(raw)
    if "tilt_final_deg" in out:
        out["tilt_final"] = math.radians(out.pop("tilt_final_deg"))
    pair_keys = (("init_halfwidth_x", "init_halfwidth_z", "init_halfwidths"),
                 ("init_growth_x", "init_growth_z", "init_growth"),
                 ("init_max_x", "init_max_z", "init_max"))
    for x_key, z_key, field in pair_keys:
        if x_key in out or z_key in out:
            default = getattr(DEFAULT_CURRICULUM, field)
            out[field] = (out.pop(x_key, default[0]), out.pop(z_key, default[1]))
    return out


def _model_kwargs(raw: Dict[str, object]) -> dict:
    out = dict(raw)
    coeffs = list(ModelParams().drag_coeffs)
    named = (("drag_cx", 0), ("drag_cy", 1), ("drag_cz", 2))
    touched = False
    for key, axis in named:
        if key in out:
            coeffs[axis] = out.pop(key)
            touched = True
    if touched:
        out["drag_coeffs"] = tuple(coeffs)
    return out


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values = _read_sections(text, source)
    experiment = values.get("experiment", {})
    seed = experiment.get("seed", 0)

    arena_kwargs = values.get("arena", {})
    arena = _build("arena", Arena, arena_kwargs, source)
    if not (arena.x_min < arena.x_max and arena.y_min < arena.y_max
            and arena.z_min < arena.z_max):
        raise ConfigError(f"invalid [arena] settings in {source}: "
                          "each minimum must be below its maximum")

    ppo_kwargs = dict(values.get("ppo", {}))
    ppo_kwargs["seed"] = seed
    return ExperimentConfig(
        task=experiment.get("task", "landing2d"),
        seed=seed,
        output_dir=experiment.get("output_dir", "runs"),
        model=_build("model", ModelParams,
                     _model_kwargs(values.get("model", {})), source),
        arena=arena,
        curriculum=_build("curriculum", CurriculumConfig,
                          _curriculum_kwargs(values.get("curriculum", {}),
                                             source), source),
        ppo=_build("ppo", PpoConfig, ppo_kwargs, source),
        landing=_build("landing", LandingConfig, values.get("landing", {}),
                       source),
        setpoint=_build("setpoint", SetpointConfig, values.get("setpoint", {}),
                        source),
    )


def load_config(path: Optional[str]) -> ExperimentConfig:
    """Read a config file, or return the defaults when no path is given."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, source=path)


def apply_overrides(config: ExperimentConfig, *, task: Optional[str] = None,
                    seed: Optional[int] = None,
                    output_dir: Optional[str] = None,
                    total_timesteps: Optional[int] = None,
                    ) -> Tuple[ExperimentConfig, List[str]]:
    """Apply command-line overrides; they beat the file and are logged."""
    notes = []
    if task is not None and task != config.task:
        notes.append(f"override: experiment.task = {task} "
                     f"(was {config.task})")
        config = replace(config, task=task)
    if seed is not None and seed != config.seed:
        notes.append(f"override: experiment.seed = {seed} (was {config.seed})")
        config = replace(config, seed=seed,
                         ppo=replace(config.ppo, seed=seed))
    if output_dir is not None and output_dir != config.output_dir:
        notes.append(f"override: experiment.output_dir = {output_dir} "
                     f"(was {config.output_dir})")
        config = replace(config, output_dir=output_dir)
    if (total_timesteps is not None
            and total_timesteps != config.ppo.total_timesteps):
        notes.append(f"override: ppo.total_timesteps = {total_timesteps} "
                     f"(was {config.ppo.total_timesteps})")
        config = replace(config,
                         ppo=replace(config.ppo,
                                     total_timesteps=total_timesteps))
    return config, notes


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    return str(value)


def effective_text(config: ExperimentConfig) -> str:
    """Render the full effective configuration as reloadable INI text.

    Floats are written with ``repr`` so a reloaded snapshot reproduces
    the run bit for bit.
    """
    c = config.curriculum
    m = config.model
    sections = {
        "experiment": {
            "task": config.task,
            "seed": config.seed,
            "output_dir": config.output_dir,
        },
        "model": {
            "mass": m.mass,
            "gravity": m.gravity,
            "attitude_gain": m.attitude_gain,
            "attitude_tau": m.attitude_tau,
            "thrust_pole": m.thrust_pole,
            "thrust_gain_filter": m.thrust_gain_filter,
            "thrust_gain_direct": m.thrust_gain_direct,
            "drag_enabled": m.drag_enabled,
            "drag_cx": m.drag_coeffs[0],
            "drag_cy": m.drag_coeffs[1],
            "drag_cz": m.drag_coeffs[2],
        },
        "arena": {
            "x_min": config.arena.x_min, "x_max": config.arena.x_max,
            "y_min": config.arena.y_min, "y_max": config.arena.y_max,
            "z_min": config.arena.z_min, "z_max": config.arena.z_max,
        },
        "curriculum": {
            "d_start": c.d_start,
            "d_final": c.d_final,
            "d_episodes": c.d_episodes,
            "tilt_final": c.tilt_final,
            "tilt_episodes": c.tilt_episodes,
            "tilt_start_timesteps": c.tilt_start_timesteps,
            "platform_timesteps": c.platform_timesteps,
            "init_halfwidth_x": c.init_halfwidths[0],
            "init_halfwidth_z": c.init_halfwidths[1],
            "init_growth_x": c.init_growth[0],
            "init_growth_z": c.init_growth[1],
            "init_max_x": c.init_max[0],
            "init_max_z": c.init_max[1],
            "gamma_start": c.gamma_start,
            "gamma_final": c.gamma_final,
            "gamma_ramp_start": c.gamma_ramp_start,
            "gamma_ramp_length": c.gamma_ramp_length,
        },
        "ppo": {
            "n_steps": config.ppo.n_steps,
            "n_envs": config.ppo.n_envs,
            "minibatch_size": config.ppo.minibatch_size,
            "epochs": config.ppo.epochs,
            "clip_range": config.ppo.clip_range,
            "learning_rate": config.ppo.learning_rate,
            "gamma": config.ppo.gamma,
            "gae_lambda": config.ppo.gae_lambda,
            "value_coef": config.ppo.value_coef,
            "entropy_coef": config.ppo.entropy_coef,
            "max_grad_norm": config.ppo.max_grad_norm,
            "total_timesteps": config.ppo.total_timesteps,
            "stop_success_rate": config.ppo.stop_success_rate,
        },
        "landing": {
            "goal_x": config.landing.goal_x,
            "goal_z": config.landing.goal_z,
            "episode_steps": config.landing.episode_steps,
            "boundary_margin": config.landing.boundary_margin,
            "platform_top_length": config.landing.platform_top_length,
            "platform_base_depth": config.landing.platform_base_depth,
        },
        "setpoint": {
            "goal_x": config.setpoint.goal_x,
            "goal_y": config.setpoint.goal_y,
            "goal_z": config.setpoint.goal_z,
            "episode_steps": config.setpoint.episode_steps,
            "reset_margin": config.setpoint.reset_margin,
            "hold_radius": config.setpoint.hold_radius,
            "hold_steps": config.setpoint.hold_steps,
        },
    }
    out = io.StringIO()
    for name, keys in sections.items():
        out.write(f"[{name}]\n")
        for key, value in keys.items():
            out.write(f"{key} = {_fmt(value)}\n")
        out.write("\n")
    return out.getvalue()
