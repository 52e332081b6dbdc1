"""Per-step episode export to CSV and back.

One row per control step, starting with a row for the initial
conditions (commands and reward zero).  Floats are written with
``repr`` so identical episodes produce byte-identical files.
"""

import csv
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import CONTROL_DT, PITCH, PX, PY, PZ, ROLL, VX, VY, VZ, YAW
from .errors import ConfigError
from .policy import MlpParams, deterministic_action

LANDING_COLUMNS = ("step", "t", "x", "z", "vx", "vz", "pitch",
                   "pwm_cmd", "pitch_cmd", "reward", "done")
SETPOINT_COLUMNS = ("step", "t", "x", "y", "z", "vx", "vy", "vz",
                    "roll", "pitch", "yaw",
                    "pwm_cmd", "roll_cmd", "pitch_cmd", "reward", "done")


def _landing_row(step: int, state, pwm_cmd, pitch_cmd, reward, done):
    return (step, step * CONTROL_DT, state[PX], state[PZ], state[VX],
            state[VZ], state[PITCH], pwm_cmd, pitch_cmd, reward,
            int(done))

def _setpoint_row(step: int, state, pwm_cmd, roll_cmd, pitch_cmd, reward,
                  done):
    return (step, step * CONTROL_DT, state[PX], state[PY], state[PZ],
            state[VX], state[VY], state[VZ], state[ROLL], state[PITCH],
            state[YAW], pwm_cmd, roll_cmd, pitch_cmd, reward, int(done))


def record_episode(params: MlpParams, env,
                   position: Optional[Sequence[float]] = None,
                   ) -> Tuple[bool, float, List[tuple]]:
    """One deterministic episode with full per-step capture.

    Returns (success, total reward, rows) where the rows match
    ``LANDING_COLUMNS`` or ``SETPOINT_COLUMNS`` depending on the
    environment's task.
    """
    landing = env.task_name == "landing2d"
    obs = env.reset(position=position)
    rows = []
    if landing:
        rows.append(_landing_row(0, env.state, 0.0, 0.0, 0.0, False))
    else:
        rows.append(_setpoint_row(0, env.state, 0.0, 0.0, 0.0, 0.0, False))
    total = 0.0
    step = 0
    while True:
        obs, reward, done, info = env.step(deterministic_action(params, obs))
        total += reward
        step += 1
        if landing:
            rows.append(_landing_row(step, env.state, info["pwm_cmd"],
                                     info["pitch_cmd"], reward, done))
        else:
            rows.append(_setpoint_row(step, env.state, info["pwm_cmd"],
                                      info["roll_cmd"], info["pitch_cmd"],
                                      reward, done))
        if done:
            return bool(info["success"]), total, rows


def write_trajectory(path: str, columns: Sequence[str], rows: List[tuple]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])


def read_trajectory(path: str) -> Tuple[Tuple[str, ...], np.ndarray]:
    """Load a trajectory CSV as (columns, float matrix).

    A malformed row raises with its line number so the bad data can be
    found in the file.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ConfigError(f"{path}: empty trajectory file") from None
            if header not in (list(LANDING_COLUMNS), list(SETPOINT_COLUMNS)):
                raise ConfigError(f"{path}: unrecognized trajectory header")
            rows = []
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ConfigError(
                        f"{path}: row {line_no} has {len(row)} fields, "
                        f"expected {len(header)}")
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ConfigError(
                        f"{path}: row {line_no}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read trajectory {path}: {exc}") from exc
    matrix = np.array(rows, dtype=np.float64) if rows else \
        np.zeros((0, len(header)))
    return tuple(header), matrix
