"""Pipeline configuration: one JSON file, every field overridable by a flag."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .pose import CameraIntrinsics


class ConfigError(ValueError):
    pass


def packaged_data(name: str) -> Path:
    return Path(str(resources.files("ergowatch").joinpath("data", name)))


@dataclass
class PipelineConfig:
    # camera intrinsics (fixed, never calibrated)
    fx: float = 640.0
    fy: float = 640.0
    cx: float = 320.0
    cy: float = 240.0
    # resources
    template: str = ""  # empty -> packaged canonical template
    rules: str = ""  # empty -> built-in default rule set
    gate_model: str = ""
    pose_model: str = ""
    mouth_model: str = ""
    # tracking layer
    jitter_alpha: float = 0.05
    jitter_learn_seconds: float = 0.5
    # blink detector
    blink_ct: float = 2.5
    blink_rf: float = 0.0  # running-update weight / warm-up; 0 -> stream fps
    patch_wi: float = 4800.0
    patch_hi: float = 4800.0
    # yawn detector
    yawn_tt: float = 1.5
    mouth_raw: bool = False  # raw pixel-coordinate mouth features
    # recommendation
    adapt_alpha: float = 0.2
    feedback_batch: int = 0  # 0 -> one batch per rule count
    feedback_window: int = 50
    # session
    period_seconds: float = 600.0
    work_alarm_minutes: float = 30.0
    bad_pose_alarm_minutes: float = 10.0
    absence_reset_seconds: float = 60.0
    # service
    port: int = 8787
    replay_speed: float = 0.0  # 0 = as fast as possible
    feedback_log: str = ""  # JSONL of accepted feedback samples; empty = off
    seed: int = 0

    def __post_init__(self):
        for name in (
            "jitter_alpha",
            "jitter_learn_seconds",
            "blink_ct",
            "patch_wi",
            "patch_hi",
            "yawn_tt",
            "period_seconds",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, self.cx, self.cy)

    def template_path(self) -> Path:
        return Path(self.template) if self.template else packaged_data("rigid_template.json")

    def resolve_paths(self, need_models: bool = True) -> None:
        """Fail fast on unresolvable files; called by commands at startup."""
        tp = self.template_path()
        if not tp.exists():
            raise ConfigError(f"template file not found: {tp}")
        if self.rules and not Path(self.rules).exists():
            raise ConfigError(f"rule-set file not found: {self.rules}")
        if need_models:
            for name in ("gate_model", "pose_model", "mouth_model"):
                p = getattr(self, name)
                if not p:
                    raise ConfigError(f"{name} path not configured (run the train command first)")
                if not Path(p).exists():
                    raise ConfigError(f"{name} file not found: {p}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path) as f:
                return cls.from_dict(json.load(f))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from None

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
