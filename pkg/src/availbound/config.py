"""Flat ``section.key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Unknown keys are rejected so
typos cannot silently fall back to defaults.  Relative CSV paths resolve
against the config file's directory.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import THETA0_MODES, SearchSpec
from .errors import ConfigError
from .model import ModelParams, SystemState, validate

DEFAULTS = {
    "model.K1": "4",
    "model.K2": "4",
    "model.Lambda": "5",
    "model.work_family": "pareto_hazard",
    "model.repair_family": "pareto",
    "model.work_csv": "",
    "model.repair_csv": "",
    "bound.alpha": "2",
    "bound.R": "search",
    "bound.N": "search",
    "bound.theta0": "exact",
    "bound.search.r_max": "3",
    "bound.search.n_r": "48",
    "bound.search.n_min": "1",
    "bound.search.n_max": "20",
    "bound.search.refine_passes": "2",
    "sim.n_traj": "100000",
    "sim.grid": "0, 0.5, 1, 2, 5, 10, 20, 50, 100",
    "sim.level": "0.99",
    "sim.starts": "1:0, 2:0, 1:5",
    "stationary.n_traj": "100000",
    "stationary.grid": "linspace(0, 100, 50)",
    "couple.n_runs": "10000",
    "couple.start1": "1:0",
    "couple.start2": "2:0",
    "couple.cap": "10000000",
    "verify.psi_scale": "1",
    "verify.ks_draws": "100000",
    "verify.ks_level": "0.01",
    "verify.ks_pairs": "0:1, 2:5",
    "output.dir": "out",
    "output.formats": "json, csv",
}
REQUIRED = ("sim.seed",)


def parse_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_grid(text: str) -> np.ndarray:
    """``a, b, c`` or ``linspace(start, stop, count)``; must be strictly increasing."""
    t = text.strip()
    try:
        if t.startswith("linspace(") and t.endswith(")"):
            a, b, n = (v.strip() for v in t[9:-1].split(","))
            grid = np.linspace(float(a), float(b), int(n))
        else:
            grid = np.array([float(v) for v in t.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None
    if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ConfigError(f"grid {text!r} must be nonnegative and strictly increasing")
    return grid


def _states(text: str) -> list[SystemState]:
    try:
        return [SystemState.parse(v) for v in text.split(",") if v.strip()]
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad state list {text!r}: {exc}") from None


@dataclass
class RunConfig:
    values: dict[str, str]
    base_dir: Path
    text: str

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, path.parent)

    @classmethod
    def from_text(cls, text: str, base_dir: str | Path = ".") -> "RunConfig":
        raw = parse_text(text)
        unknown = sorted(set(raw) - set(DEFAULTS) - set(REQUIRED))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = [k for k in REQUIRED if k not in raw]
        if missing:
            raise ConfigError(f"missing required keys: {', '.join(missing)}")
        cfg = cls({**DEFAULTS, **raw}, Path(base_dir), text)
        cfg.check()
        return cfg

    def check(self) -> None:
        """Parse every field once so errors surface before any work starts."""
        for key in ("model.work_csv", "model.repair_csv"):
            if self.values[key] and not self._path(self.values[key]).is_file():
                raise ConfigError(f"{key}: file {self.values[key]!r} does not exist")
        self.model()
        self.alpha, self.theta0_mode, self.grid, self.stationary_grid
        self.starts, self.couple_starts, self.ks_pairs
        self.seed, self.n_traj, self.level, self.psi_scale
        if self.theta0_mode not in THETA0_MODES:
            raise ConfigError(f"bound.theta0 must be one of {THETA0_MODES}")

    def _path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def _num(self, key: str, kind=float):
        try:
            return kind(self.values[key])
        except ValueError:
            raise ConfigError(f"{key}={self.values[key]!r} is not a valid {kind.__name__}") from None

    @property
    def digest(self) -> str:
        canon = json.dumps(self.values, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()

    def model(self) -> ModelParams:
        v = self.values
        raw = {"K1": v["model.K1"], "K2": v["model.K2"], "Lambda": v["model.Lambda"],
               "work_family": v["model.work_family"], "repair_family": v["model.repair_family"]}
        for which in ("work", "repair"):
            if v[f"model.{which}_csv"]:
                raw[f"{which}_csv"] = str(self._path(v[f"model.{which}_csv"]))
        return validate(raw)

    @property
    def seed(self) -> int:
        return self._num("sim.seed", int)

    @property
    def alpha(self) -> float:
        return self._num("bound.alpha")

    @property
    def theta0_mode(self) -> str:
        return self.values["bound.theta0"]

    def fixed_window(self) -> tuple[float, float] | None:
        """``(R, N)`` if both are given, ``None`` for a search."""
        R, N = self.values["bound.R"], self.values["bound.N"]
        if R == "search" or N == "search":
            return None
        return self._num("bound.R"), self._num("bound.N")

    def search_spec(self) -> SearchSpec:
        R, N = self.values["bound.R"], self.values["bound.N"]
        return SearchSpec(
            r_max=self._num("bound.search.r_max"),
            n_r=self._num("bound.search.n_r", int),
            n_min=self._num("bound.search.n_min"),
            n_max=self._num("bound.search.n_max"),
            refine_passes=self._num("bound.search.refine_passes", int),
            r_values=None if R == "search" else [self._num("bound.R")],
            n_values=None if N == "search" else [self._num("bound.N")],
        )

    @property
    def n_traj(self) -> int:
        return self._num("sim.n_traj", int)

    @property
    def level(self) -> float:
        lv = self._num("sim.level")
        if not 0.0 < lv < 1.0:
            raise ConfigError("sim.level must lie in (0, 1)")
        return lv

    @property
    def grid(self) -> np.ndarray:
        return parse_grid(self.values["sim.grid"])

    @property
    def stationary_grid(self) -> np.ndarray:
        return parse_grid(self.values["stationary.grid"])

    @property
    def stationary_n_traj(self) -> int:
        return self._num("stationary.n_traj", int)

    @property
    def starts(self) -> list[SystemState]:
        return _states(self.values["sim.starts"])

    @property
    def couple_starts(self) -> tuple[SystemState, SystemState]:
        return (_states(self.values["couple.start1"])[0], _states(self.values["couple.start2"])[0])

    @property
    def couple_runs(self) -> int:
        return self._num("couple.n_runs", int)

    @property
    def cap(self) -> int:
        return self._num("couple.cap", int)

    @property
    def psi_scale(self) -> float:
        return self._num("verify.psi_scale")

    @property
    def ks_draws(self) -> int:
        return self._num("verify.ks_draws", int)

    @property
    def ks_level(self) -> float:
        return self._num("verify.ks_level")

    @property
    def ks_pairs(self) -> list[tuple[float, float]]:
        pairs = []
        for item in self.values["verify.ks_pairs"].split(","):
            try:
                x, y = item.split(":")
                pairs.append((float(x), float(y)))
            except ValueError:
                raise ConfigError(f"bad verify.ks_pairs entry {item!r}") from None
        return pairs

    @property
    def out_dir(self) -> Path:
        return Path(self.values["output.dir"])

    @property
    def formats(self) -> set[str]:
        return {f.strip() for f in self.values["output.formats"].split(",") if f.strip()}
