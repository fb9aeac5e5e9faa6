"""Run configuration: JSON schema, defaults and validation.

Every default is written into the effective configuration so the echo in each
artifact is complete.
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .spectral import RegularityParams

COMMANDS = ("simulate", "decompose", "smoothing-scan", "multiplier-scan",
            "identity-check", "demo-nonuniform", "xsb-diagnostic")
FORMATS = ("csv", "json", "svg")

DEFAULTS = {
    "seed": 0,
    "params": {"s": 0.25, "delta": 0.02, "gamma": None, "eps_tail": 0.05},
    "solver": {"n": 64, "dt": None, "t_end": 1.0, "sample_stride": None,
               "samples": 20, "integrator": "if_rk4", "c_cfl": 0.5, "cfl_fraction": 1.0},
    "data": {"kind": "rough", "amplitude": 1.0, "l2": None, "modes": {}},
    "output": {"dir": "kdvlab_out", "formats": ["csv", "json"]},
    "threads": None,
    "multiplier": {"kinds": None, "ns": [16, 32, 64], "eps": 0.1},
    "smoothing": {"ns": [32, 64, 128], "sigma": None, "sigma_grid": [0.0, 0.5],
                  "coupling": None, "integrator": "lowreg"},
    "decompose": {"coupling": None, "method": "auto"},
    "identity": {"count": 10000, "bound": 1000, "symbol_box": 32},
    "nonuniform": {"xi": 1, "delta": 0.1, "t_max": 2.0, "points": 100, "coupling": 2.0},
    "xsb": {"b": 0.5, "window_width": 0.5, "time_samples": 256, "window_span": None,
            "t_end": 1.0, "sigma": 0.0, "ns": [64, 128]},
}


@dataclass
class RunConfig:
    command: str
    params: RegularityParams
    seed: int
    out_dir: str
    formats: list
    threads: int | None
    sections: dict = field(default_factory=dict)

    def effective(self):
        """Fully resolved configuration as plain JSON data."""
        eff = copy.deepcopy(self.sections)
        eff["command"] = self.command
        eff["params"] = self.params.to_dict()
        eff["seed"] = self.seed
        eff["output"] = {"dir": self.out_dir, "formats": list(self.formats)}
        eff["threads"] = self.threads
        return eff


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise ConfigError(f"unknown configuration key {path + k!r}")
        if isinstance(out[k], dict) and k != "modes" and isinstance(v, dict):
            out[k] = _merge(out[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def build_config(raw, command=None, seed=None, out=None, threads=None, formats=None):
    """Validate a raw mapping (plus CLI overrides) into a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    raw = dict(raw)
    cmd = command or raw.pop("command", None)
    raw.pop("command", None)
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown or missing command {cmd!r}; expected one of {COMMANDS}")
    cfg = _merge(DEFAULTS, raw)
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["output"]["dir"] = out
    if formats is not None:
        cfg["output"]["formats"] = formats
    if threads is None:
        threads = cfg["threads"]
    if threads is None and os.environ.get("KDVLAB_THREADS"):
        threads = os.environ["KDVLAB_THREADS"]
    if threads is not None:
        try:
            threads = int(threads)
        except ValueError:
            raise ConfigError(f"threads must be an integer (got {threads!r})") from None
        if threads < 1:
            raise ConfigError("threads must be positive")
    fm = cfg["output"]["formats"]
    if isinstance(fm, str):
        fm = [x.strip() for x in fm.split(",") if x.strip()]
    for f in fm:
        if f not in FORMATS:
            raise ConfigError(f"unknown output format {f!r}; expected {FORMATS}")
    params = RegularityParams(**cfg["params"])
    sv = cfg["solver"]
    if int(sv["n"]) < 2:
        raise ConfigError("solver.n must be at least 2")
    if not sv["t_end"] > 0:
        raise ConfigError("solver.t_end must be positive")
    if sv["dt"] is not None and not sv["dt"] > 0:
        raise ConfigError("solver.dt must be positive")
    if not 0 < sv["cfl_fraction"] <= 1:
        raise ConfigError("solver.cfl_fraction must lie in (0, 1]")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    sections = {k: v for k, v in cfg.items() if k not in ("params", "seed", "output", "threads")}
    return RunConfig(cmd, params, cfg["seed"], str(cfg["output"]["dir"]), list(fm), threads,
                     sections)


def load_config(path, **overrides):
    """Read and validate a JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError:
        raise
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return build_config(raw, **overrides)


def auto_dt(t_end, limit, fraction=1.0):
    """Largest ``t_end / k`` not exceeding ``fraction * limit``."""
    k = math.ceil(t_end / (fraction * limit) - 1e-12)
    return t_end / max(k, 1)
