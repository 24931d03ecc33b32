"""Experiment configuration: a versioned TOML file.

Dialect: TOML (tables, typed scalars).  `config_version = 1` is required.
Example:

    config_version = 1
    seed = 1234
    output_dir = "out"

    [model]
    name = "linear_wave"     # linear_wave | nonlinear_wave | damped_wave |
    n = 256                  #   noncanonical_wave
    # damping = 0.1          # damped_wave only
    # ic_width = 0.1         # Gaussian initial-condition width scale
    # seed = 0               # noncanonical structure seed (defaults to top-level)

    [parameters]             # either an explicit sample list ...
    samples = [[0.5], [1.0], [2.0]]
    # ... or a uniform grid over a box:
    # low = [0.5]
    # high = [2.0]
    # count = 10
    # (omitting the table defaults to 5 speeds over [0.5, 2])

    [time]
    t0 = 0.0
    t_end = 1.0
    dt = 0.01                # default: CFL-like 0.5*dx/mu_max

    [basis]
    method = "complexsvd"    # cotangent | complexsvd | svdlike | greedy | pod
    k = 10
    # greedy_tol = 1e-8
    # greedy_indicator = "hamiltonian"   # or "projection"
    # complex_order = "paper"            # or "qp"

    [integrator]
    scheme = "midpoint"      # or stormer_verlet

    [dlr]                    # cmd_dlr only
    k = 4

Every run is fully deterministic given the file contents (the seed feeds a
counter-based generator).
"""

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

CONFIG_VERSION = 1
BASIS_METHODS = ("cotangent", "complexsvd", "svdlike", "greedy", "pod")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    output_dir: str
    model: dict
    samples: list
    t0: float
    t_end: float
    dt: float
    basis_method: str = "complexsvd"
    basis_k: int = 10
    greedy_tol: float = 1e-8
    greedy_indicator: str = "hamiltonian"
    complex_order: str = "paper"
    scheme: str = "midpoint"
    dlr_k: Optional[int] = None
    path: str = ""
    raw: dict = field(default_factory=dict)

    def time_grid(self):
        n_steps = int(round((self.t_end - self.t0) / self.dt))
        return self.t0 + self.dt * np.arange(n_steps + 1)


def _require(table, key, where):
    if key not in table:
        raise ConfigError(f"missing required field '{where}.{key}'"
                          if where else f"missing required field '{key}'")
    return table[key]


def load_config(path):
    """Parse and validate an experiment configuration file."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc

    version = _require(raw, "config_version", "")
    if version != CONFIG_VERSION:
        raise ConfigError(
            f"unsupported config_version {version}, expected {CONFIG_VERSION}"
        )
    seed = int(raw.get("seed", 0))
    output_dir = raw.get("output_dir", "out")

    model = dict(_require(raw, "model", ""))
    _require(model, "name", "model")
    _require(model, "n", "model")
    model.setdefault("seed", seed)

    # default parameter domain for the wave models: speeds in [0.5, 2]
    samples = _parse_samples(raw.get(
        "parameters", {"low": [0.5], "high": [2.0], "count": 5}
    ))

    time_tbl = _require(raw, "time", "")
    t0 = float(_require(time_tbl, "t0", "time"))
    t_end = float(_require(time_tbl, "t_end", "time"))
    if "dt" in time_tbl:
        dt = float(time_tbl["dt"])
    else:
        # CFL-like default for the wave models: dt = 0.5 dx / mu_max
        mu_max = max(float(np.max(np.abs(s))) for s in samples)
        dt = 0.5 / (int(model["n"]) * max(mu_max, 1e-12))
    if not (math.isfinite(dt) and dt > 0.0):
        raise ConfigError("'time.dt' must be a positive finite number")
    if t_end <= t0:
        raise ConfigError("'time.t_end' must exceed 'time.t0'")

    basis_tbl = raw.get("basis", {})
    method = basis_tbl.get("method", "complexsvd")
    if method not in BASIS_METHODS:
        raise ConfigError(
            f"'basis.method' must be one of {BASIS_METHODS}, got '{method}'"
        )
    k = int(basis_tbl.get("k", 10))
    if not 1 <= k <= int(model["n"]):
        raise ConfigError(
            f"'basis.k' must satisfy 1 <= k <= n = {model['n']}, got {k}"
        )
    indicator = basis_tbl.get("greedy_indicator", "hamiltonian")
    if indicator not in ("hamiltonian", "projection"):
        raise ConfigError("'basis.greedy_indicator' must be hamiltonian|projection")
    complex_order = basis_tbl.get("complex_order", "paper")
    if complex_order not in ("paper", "qp"):
        raise ConfigError("'basis.complex_order' must be paper|qp")
    greedy_tol = float(basis_tbl.get("greedy_tol", 1e-8))

    scheme = raw.get("integrator", {}).get("scheme", "midpoint")
    if scheme not in ("midpoint", "stormer_verlet"):
        raise ConfigError("'integrator.scheme' must be midpoint|stormer_verlet")

    dlr_tbl = raw.get("dlr", {})
    dlr_k = int(dlr_tbl["k"]) if "k" in dlr_tbl else None
    if dlr_k is not None and not 1 <= dlr_k <= int(model["n"]):
        raise ConfigError(f"'dlr.k' must satisfy 1 <= k <= n, got {dlr_k}")

    return ExperimentConfig(
        seed=seed,
        output_dir=output_dir,
        model=model,
        samples=samples,
        t0=t0,
        t_end=t_end,
        dt=dt,
        basis_method=method,
        basis_k=k,
        greedy_tol=greedy_tol,
        greedy_indicator=indicator,
        complex_order=complex_order,
        scheme=scheme,
        dlr_k=dlr_k,
        path=str(path),
        raw=raw,
    )


def _parse_samples(table):
    if "samples" in table:
        samples = [np.atleast_1d(np.asarray(s, dtype=float))
                   for s in table["samples"]]
        if not samples:
            raise ConfigError("'parameters.samples' must be non-empty")
        return samples
    for key in ("low", "high", "count"):
        if key not in table:
            raise ConfigError(
                "the 'parameters' table needs either 'samples' or "
                "'low'/'high'/'count'"
            )
    low = np.atleast_1d(np.asarray(table["low"], dtype=float))
    high = np.atleast_1d(np.asarray(table["high"], dtype=float))
    count = int(table["count"])
    if low.shape != high.shape:
        raise ConfigError("'parameters.low' and 'parameters.high' differ in shape")
    if count < 1:
        raise ConfigError("'parameters.count' must be >= 1")
    if low.size != 1:
        raise ConfigError("grid sampling supports scalar parameters only")
    if count == 1:
        return [low.copy()]
    return [low + (high - low) * j / (count - 1) for j in range(count)]
