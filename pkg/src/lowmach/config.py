"""Run configuration, named presets, and the flat key=value config format.

Every run archives its effective configuration (defaults filled in) into
the output directory, so a result can be reproduced from the artifact
alone.  Identical configuration and seed give bit-identical CSV output.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .solvers import InitialDataSpec
from .spectral import (ScalarField, TorusGrid, VectorField, fft_inverse,
                       gradient, random_band_field)

PRESETS = ("single-mode", "two-mode-resonant", "random-Hs",
           "well-prepared-shear", "coefficients")

_PRESET_ARGS = re.compile(r"^(?P<name>[A-Za-z-]+)\s*(\((?P<args>[^)]*)\))?$")


@dataclass
class RunConfig:
    dimension: int = 1
    resolution: int = 256
    gamma: float = 2.0
    eps_list: tuple = (0.2, 0.1, 0.05)
    t_final: float = 0.5
    dt_override: float | None = None
    dealias: bool = True
    vacuum_floor: float = 1e-8
    tau_avg: float = 200.0
    sobolev_s: float = 3.0
    psi_normalization: str = "normalized"
    preset: str = "single-mode"
    coefficients: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.resolution < 8 or self.resolution % 2:
            raise ConfigError(
                f"resolution must be even and >= 8, got {self.resolution}")
        if self.gamma <= 1 or self.gamma < self.dimension / 2:
            raise ConfigError(
                f"gamma must exceed 1 and be >= dimension/2, got {self.gamma}")
        if not self.eps_list:
            raise ConfigError("eps_list must not be empty")
        for eps in self.eps_list:
            if not 0 < eps <= 1:
                raise ConfigError(f"eps must lie in (0, 1], got {eps}")
        if len(self.eps_list) > 1 and np.any(np.diff(self.eps_list) >= 0):
            raise ConfigError("eps_list must be strictly decreasing")
        if self.t_final <= 0:
            raise ConfigError(f"t_final must be positive, got {self.t_final}")
        if self.dt_override is not None and self.dt_override <= 0:
            raise ConfigError("dt_override must be positive")
        if not 0 < self.vacuum_floor < 1:
            raise ConfigError("vacuum_floor must lie in (0, 1)")
        if self.tau_avg <= 0:
            raise ConfigError("tau_avg must be positive")
        if self.sobolev_s < self.dimension / 2 + 1:
            raise ConfigError(
                f"sobolev_s must be >= dimension/2 + 1, got {self.sobolev_s}")
        if self.psi_normalization not in ("raw", "normalized"):
            raise ConfigError("psi_normalization must be 'raw' or "
                              f"'normalized', got {self.psi_normalization!r}")
        name, _ = _parse_preset(self.preset)
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; "
                              f"choose from {', '.join(PRESETS)}")
        if name == "coefficients" and not self.coefficients:
            raise ConfigError("preset 'coefficients' needs coefficient keys")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def grid(self) -> TorusGrid:
        frac = Fraction(2, 3) if self.dealias else Fraction(1, 1)
        return TorusGrid(self.dimension, self.resolution, frac)


def _parse_preset(text: str):
    m = _PRESET_ARGS.match(text.strip())
    if not m:
        raise ConfigError(f"malformed preset {text!r}")
    args = m.group("args")
    parsed = []
    if args:
        for piece in args.split(","):
            piece = piece.strip()
            if piece:
                parsed.append(float(piece))
    return m.group("name"), parsed


def _axis_wave(grid: TorusGrid, mode: int) -> np.ndarray:
    return np.cos(mode * grid.coordinates[0])


def _gradient_data(grid: TorusGrid, potential: ScalarField) -> VectorField:
    return gradient(potential)


def _coefficient_field(grid: TorusGrid, table: dict) -> ScalarField:
    """Real field from one-sided series coefficients {k: complex}.

    Each entry contributes c e^{ik.x} + conj(c) e^{-ik.x}; a k = 0 entry
    must be real and contributes once.
    """
    coeffs = np.zeros(grid.shape, dtype=complex)
    N = grid.resolution
    for kvec, c in table.items():
        k = (kvec,) if isinstance(kvec, int) else tuple(kvec)
        if len(k) != grid.dimension:
            raise ConfigError(f"coefficient key {k} has wrong dimension")
        if max(abs(x) for x in k) > grid.band_limit:
            raise ConfigError(f"coefficient mode {k} outside retained band")
        idx = tuple(x % N for x in k)
        if all(x == 0 for x in k):
            if abs(complex(c).imag) > 0:
                raise ConfigError("mean coefficient must be real")
            coeffs[idx] += complex(c).real
            continue
        neg = tuple((-x) % N for x in k)
        coeffs[idx] += complex(c)
        coeffs[neg] += np.conj(complex(c))
    return ScalarField(grid, fft_inverse(grid, coeffs, real=True))


def build_initial_spec(config: RunConfig, eps: float) -> InitialDataSpec:
    """Materialize the configured initial data at one Mach number."""
    grid = config.grid()
    name, args = _parse_preset(config.preset)
    zero_scalar = ScalarField(grid, np.zeros(grid.shape))
    if name == "single-mode":
        pot = ScalarField(grid, 0.5 * np.sin(grid.coordinates[0]))
        return InitialDataSpec(zero_scalar, _gradient_data(grid, pot), "ill",
                               eps, config.sobolev_s)
    if name == "two-mode-resonant":
        x = grid.coordinates[0]
        pot = ScalarField(grid, 0.35 * np.sin(x) + 0.125 * np.sin(2.0 * x))
        return InitialDataSpec(zero_scalar, _gradient_data(grid, pot), "ill",
                               eps, config.sobolev_s)
    if name == "random-Hs":
        s = args[0] if args else config.sobolev_s
        seed = int(args[1]) if len(args) > 1 else config.seed
        rng = np.random.default_rng(seed)
        pot = random_band_field(grid, rng, decay=s + 2.0,
                                kmax=min(8, grid.band_limit), amplitude=0.4)
        return InitialDataSpec(zero_scalar, _gradient_data(grid, pot), "ill",
                               eps, s)
    if name == "well-prepared-shear":
        mean = np.zeros((grid.dimension,) + grid.shape)
        mean[0] = 2.0
        ripple = ScalarField(grid, 3e-3 * _axis_wave(grid, 1))
        return InitialDataSpec(zero_scalar, VectorField(grid, mean), "well",
                               eps, config.sobolev_s,
                               second_order_density=ripple)
    sigma0 = _coefficient_field(grid, config.coefficients.get("sigma0", {}))
    pot = _coefficient_field(grid, config.coefficients.get("potential", {}))
    vel = _gradient_data(grid, pot).values
    mean = config.coefficients.get("mean_velocity",
                                   (0.0,) * config.dimension)
    if len(mean) != config.dimension:
        raise ConfigError("mean_velocity has wrong dimension")
    vel = vel + np.reshape(mean, (-1,) + (1,) * grid.dimension)
    prep = config.coefficients.get("preparation", "ill")
    return InitialDataSpec(sigma0, VectorField(grid, vel), prep, eps,
                           config.sobolev_s)


# flat key=value files -----------------------------------------------------

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _parse_bool(text: str) -> bool:
    try:
        return _BOOL_WORDS[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {text!r}") from None


def _parse_mode_key(text: str, what: str):
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"malformed {what} mode {text!r}") from None
    return parts[0] if len(parts) == 1 else parts


def _parse_complex(text: str) -> complex:
    pieces = [p.strip() for p in text.split(",")]
    if len(pieces) == 1:
        return complex(float(pieces[0]), 0.0)
    if len(pieces) == 2:
        return complex(float(pieces[0]), float(pieces[1]))
    raise ConfigError(f"expected 're' or 're,im', got {text!r}")


def parse_config_text(text: str) -> RunConfig:
    values = {}
    coeffs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        try:
            if key == "dimension":
                values[key] = int(val)
            elif key == "resolution":
                values[key] = int(val)
            elif key in ("gamma", "t_final", "vacuum_floor", "tau_avg",
                         "sobolev_s"):
                values[key] = float(val)
            elif key == "dt_override":
                values[key] = None if val.lower() == "none" else float(val)
            elif key == "eps_list":
                values[key] = tuple(float(p) for p in val.split(",") if p.strip())
            elif key == "dealias":
                values[key] = _parse_bool(val)
            elif key in ("psi_normalization", "preset"):
                values[key] = val
            elif key == "out_dir":
                values[key] = None if val.lower() == "none" else val
            elif key in ("seed", "workers"):
                values[key] = int(val)
            elif key.startswith("sigma0_coeff."):
                table = coeffs.setdefault("sigma0", {})
                table[_parse_mode_key(key[len("sigma0_coeff."):], "sigma0")] \
                    = _parse_complex(val)
            elif key.startswith("potential_coeff."):
                table = coeffs.setdefault("potential", {})
                table[_parse_mode_key(key[len("potential_coeff."):],
                                      "potential")] = _parse_complex(val)
            elif key == "mean_velocity":
                coeffs["mean_velocity"] = tuple(
                    float(p) for p in val.split(","))
            elif key == "preparation":
                if val not in ("well", "ill"):
                    raise ConfigError(
                        f"preparation must be well or ill, got {val!r}")
                coeffs["preparation"] = val
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError as ex:
            raise ConfigError(f"line {lineno}: {ex}") from None
    if coeffs:
        values["coefficients"] = coeffs
        values.setdefault("preset", "coefficients")
    return RunConfig(**values)


def parse_config_file(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text())


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v)
                        for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_lines(config: RunConfig) -> list:
    """Effective configuration as sorted key=value lines, defaults filled."""
    lines = []
    for fld in sorted(fields(config), key=lambda item: item.name):
        if fld.name == "coefficients":
            continue
        lines.append(f"{fld.name}={_format_value(getattr(config, fld.name))}")
    for group in ("sigma0", "potential"):
        table = config.coefficients.get(group, {})
        for kvec in sorted(table, key=lambda k: (k,) if isinstance(k, int) else k):
            c = complex(table[kvec])
            key = kvec if isinstance(kvec, int) \
                else ",".join(str(x) for x in kvec)
            lines.append(f"{group}_coeff.{key}={c.real!r},{c.imag!r}")
    if "mean_velocity" in config.coefficients:
        lines.append("mean_velocity="
                     + ",".join(repr(float(v))
                                for v in config.coefficients["mean_velocity"]))
    if "preparation" in config.coefficients:
        lines.append(f"preparation={config.coefficients['preparation']}")
    return lines


def echo_config(config: RunConfig, path):
    Path(path).write_text("\n".join(config_lines(config)) + "\n")
