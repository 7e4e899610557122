"""Experiment configuration: INI-style files with named presets.

The shipped defaults reproduce the published parameter sets: nozzle
envelope dimensions, the Cross-WLF melt for the viscous model, and the
Giesekus melt for the viscoelastic model. Every field can be overridden
from the file; validation collects all violations before failing.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..geometry import NozzleDims
from ..materials import CrossWlfParams, GiesekusParams
from ..solver import SolverConfig
from ..solver.core import AXISYM, PLANAR

MODELS = ("viscous", "viscoelastic")
PARAMETRIZATIONS = ("angle", "spline")

_DEFAULT = """\
[experiment]
model = viscoelastic
parametrization = angle
seed = 0
output_dir = runs/default

[geometry]
L_total = 18.0
L_heat = 14.66
L_out = 0.9
L_pressure = 1.0
d_in = 3.2
d_out = 0.5

[material.cross_wlf]
tau_star = 1.009e5
n = 0.25
D1 = 3.317e9
T_ref = 373.0
A1 = 20.19
A2 = 51.6
rho = 1250.0
cp = 1800.0
kappa = 0.2

[material.giesekus]
lam = 0.2
alpha_g = 0.05
beta = 0.15
eta_total = 2000.0
rho = 1250.0

[flow]
u_in = 10.0
T_wall = 503.0
T_in = 293.0

[sweep]
feeding_rates = 10.0
outlet_diameters =

[mesh]
h = 0.1
grading = 0.5

[solver]
tol_nl = 1e-6
max_iters = 600
relaxation = 0.3
stress_relaxation = 0.5
stress_diffusion = 0.5

[optimizer]
budget = 25
alpha0 = 50.0
n_ctrl = 6
degree = 3
"""


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description."""

    model: str
    parametrization: str
    seed: int
    output_dir: str
    dims: NozzleDims
    cross_wlf: CrossWlfParams
    giesekus: GiesekusParams
    u_in: float
    T_wall: float
    T_in: float
    feeding_rates: list
    outlet_diameters: list
    mesh_h: float
    mesh_grading: float
    solver: SolverConfig
    budget: int
    alpha0: float
    n_ctrl: int
    degree: int
    raw: dict = field(default_factory=dict)

    @property
    def material(self):
        return self.giesekus if self.model == "viscoelastic" else self.cross_wlf

    @property
    def solver_mode(self) -> str:
        return PLANAR if self.model == "viscoelastic" else AXISYM


def default_config_text() -> str:
    """The shipped preset (published parameter tables) as INI text."""
    return _DEFAULT


def _floats(text: str) -> list:
    return [float(tok) for tok in text.replace(",", " ").split()]


def load_config(path_or_text) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every violation."""
    parser = configparser.ConfigParser()
    parser.read_string(_DEFAULT)
    override = configparser.ConfigParser()
    if hasattr(path_or_text, "read"):
        override.read_file(path_or_text)
    elif "\n" in str(path_or_text) or "=" in str(path_or_text):
        override.read_string(str(path_or_text))
    else:
        read = override.read(str(path_or_text))
        if not read:
            raise ConfigError(f"config file not found: {path_or_text}")
    for sec in override.sections():
        if not parser.has_section(sec):
            parser.add_section(sec)
        for key, val in override.items(sec):
            parser.set(sec, key, val)

    errors = []

    def get(section, key, conv, check=None, desc=""):
        try:
            val = conv(parser.get(section, key))
        except (configparser.Error, ValueError) as exc:
            errors.append(f"[{section}] {key}: {exc}")
            return None
        if check is not None and not check(val):
            errors.append(f"[{section}] {key}: {desc} (got {val!r})")
            return None
        return val

    model = get("experiment", "model", str.strip,
                lambda v: v in MODELS, f"must be one of {MODELS}")
    parametrization = get("experiment", "parametrization", str.strip,
                          lambda v: v in PARAMETRIZATIONS,
                          f"must be one of {PARAMETRIZATIONS}")
    seed = get("experiment", "seed", int)
    output_dir = get("experiment", "output_dir", str.strip)

    geo = {k: get("geometry", k, float, lambda v: v > 0, "must be positive")
           for k in ("L_total", "L_heat", "L_out", "L_pressure", "d_in", "d_out")}
    dims = None
    if all(v is not None for v in geo.values()):
        try:
            dims = NozzleDims(**geo)
        except ValueError as exc:
            errors.append(f"[geometry] {exc}")

    cw = {k: get("material.cross_wlf", k, float)
          for k in ("tau_star", "n", "D1", "T_ref", "A1", "A2", "rho", "cp", "kappa")}
    cross = None
    if all(v is not None for v in cw.values()):
        try:
            cross = CrossWlfParams(**cw)
        except ValueError as exc:
            errors.append(f"[material.cross_wlf] {exc}")

    gk = {k: get("material.giesekus", k, float)
          for k in ("lam", "alpha_g", "beta", "eta_total", "rho")}
    gies = None
    if all(v is not None for v in gk.values()):
        try:
            gies = GiesekusParams(**gk)
        except ValueError as exc:
            errors.append(f"[material.giesekus] {exc}")

    u_in = get("flow", "u_in", float, lambda v: v >= 0, "must be non-negative")
    T_wall = get("flow", "T_wall", float, lambda v: v > 0, "must be positive")
    T_in = get("flow", "T_in", float, lambda v: v > 0, "must be positive")

    rates = get("sweep", "feeding_rates", _floats,
                lambda v: len(v) > 0 and all(r > 0 for r in v),
                "must list at least one positive feeding rate")
    diams = get("sweep", "outlet_diameters", _floats,
                lambda v: all(x > 0 for x in v), "diameters must be positive")

    mesh_h = get("mesh", "h", float, lambda v: v > 0, "must be positive")
    grading = get("mesh", "grading", float, lambda v: 0 < v <= 1,
                  "must be in (0, 1]")

    sv = {k: get("solver", k, float) for k in
          ("tol_nl", "relaxation", "stress_relaxation", "stress_diffusion")}
    max_iters = get("solver", "max_iters", int, lambda v: v > 0, "must be positive")
    solver = None
    if all(v is not None for v in sv.values()) and max_iters is not None:
        try:
            mode = PLANAR if model == "viscoelastic" else AXISYM
            solver = SolverConfig(mode=mode, max_iters=max_iters, **sv)
        except ValueError as exc:
            errors.append(f"[solver] {exc}")

    budget = get("optimizer", "budget", int, lambda v: v >= 3,
                 "must allow at least the initial set")
    alpha0 = get("optimizer", "alpha0", float,
                 lambda v: 5.0 <= v <= 90.0, "must be within [5, 90] deg")
    n_ctrl = get("optimizer", "n_ctrl", int, lambda v: v >= 4,
                 "need at least degree+1 control points")
    degree = get("optimizer", "degree", int, lambda v: 1 <= v <= 5,
                 "must be in [1, 5]")

    if errors:
        raise ConfigError("; ".join(errors), violations=errors)
    return ExperimentConfig(
        model=model, parametrization=parametrization, seed=seed,
        output_dir=output_dir, dims=dims, cross_wlf=cross, giesekus=gies,
        u_in=u_in, T_wall=T_wall, T_in=T_in,
        feeding_rates=rates, outlet_diameters=diams,
        mesh_h=mesh_h, mesh_grading=grading, solver=solver,
        budget=budget, alpha0=alpha0, n_ctrl=n_ctrl, degree=degree,
        raw={s: dict(parser.items(s)) for s in parser.sections()})


def validate_config(path) -> ExperimentConfig:
    """Alias for load_config; exists for symmetry with the CLI verb."""
    return load_config(path)


def config_roundtrip_text(cfg: ExperimentConfig) -> str:
    """Serialize the resolved config back to INI text (lossless)."""
    parser = configparser.ConfigParser()
    for sec, items in cfg.raw.items():
        parser.add_section(sec)
        for k, v in items.items():
            parser.set(sec, k, str(v))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
