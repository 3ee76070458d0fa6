"""
YAML scenarios: parsing, validation against the known sections, and the
factories that turn a scenario into grids, Hamiltonians and initial states.
"""

import copy
import difflib
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from . import states
from .config import load_settings
from .errors import ConfigurationError, ScenarioError
from .flow import HamiltonianSpec
from .grid import FINITE_DIFFERENCE, METHODS, GridSpec
from .guidance import POLICIES
from .solvers import lattice_ground_state

SCHRODINGER = "schrodinger"
DIRAC = "dirac"
SCALAR_FIELD = "scalar-field"
SECTORS = (SCHRODINGER, DIRAC, SCALAR_FIELD)

RK4 = "rk4"
INTEGRATORS = (RK4, "crank-nicolson", "split-step")

INITIAL_STATES = ("gaussian", "plane-wave", "oscillator", "double-gaussian", "lattice-ground")

# Section defaults; the type of each default is the type a value must coerce to.
# None accepts any scalar, a list default accepts any list.
SECTION_DEFAULTS = {
    "grid": {
        "dimension": 1,
        "points": 64,
        "length": 20.0,
        "boundary": "periodic",
        "method": FINITE_DIFFERENCE,
    },
    "units": {
        "hbar": 1.0,
        "mass": 1.0,
    },
    "initial_state": {
        "kind": "gaussian",
        "center": 0.0,
        "width": 1.0,
        "momentum": 0.0,
        "separation": 4.0,
        "n": 1,
        "omega": 1.0,
    },
    "potential": {
        "kind": "free",
        "value": 0.0,
        "omega": 1.0,
        "height": 1.0,
        "width": 1.0,
        "center": 0.0,
    },
    "integrator": {
        "method": "crank-nicolson",
        "dt": 1.0e-3,
        "steps": 100,
        "record_every": 10,
        "compare_cn": False,
    },
    "particles": {
        "positions": [],
        "policy": "shrink",
    },
    "ensemble": {
        "samples": 10000,
        "metric": "ks",
        "bins": 40,
        "checkpoints": 4,
    },
    "dirac": {
        "spinor": "rest",
        "representation": "dirac",
        "momentum": 0.5,
        "ratio": 0.3,
        "beta": 0.6,
        "mass": 1.0,
        "dtau": 0.01,
        "steps": 1000,
        "start": [0.0, 0.0, 0.0, 0.0],
        "lattice_points": 16,
        "lattice_n": 1,
    },
    "scalar_field": {
        "n_max": 8,
        "box_length": 2.0 * np.pi,
        "mass": 1.0,
        "include_zero": False,
        "state": "vacuum",
        "offset": 0.25,
        "dt": 1.0e-3,
        "steps": 1000,
        "record_every": 10,
        "field_points": 64,
    },
    "tolerances": {
        "node_threshold": 1.0e-12,
        "linear_solve": 1.0e-12,
        "constraint": 1.0e-10,
    },
}
TOP_LEVEL_DEFAULTS = {"sector": SCHRODINGER, "seed": 0}
KNOWN_KEYS = tuple(TOP_LEVEL_DEFAULTS) + tuple(SECTION_DEFAULTS)


def _defaults(settings=None):
    """Section defaults with the packaged settings.yaml (or an override) applied."""
    settings = settings or load_settings()
    defaults = copy.deepcopy(SECTION_DEFAULTS)
    units = settings.get("units", {})
    defaults["units"].update({k: units[k] for k in ("hbar", "mass") if k in units})
    ensemble = settings.get("ensemble", {})
    defaults["ensemble"].update({k: ensemble[k] for k in ("samples", "bins", "metric") if k in ensemble})
    scalar = settings.get("scalar_field", {})
    defaults["scalar_field"].update({k: scalar[k] for k in ("n_max", "box_length", "mass") if k in scalar})
    numerics = settings.get("numerics", {})
    for source, target in (("node_threshold", "node_threshold"), ("linear_solve_tolerance", "linear_solve"),
                           ("constraint_tolerance", "constraint")):
        if source in numerics:
            defaults["tolerances"][target] = numerics[source]
    return defaults


@dataclass
class Scenario:
    sector: str = SCHRODINGER
    grid: dict = field(default_factory=dict)
    units: dict = field(default_factory=dict)
    initial_state: dict = field(default_factory=dict)
    potential: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    particles: dict = field(default_factory=dict)
    ensemble: dict = field(default_factory=dict)
    dirac: dict = field(default_factory=dict)
    scalar_field: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self):
        return copy.deepcopy(asdict(self))

    @property
    def hbar(self):
        return self.units["hbar"]

    @property
    def mass(self):
        return self.units["mass"]

    def with_overrides(self, hbar=None, mass=None, seed=None):
        data = self.to_dict()
        if hbar is not None:
            data["units"]["hbar"] = float(hbar)
        if mass is not None:
            data["units"]["mass"] = float(mass)
        if seed is not None:
            data["seed"] = int(seed)
        return _validated(Scenario(**data))

    def updated(self, section, **values):
        """Copy with the non-None values replacing keys of one section."""
        data = self.to_dict()
        for key, value in values.items():
            if value is None:
                continue
            path = f"{section}.{key}"
            if key not in data[section]:
                raise _unknown(path, data[section], {})
            data[section][key] = _coerce(path, SECTION_DEFAULTS[section][key], value)
        return _validated(Scenario(**data))

    def grid_spec(self):
        g = self.grid
        return GridSpec(g["dimension"], g["points"], g["length"], g["boundary"])

    def hamiltonian(self):
        grid = self.grid_spec()
        params = {k: v for k, v in self.potential.items() if k != "kind"}
        kind = self.potential["kind"]
        if kind == "harmonic":
            potential = states.harmonic_potential(grid, params["omega"], self.mass)
        elif kind == "barrier":
            potential = states.barrier_potential(grid, params["height"], params["width"], params["center"])
        elif kind == "constant":
            potential = states.constant_potential(grid, params["value"])
        else:
            potential = states.build_potential(grid, kind)
        return HamiltonianSpec(grid, potential, self.mass, self.hbar, self.grid["method"])

    def initial_psi(self, hamiltonian=None):
        grid = self.grid_spec()
        spec = self.initial_state
        kind = spec["kind"]
        if kind == "gaussian":
            return states.gaussian_packet(grid, spec["center"], spec["width"], spec["momentum"], self.hbar)
        if kind == "plane-wave":
            k = states.commensurate_wavenumber(grid, spec["n"])
            return states.plane_wave(grid, k).normalized()
        if kind == "oscillator":
            return states.oscillator_ground_state(grid, spec["omega"], self.mass, self.hbar)
        if kind == "double-gaussian":
            return states.double_gaussian(grid, spec["separation"], spec["width"], spec["momentum"], self.hbar)
        return lattice_ground_state(hamiltonian or self.hamiltonian())[0]

    def particle_positions(self):
        positions = self.particles["positions"]
        if not positions:
            return np.zeros((0, self.grid["dimension"]))
        return np.array(positions, dtype=float).reshape(-1, self.grid["dimension"])


def _coerce(path, default, value):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ScenarioError(f"'{path}' must be true or false, got {value!r}", key=path)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ScenarioError(f"'{path}' must be an integer, got {value!r}", key=path)
        return int(value)
    if isinstance(default, float):
        if isinstance(value, (list, tuple)):
            return [_coerce(path, default, v) for v in value]
        try:
            # YAML 1.1 reads 1e-3 (no dot) as a string
            return float(value)
        except (TypeError, ValueError):
            raise ScenarioError(f"'{path}' must be a number, got {value!r}", key=path) from None
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ScenarioError(f"'{path}' must be a list, got {value!r}", key=path)
        return _plain_list(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ScenarioError(f"'{path}' must be a string, got {value!r}", key=path)
        return value
    return value


def _plain_list(value):
    return [_plain_list(v) if isinstance(v, (list, tuple)) else v for v in value]


def _key_marks(text):
    """(line, column) of every mapping key, 1-based, keyed by dotted path."""
    marks = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return marks

    def walk(node, prefix):
        if not isinstance(node, yaml.MappingNode):
            return
        for key_node, value_node in node.value:
            path = f"{prefix}{key_node.value}"
            marks[path] = (key_node.start_mark.line + 1, key_node.start_mark.column + 1)
            walk(value_node, path + ".")

    walk(root, "")
    return marks


def _unknown(path, candidates, marks):
    name = path.rsplit(".", 1)[-1]
    close = difflib.get_close_matches(name, list(candidates), n=1)
    line, column = marks.get(path, (None, None))
    return ScenarioError(f"unknown key '{path}'", key=path, line=line, column=column,
                         suggestion=close[0] if close else None)


def _merge(raw, defaults, marks):
    merged = {key: copy.deepcopy(value) for key, value in TOP_LEVEL_DEFAULTS.items()}
    merged.update(copy.deepcopy(defaults))
    for key, value in raw.items():
        key = str(key)
        if key not in KNOWN_KEYS:
            raise _unknown(key, KNOWN_KEYS, marks)
        if key in TOP_LEVEL_DEFAULTS:
            merged[key] = _coerce(key, TOP_LEVEL_DEFAULTS[key], value)
            continue
        if value is None:
            continue
        if not isinstance(value, dict):
            line, column = marks.get(key, (None, None))
            raise ScenarioError(f"section '{key}' must be a mapping", key=key, line=line, column=column)
        section = merged[key]
        for sub, sub_value in value.items():
            path = f"{key}.{sub}"
            if sub not in section:
                raise _unknown(path, section, marks)
            section[sub] = _coerce(path, defaults[key][sub], sub_value)
    return merged


def _require(condition, message, key):
    if not condition:
        raise ScenarioError(message, key=key)


def _validated(scenario):
    """Semantic checks that need more than one key; returns the scenario."""
    _require(scenario.sector in SECTORS, f"unknown sector '{scenario.sector}' (expected one of {SECTORS})", "sector")
    _require(scenario.grid["method"] in METHODS, f"unknown derivative method '{scenario.grid['method']}'",
             "grid.method")
    _require(scenario.integrator["method"] in INTEGRATORS,
             f"unknown integrator '{scenario.integrator['method']}' (expected one of {INTEGRATORS})",
             "integrator.method")
    _require(scenario.initial_state["kind"] in INITIAL_STATES,
             f"unknown initial state '{scenario.initial_state['kind']}' (expected one of {INITIAL_STATES})",
             "initial_state.kind")
    _require(scenario.potential["kind"] in states.POTENTIALS,
             f"unknown potential '{scenario.potential['kind']}'", "potential.kind")
    _require(scenario.particles["policy"] in POLICIES,
             f"unknown node policy '{scenario.particles['policy']}'", "particles.policy")
    _require(scenario.integrator["dt"] > 0, "integrator.dt must be positive", "integrator.dt")
    _require(scenario.integrator["steps"] >= 0, "integrator.steps must be non-negative", "integrator.steps")
    _require(scenario.integrator["record_every"] >= 1, "integrator.record_every must be at least 1",
             "integrator.record_every")
    _require(scenario.units["hbar"] > 0, "units.hbar must be positive", "units.hbar")
    mass = np.atleast_1d(scenario.units["mass"])
    _require(np.all(mass > 0), "units.mass must be positive", "units.mass")
    try:
        grid = scenario.grid_spec()
    except ConfigurationError as exc:
        raise ScenarioError(str(exc), key="grid") from None
    positions = scenario.particles["positions"]
    if positions:
        try:
            points = scenario.particle_positions()
        except ValueError:
            raise ScenarioError(f"particle positions must have {grid.dimension} coordinates each",
                                key="particles.positions") from None
        _require(grid.contains(points), f"initial particle position outside the box [-L/2, L/2]: {positions}",
                 "particles.positions")
    return scenario


def parse_scenario(text, settings=None):
    """Scenario from YAML text, with every missing value filled from the defaults."""
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line, column = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
        raise ScenarioError(f"scenario is not valid YAML: {exc.problem}", line=line, column=column) from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario is not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping of sections")
    merged = _merge(raw, _defaults(settings), _key_marks(text))
    return _validated(Scenario(**merged))


def load_scenario(path, settings=None):
    with open(path, "r", encoding="utf-8") as f:
        return parse_scenario(f.read(), settings)


def default_scenario(settings=None):
    return parse_scenario("", settings)


def dump_scenario(scenario):
    return yaml.safe_dump(scenario.to_dict(), sort_keys=True, default_flow_style=False)


def _number(text):
    try:
        value = float(text)
    except ValueError:
        return text
    return int(value) if value.is_integer() and "." not in text and "e" not in text.lower() else value


def parse_descriptor(text):
    """'kind', 'kind:value' or 'kind:a=1,b=2' -> (kind, params).

    A bare value is stored under the key 'value'.
    """
    kind, _, rest = str(text).partition(":")
    kind = kind.strip()
    if not kind:
        raise ConfigurationError(f"empty descriptor '{text}'")
    params = {}
    if rest.strip():
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if sep:
                params[key.strip()] = _number(value.strip())
            elif "value" not in params:
                params["value"] = _number(key.strip())
            else:
                raise ConfigurationError(f"cannot parse '{item}' in descriptor '{text}'")
    return kind, params


def parse_points(text, dimension):
    """'x1,x2,...' (1D) or 'x,y;x,y;...' (2D) -> array of shape (n, dimension)."""
    try:
        if dimension == 1:
            values = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
            return np.array(values).reshape(-1, 1)
        rows = [[float(v) for v in row.split(",")] for row in text.split(";") if row.strip()]
        return np.array(rows, dtype=float).reshape(-1, dimension)
    except ValueError:
        raise ConfigurationError(f"cannot parse initial points '{text}' for a {dimension}D grid") from None


def load_points(path, dimension):
    """Points file: one point per row, comma or whitespace separated; '#' starts a comment."""
    with open(path, encoding="utf-8") as f:
        delimiter = "," if "," in f.read() else None
    try:
        values = np.loadtxt(path, delimiter=delimiter, ndmin=2)
    except ValueError as e:
        raise ConfigurationError(f"cannot read initial points from '{path}': {e}") from None
    if values.size % dimension:
        raise ConfigurationError(f"'{path}' holds {values.size} coordinates, not a multiple of {dimension}")
    return values.reshape(-1, dimension)
