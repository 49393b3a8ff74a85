"""
Built-in scenarios.

    test1        single outbreak on [0, 20]², commuters only
    test2        three hubs joined by fast corridors on the unit square
    emilia       SEIR outbreak over nine provinces (shipped data)
    convergence  smooth SIR problem used by the convergence study
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from ..errors import ArgumentError
from .config import ScenarioConfig, validate_config

logger = logging.getLogger("KineticEpidemic.Scenario")

DATA_ROOT = Path(__file__).resolve().parent.parent / "data"
EMILIA_DATA = DATA_ROOT / "emilia_romagna"

# (tau, lambda²) of the two regimes of the single-outbreak scenario
TEST1_REGIMES = {"kinetic": (1.0, 1.0), "diffusive": (1e-4, 1e4)}
# far-field relaxation time of the three-hub scenario
TEST2_REGIMES = {"kinetic": 1e4, "diffusive": 1e-4}
CONVERGENCE_REGIMES = {"kinetic": (1.0, 1.0), "intermediate": (1e-2, 1e2), "diffusive": (1e-4, 1e4)}

HUB_A = (0.2, 0.2)
HUB_B = (0.9, 0.5)
HUB_C = (0.3, 0.9)


def _regime(table: Dict[str, Any], regime: str):
    try:
        return table[regime]
    except KeyError:
        raise ArgumentError(f"unknown regime {regime!r}, expected one of {', '.join(table)}")


def preset_test1(beta_tilde: float = 10.0, regime: str = "kinetic", n: int = 88, nodes: int = 2) -> ScenarioConfig:
    tau, lambda2 = _regime(TEST1_REGIMES, regime)
    k = 13.0 * math.pi / 20.0
    return validate_config({
        "name": f"test1-{regime}-beta{beta_tilde:g}",
        "mesh": {"kind": "rectangle", "bounds": [0.0, 20.0, 0.0, 20.0], "nx": n},
        "model": {"kind": "SIR", "velocity_nodes_per_quadrant": nodes},
        "fields": {
            "beta_I": {"builder": "sine_product",
                       "params": {"kx": k, "ky": k, "offset": beta_tilde, "amplitude": 0.05 * beta_tilde}},
            "gamma_I": 10.0,
            "lambda2": lambda2,
            "tau": tau,
        },
        "initial": {
            "totals": {
                "S": {"builder": "gaussian_bump", "params": {"center": [10.0, 10.0], "offset": 1.0, "amplitude": -0.01}},
                "I": {"builder": "gaussian_bump", "params": {"center": [10.0, 10.0], "amplitude": 0.01}},
            },
            "commuter_fraction": 1.0,
        },
        "time": {"t_end": 10.0, "output_every": 0.5},
    })


def preset_test2(regime: str = "kinetic", n: int = 64, nodes: int = 2) -> ScenarioConfig:
    tau_r = _regime(TEST2_REGIMES, regime)
    tau_0 = 1e-4
    fast, slow = 1e2, 1e-2
    s1, s2 = 0.05, 0.025
    return validate_config({
        "name": f"test2-{regime}",
        "mesh": {"kind": "rectangle", "bounds": [0.0, 1.0, 0.0, 1.0], "nx": n},
        "model": {"kind": "SIR", "velocity_nodes_per_quadrant": nodes},
        "fields": {
            "beta_I": {"builder": "population_indicator", "params": {"inside": 6.0, "compartments": ["S", "I"]}},
            "gamma_I": 1.0,
            "lambda2": {"builder": "path_bands", "params": {
                "paths": [
                    {"points": [HUB_A, HUB_B], "value": fast},
                    {"points": [HUB_A, HUB_C], "value": fast},
                    {"points": [HUB_B, HUB_C], "value": slow},
                ],
                "half_width": 0.02,
                "background": 1e-12,
            }},
            "tau": {"builder": "hub_relaxation", "params": {
                "tau_r": tau_r, "tau_0": tau_0, "factor": 1.5,
                "hubs": [{"center": HUB_A, "width": s1}, {"center": HUB_B, "width": s2},
                         {"center": HUB_C, "width": s2}],
            }},
            "Du": 0.5 * fast * tau_0,
        },
        "initial": {
            "totals": {
                "S": {"builder": "paraboloid_caps", "params": {"caps": [
                    {"center": HUB_A, "curvature": 100.0},
                    {"center": HUB_B, "curvature": 500.0},
                    {"center": HUB_C, "curvature": 500.0},
                ]}},
                "I": {"builder": "paraboloid_caps", "params": {"caps": [{"center": HUB_B, "curvature": 500.0}]}},
            },
            "commuter_fraction": {"S": 0.01, "I": 0.8, "R": 1.0},
        },
        "geography": {
            "cities": [
                {"name": "A", "center": HUB_A, "radius": s1},
                {"name": "B", "center": HUB_B, "radius": s2},
                {"name": "C", "center": HUB_C, "radius": s2},
            ],
            "regions": "discs",
            "region_radius_factor": 3.0,
        },
        "time": {"t_end": 20.0, "output_every": 1.0},
    })


def preset_emilia_romagna(data_dir: Optional[str] = None, spacing_km: float = 4.0, nodes: int = 2) -> ScenarioConfig:
    data = Path(data_dir) if data_dir else EMILIA_DATA
    lambda2, tau_0 = 6.25e-4, 1e-4
    return validate_config({
        "name": "emilia-romagna",
        "mesh": {"kind": "region", "boundary": "boundary.txt", "spacing": spacing_km},
        "model": {"kind": "SEIR", "velocity_nodes_per_quadrant": nodes},
        "fields": {
            "beta_I": 3.7e-3,
            "beta_E": 3.7e-3,
            "kappa_I": 6e7,
            "kappa_E": 2.3e4,
            "gamma_I": 1.0 / 12.0,
            "gamma_E": 1.0 / 12.0,
            "a": 1.0 / 7.0,
            "sigma": 0.25,
            "zeta": 0.25,
            "lambda2": {
                "*": {"builder": "connection_bands",
                      "params": {"value": lambda2, "background": 1e-12, "half_width": 0.75}},
                "I": 0.0,
            },
            "tau": {"builder": "city_relaxation", "params": {"tau_r": 1e4, "tau_0": tau_0}},
            "Du": 0.5 * lambda2 * tau_0,
        },
        "initial": {
            "builder": {"builder": "city_gaussians"},
            "commuter_fraction": {"builder": "city_attribute", "params": {"attribute": "commuter_fraction"}},
        },
        "units": {"length": 1e-3, "population": 1e-5, "days_per_time_unit": 0.5},
        "geography": {
            "data_dir": str(data),
            "cities_file": "cities.csv",
            "mobility_file": "mobility.csv",
            "connections": [
                {"name": "via_emilia", "path": "connections/via_emilia.txt"},
                {"name": "adriatic", "path": "connections/adriatic.txt"},
                {"name": "ferrara_bologna", "path": "connections/ferrara_bologna.txt"},
            ],
            "regions": "voronoi",
        },
        "time": {"t_end": 20.0, "output_every": 1.0},
    })


def preset_convergence(regime: str = "kinetic", n: int = 12, nodes: int = 2) -> ScenarioConfig:
    """Smooth periodic-like data; S changes sign, so the positivity guard is off."""
    tau, lambda2 = _regime(CONVERGENCE_REGIMES, regime)
    k = 2.0 * math.pi
    return validate_config({
        "name": f"convergence-{regime}",
        "mesh": {"kind": "rectangle", "bounds": [-1.0, 1.0, -1.0, 1.0], "nx": n, "diagonal": "alternate"},
        "model": {"kind": "SIR", "velocity_nodes_per_quadrant": nodes, "positivity_guard": False},
        "fields": {"beta_I": 10.0, "gamma_I": 4.0, "lambda2": lambda2, "tau": tau},
        "initial": {
            "totals": {
                "S": {"builder": "sine_product", "params": {"kx": k, "ky": k}},
                "I": {"builder": "sine_product", "params": {"kx": k, "ky": k, "offset": 1.0, "amplitude": -1.0}},
            },
            "commuter_fraction": 1.0,
            "require_nonnegative": False,
        },
        "time": {"t_end": 0.1},
    })


PRESETS: Dict[str, Callable[..., ScenarioConfig]] = {
    "test1": preset_test1,
    "test2": preset_test2,
    "emilia": preset_emilia_romagna,
    "convergence": preset_convergence,
}


def parse_preset_args(items) -> Dict[str, Any]:
    """['key=value', ...] with JSON values (plain strings otherwise)."""
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ArgumentError(f"preset argument must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def resolve_preset(name: str, args: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ArgumentError(f"unknown preset {name!r} (known: {', '.join(sorted(PRESETS))})")
    try:
        config = factory(**(args or {}))
    except TypeError as e:
        raise ArgumentError(f"preset {name}: {e}")
    logger.debug(f"Resolved preset {name} with {args or {}}")
    return config
