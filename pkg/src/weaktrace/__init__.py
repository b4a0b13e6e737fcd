"""Weak traces of photons in a nested Mach-Zehnder interferometer with vibrating mirrors."""

from .beamprop import BeamParams, GaussianBeam, apply_tilt, gouy_phase, propagate_beam, quad_cell
from .config import ConfigError, ScenarioConfig, dump_config, parse_config
from .dsl import ParseError, load_network, parse_network, to_dsl
from .dynamics import (Drive, VibrationConfig, analytic_first_order, fit_scaling_exponent, power_spectrum,
                       simulate_timeseries, trace_strength)
from .netgraph import Network, NetworkError, build_nested_mzi, enumerate_paths, validate_network
from .tsvf import ZeroOverlapError, weak_values

__version__ = "0.1.0"
