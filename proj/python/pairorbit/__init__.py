"""Python access to the pairorbit numerics. Structured results are returned as dicts."""

import json

import numpy as np

from . import _core
from ._core import PairorbitError, __version__, dv_rate_1d, experiment_names

__all__ = [
    "PairorbitError",
    "__version__",
    "chi_scaling_exact",
    "decompose",
    "dv_rate_1d",
    "experiment_names",
    "pam_moment",
    "run_experiment",
    "solve",
]


def decompose(coords, weights, window_radius=0.0, mass_floor=0.05, separation_factor=4.0):
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    return json.loads(_core.decompose(coords, np.asarray(weights, dtype=float), window_radius, mass_floor,
                                      separation_factor))


def solve(functional, p=1, mass=1.0, grid_n=0, grid_h=0.0, tol=0.0, phi_eps=1.0, amplitude=1.0):
    return json.loads(_core.solve(functional, p, mass, grid_n, grid_h, tol, phi_eps, amplitude))


def chi_scaling_exact(m1, m2, A, B):
    return json.loads(_core.chi_scaling_exact(m1, m2, A, B))


def pam_moment(p, eps, samples=1000, seed=1, dt=0.0, threads=1):
    return json.loads(_core.pam_moment(p, eps, samples, seed, dt, threads))


def run_experiment(name, params=None, seed=1, threads=1):
    """Returns (result dict, canonical JSON text); the text is byte-stable for a given seed."""
    text = _core.run_experiment(name, json.dumps(params or {}), seed, threads)
    return json.loads(text), text
