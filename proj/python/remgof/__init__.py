"""Relational event model fitting and goodness-of-fit testing."""

import json

from ._core import (
    RemgofError,
    __version__,
    endo_statistics,
    kolmogorov_pvalue,
    ks_uniform,
    read_events,
    scenarios,
    simulate_bridge_sup,
    simulate_csv,
)
from . import _core


def fit(events, model, seed=1, m=2, stratified=False):
    """Fit `model` (spec text) to an event CSV path; returns the fit report as a dict."""
    return json.loads(_core.fit_json(str(events), model, seed=seed, m=m, stratified=stratified))


def gof(events, model, seed=1, terms=(), B=1000, bridge_seed=1, aux="", aux_B=1000):
    """Fit then test; returns {"fit": ..., "gof": ...}."""
    return json.loads(
        _core.gof_json(str(events), model, seed=seed, terms=list(terms), B=B,
                       bridge_seed=bridge_seed, aux=aux, aux_B=aux_B))


__all__ = [
    "RemgofError", "__version__", "endo_statistics", "fit", "gof", "kolmogorov_pvalue",
    "ks_uniform", "read_events", "scenarios", "simulate_bridge_sup", "simulate_csv",
]
