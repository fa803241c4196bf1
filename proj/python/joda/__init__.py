"""Joint dynamics profiles for articulated objects."""

import json

from . import _core
from ._core import JodaError, pchip_eval, stable_hash, template_names

__all__ = [
    "JodaError",
    "analyze",
    "compile",
    "field_eval",
    "optimize",
    "pchip_eval",
    "plot_svg",
    "simulate",
    "stable_hash",
    "template_names",
    "validate_proposal",
]


def _text(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def validate_proposal(proposal, raw=False):
    _core.validate_proposal(_text(proposal), raw)


def compile(context, proposal, raw=False):
    """Returns the canonical composed.json text."""
    return _core.compile(_text(context), _text(proposal), raw)


def field_eval(composed, s):
    return _core.field_eval(_text(composed), s)


def simulate(composed, scenario):
    """Runs a scenario; returns the trajectory as a list of dicts."""
    csv = _core.simulate(_text(composed), _text(scenario))
    lines = csv.strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, map(float, row.split(",")))) for row in lines[1:]]


def analyze(composed, points=1001):
    return json.loads(_core.analyze(_text(composed), points))


def plot_svg(composed, points=1001, annotate_equilibria=False, shade_stick_regions=False):
    return _core.plot_svg(_text(composed), points, annotate_equilibria, shade_stick_regions)


def optimize(composed, targets, iters=50, lr=0.05, params="conservative", threads=1):
    """targets: trajectory CSV texts. Returns (report dict, refined composed.json text)."""
    report, refined = _core.optimize(_text(composed), list(targets), iters, lr, params, threads)
    return json.loads(report), refined
