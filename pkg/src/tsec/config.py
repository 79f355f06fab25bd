"""Experiment configuration: flat key/value text with section headers.

Example
-------
::

    [experiment]
    dimension = 2
    resolution = 64

    [fields]
    vector_field = "[1, golden]"
    volume_density = "1"
    metric = "[[1, 0], [0, 1]]"

    [angle]
    periods = "[1, 0]"
    offset = "0"
    level = 0.0

    [options]
    truncation = 8
    denominator = 64
    dt = 0.001
    tolerance = 1e-8
    section_resolution = 256
    orbit_count = 1000
    equivalence_returns = 100
    seed = 0

Expressions are quoted strings in the grammar of :mod:`tsec.expressions`
(quotes are optional but recommended; they keep the files diff-friendly).
The `[fields]`, `[angle]`, and `[options]` sections may be partial; every
option has a default, and the `[angle]` section defaults to the first
coordinate angle F = x.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from . import expressions as expr
from .dynamics import AngleFunction
from .fields import DifferentialForm, MetricField, ScalarField, VectorField, grid_axes

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


_OPTION_TYPES = {
    "truncation": int,
    "denominator": int,
    "dt": float,
    "tolerance": float,
    "section_resolution": int,
    "orbit_count": int,
    "equivalence_returns": int,
    "equivalence_starts": int,
    "seed": int,
}

_DEFAULT_OPTIONS = {
    "denominator": 64,
    "dt": 1e-3,
    "tolerance": 1e-8,
    "section_resolution": 256,
    "orbit_count": 1000,
    "equivalence_returns": 100,
    "equivalence_starts": 8,
    "seed": 0,
}


@dataclass
class ExperimentConfig:
    """Parsed configuration; field objects are built on demand."""

    dimension: int
    resolution: int
    vector_field_text: str
    volume_density_text: str
    metric_text: str | None
    angle_periods: np.ndarray
    angle_offset_text: str | None
    level: float
    options: dict = field(default_factory=dict)

    def option(self, name, override=None):
        if override is not None:
            return override
        if name in self.options:
            return self.options[name]
        if name == "truncation":
            return 8 if self.dimension == 2 else 3
        return _DEFAULT_OPTIONS[name]

    # -- field builders ----------------------------------------------------

    def _sample_scalar(self, node):
        axes = np.meshgrid(*grid_axes(self.dimension, self.resolution), indexing="ij")
        values = expr.evaluate(node, axes)
        values = np.broadcast_to(values, (self.resolution,) * self.dimension)
        return ScalarField(values)

    def vector_field(self):
        nodes = expr.parse_vector(self.vector_field_text, dimension=self.dimension)
        if len(nodes) != self.dimension:
            raise ConfigError(
                f"vector_field has {len(nodes)} components in dimension {self.dimension}"
            )
        return VectorField([self._sample_scalar(n) for n in nodes])

    def volume_form(self):
        node = expr.parse_expression(self.volume_density_text, dimension=self.dimension)
        density = self._sample_scalar(node)
        if density.min() <= 0.0:
            raise ConfigError(f"volume density must be positive (min {density.min():.3e})")
        return DifferentialForm.volume(density)

    def metric_field(self):
        if self.metric_text is None:
            return MetricField.euclidean(self.dimension, self.resolution)
        rows = expr.parse_matrix(self.metric_text, dimension=self.dimension)
        if len(rows) != self.dimension:
            raise ConfigError(
                f"metric is {len(rows)}x{len(rows)} in dimension {self.dimension}"
            )
        n = self.dimension
        mat = np.zeros((self.resolution,) * n + (n, n))
        for i in range(n):
            for j in range(n):
                mat[..., i, j] = self._sample_scalar(rows[i][j]).values
        asym = np.abs(mat - np.swapaxes(mat, -1, -2)).max()
        if asym > 1e-12:
            raise ConfigError(f"metric expression is not symmetric (defect {asym:.3e})")
        metric = MetricField(mat)
        metric.assert_spd()
        return metric

    def angle_function(self):
        offset = None
        if self.angle_offset_text is not None:
            node = expr.parse_expression(self.angle_offset_text, dimension=self.dimension)
            candidate = self._sample_scalar(node)
            if candidate.sup_norm() > 0.0:
                offset = candidate
        return AngleFunction(
            self.angle_periods, offset,
            dimension=self.dimension, resolution=self.resolution,
        )

    def echo(self):
        """Configuration echo for reports (resolved values, raw expressions)."""
        return {
            "dimension": self.dimension,
            "resolution": self.resolution,
            "vector_field": self.vector_field_text,
            "volume_density": self.volume_density_text,
            "metric": self.metric_text,
            "angle_periods": [float(v) for v in self.angle_periods],
            "angle_offset": self.angle_offset_text,
            "level": self.level,
            "options": {k: self.options[k] for k in sorted(self.options)},
        }


def _unquote(raw):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1].strip()
    return raw


def load_config(path, overrides=None):
    """Load and validate an experiment configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return _unquote(parser.get(section, key))
        return default

    try:
        dimension = int(get("experiment", "dimension", "2"))
        resolution = int(get("experiment", "resolution", "64"))
    except ValueError as exc:
        raise ConfigError(f"bad [experiment] entry: {exc}") from None
    overrides = overrides or {}
    if overrides.get("resolution"):
        resolution = int(overrides["resolution"])
    if dimension not in (2, 3):
        raise ConfigError(f"dimension must be 2 or 3, got {dimension}")
    if resolution < 8 or resolution % 2:
        raise ConfigError(f"resolution must be even and >= 8, got {resolution}")

    vector_field_text = get("fields", "vector_field")
    if vector_field_text is None:
        raise ConfigError("missing [fields] vector_field")
    volume_density_text = get("fields", "volume_density", "1")
    metric_text = get("fields", "metric")

    periods_text = get("angle", "periods")
    if periods_text is None:
        periods = np.zeros(dimension)
        periods[0] = 1.0
    else:
        nodes = expr.parse_vector(periods_text, dimension=dimension, periodic=False)
        values = []
        for node in nodes:
            if not _is_constant(node):
                raise ConfigError("angle periods must be numeric constants")
            values.append(float(expr.evaluate(node, (0.0,) * dimension)))
        periods = np.array(values)
        if periods.size != dimension:
            raise ConfigError("angle periods length mismatch")
    offset_text = get("angle", "offset")
    level = float(get("angle", "level", "0"))

    options = {}
    for key, cast in _OPTION_TYPES.items():
        raw = get("options", key)
        if raw is not None:
            try:
                options[key] = cast(float(raw)) if cast is int else cast(raw)
            except ValueError:
                raise ConfigError(f"bad option {key}={raw!r}") from None
    for key in ("truncation", "denominator", "tolerance"):
        if overrides.get(key) is not None:
            options[key] = _OPTION_TYPES[key](overrides[key])

    config = ExperimentConfig(
        dimension=dimension,
        resolution=resolution,
        vector_field_text=vector_field_text,
        volume_density_text=volume_density_text,
        metric_text=metric_text,
        angle_periods=periods,
        angle_offset_text=offset_text,
        level=level,
        options=options,
    )
    # parse-time validation of all expressions (raises on syntax/periodicity)
    expr.parse_vector(vector_field_text, dimension=dimension)
    expr.parse_expression(volume_density_text, dimension=dimension)
    if metric_text is not None:
        expr.parse_matrix(metric_text, dimension=dimension)
    if offset_text is not None:
        expr.parse_expression(offset_text, dimension=dimension)
    return config


def _is_constant(node):
    return next(expr._variables_in(node), None) is None
