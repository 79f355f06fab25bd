"""Sampled fields and coordinate differential forms on flat tori.

All data lives on the unit torus [0, 1)^n (n = 2 or 3), sampled on the
uniform tensor grid with nodes x_j = j/N.  Differentiation is spectral
(trigonometric interpolation on the periodic grid), so residuals for
band-limited data sit near machine precision rather than at grid order.

Instances are immutable after construction; every operation returns a
new object, which makes them safe to share across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DifferentialForm",
    "MetricField",
    "PeriodicInterpolator",
    "ResidualReport",
    "ScalarField",
    "VectorField",
    "grid_axes",
    "grid_points",
    "multi_indices",
    "permutation_sign",
    "residual_report",
]


def grid_axes(dimension, resolution):
    """Per-axis sample coordinates j/N, repeated for each axis."""
    axis = np.arange(resolution) / resolution
    return (axis,) * dimension


def grid_points(dimension, resolution):
    """Grid node coordinates as an array of shape (N, ..., N, n)."""
    mesh = np.meshgrid(*grid_axes(dimension, resolution), indexing="ij")
    return np.stack(mesh, axis=-1)


def multi_indices(dimension, degree):
    """Increasing multi-indices of length `degree`, lexicographically ordered."""
    return list(itertools.combinations(range(dimension), degree))


def permutation_sign(sequence):
    """Sign of the permutation sorting `sequence`; 0 if an entry repeats."""
    seq = list(sequence)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] == seq[j]:
                return 0
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class PeriodicInterpolator:
    """Evaluates the trigonometric interpolant of periodic grid data anywhere.

    Only Fourier modes above a relative magnitude floor are kept, so
    evaluation cost scales with the spectral support of the data (tiny for
    the band-limited fields this library works with).  The Nyquist mode of
    even grids is interpreted as a pure cosine, consistent with dropping
    its derivative in :meth:`ScalarField.derivative`.
    """

    def __init__(self, values, tol=1e-14):
        values = np.asarray(values, dtype=float)
        spectrum = np.fft.fftn(values) / values.size
        freqs = [np.fft.fftfreq(m, d=1.0 / m) for m in values.shape]
        mesh = np.meshgrid(*freqs, indexing="ij")
        floor = tol * max(float(np.abs(spectrum).max()), 1e-300)
        keep = np.abs(spectrum) > floor
        self.wavenumbers = np.stack([f[keep] for f in mesh], axis=-1)
        self.coefficients = spectrum[keep]
        self.grid_dimension = values.ndim

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        if self.grid_dimension == 1:
            flat = pts.reshape(-1, 1)
            out_shape = pts.shape
        else:
            if pts.shape[-1] != self.grid_dimension:
                raise ValueError(
                    f"points have {pts.shape[-1]} coordinates, "
                    f"grid is {self.grid_dimension}-dimensional"
                )
            flat = pts.reshape(-1, self.grid_dimension)
            out_shape = pts.shape[:-1]
        phases = flat @ self.wavenumbers.T
        vals = (np.exp(2j * np.pi * phases) @ self.coefficients).real
        return vals.reshape(out_shape)


class ScalarField:
    """Periodic real-valued function sampled on the uniform grid of [0, 1)^n.

    The resolution must be even (the Nyquist mode of spectral derivatives
    is dropped) and at least 8, and every sample must be finite.
    """

    def __init__(self, values):
        values = np.array(values, dtype=float)
        n = values.ndim
        if n not in (2, 3):
            raise ValueError(f"torus dimension must be 2 or 3, got {n}")
        resolution = values.shape[0]
        if any(s != resolution for s in values.shape):
            raise ValueError(f"grid must be cubical, got shape {values.shape}")
        if resolution < 8 or resolution % 2:
            raise ValueError(f"resolution must be even and >= 8, got {resolution}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite samples")
        values.flags.writeable = False
        self.values = values
        self.dimension = n
        self.resolution = resolution
        self._interp = None

    @classmethod
    def from_function(cls, dimension, resolution, fn):
        """Sample ``fn(x1, ..., xn)`` on the grid (fn must broadcast)."""
        axes = np.meshgrid(*grid_axes(dimension, resolution), indexing="ij")
        return cls(np.broadcast_to(fn(*axes), (resolution,) * dimension))

    @classmethod
    def constant(cls, dimension, resolution, value):
        return cls(np.full((resolution,) * dimension, float(value)))

    # -- arithmetic ------------------------------------------------------

    def _other_values(self, other):
        if isinstance(other, ScalarField):
            if other.dimension != self.dimension or other.resolution != self.resolution:
                raise ValueError("fields live on different grids")
            return other.values
        return float(other)

    def __add__(self, other):
        return ScalarField(self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.values - self._other_values(other))

    def __rsub__(self, other):
        return ScalarField(self._other_values(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.values * self._other_values(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.values / self._other_values(other))

    def __rtruediv__(self, other):
        return ScalarField(self._other_values(other) / self.values)

    def __neg__(self):
        return ScalarField(-self.values)

    # -- analysis --------------------------------------------------------

    def derivative(self, axis):
        """Spectral partial derivative along `axis` (Nyquist mode dropped)."""
        N = self.resolution
        wav = np.fft.fftfreq(N, d=1.0 / N)
        wav[N // 2] = 0.0
        shape = [1] * self.dimension
        shape[axis] = N
        mult = (2j * np.pi) * wav.reshape(shape)
        out = np.fft.ifft(np.fft.fft(self.values, axis=axis) * mult, axis=axis)
        return ScalarField(out.real)

    def evaluate(self, points):
        """Trigonometric interpolation at arbitrary points of shape (..., n)."""
        if self._interp is None:
            self._interp = PeriodicInterpolator(self.values)
        return self._interp(points)

    def resample(self, resolution):
        """Resample onto a finer or coarser even grid via the interpolant."""
        return ScalarField(self.evaluate(grid_points(self.dimension, resolution)))

    def mean(self):
        return float(self.values.mean())

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())

    def sup_norm(self):
        return float(np.abs(self.values).max())

    def l2_norm(self):
        return float(np.sqrt(np.mean(self.values**2)))

    def to_csv(self, path):
        """Write one row per grid point: linear index, coordinates, value."""
        pts = grid_points(self.dimension, self.resolution).reshape(-1, self.dimension)
        flat = self.values.reshape(-1)
        with open(path, "w", encoding="utf-8") as fh:
            coords = ["x", "y", "z"][: self.dimension]
            fh.write("index," + ",".join(coords) + ",value\n")
            for i in range(flat.size):
                cells = [str(i)] + [format(c, ".17g") for c in pts[i]] + [format(flat[i], ".17g")]
                fh.write(",".join(cells) + "\n")


class VectorField:
    """Vector field on the torus, one ScalarField per component."""

    def __init__(self, components):
        components = tuple(components)
        n = len(components)
        if n not in (2, 3):
            raise ValueError(f"need 2 or 3 components, got {n}")
        for c in components:
            if not isinstance(c, ScalarField):
                raise TypeError("components must be ScalarFields")
            if c.dimension != n or c.resolution != components[0].resolution:
                raise ValueError("component grids are inconsistent")
        self.components = components
        self.dimension = n
        self.resolution = components[0].resolution

    @classmethod
    def from_functions(cls, dimension, resolution, fns):
        return cls([ScalarField.from_function(dimension, resolution, f) for f in fns])

    @classmethod
    def constant(cls, dimension, resolution, vector):
        return cls([ScalarField.constant(dimension, resolution, v) for v in vector])

    def stack(self):
        """Component samples as one array of shape (N, ..., N, n)."""
        return np.stack([c.values for c in self.components], axis=-1)

    def evaluate(self, points):
        """Interpolated vector values, shape (..., n)."""
        return np.stack([c.evaluate(points) for c in self.components], axis=-1)

    def min_speed(self):
        """Minimum of |X| over the grid; positive iff the sampled field is non-singular."""
        speed2 = sum(c.values**2 for c in self.components)
        return float(np.sqrt(speed2.min()))

    def assert_nonsingular(self):
        m = self.min_speed()
        if m <= 0.0:
            raise ValueError("vector field vanishes on the grid")
        return m

    def scale(self, factor):
        """Pointwise rescaling by a positive scalar or ScalarField."""
        return VectorField([c * factor for c in self.components])

    def resample(self, resolution):
        return VectorField([c.resample(resolution) for c in self.components])


class MetricField:
    """Pointwise symmetric positive-definite matrix field g_ij(x)."""

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float)
        n = matrix.shape[-1]
        if matrix.shape[-2] != n or n not in (2, 3) or matrix.ndim != n + 2:
            raise ValueError(f"expected grid-shaped (..., {n}, {n}) matrix samples")
        if matrix.shape[:n] != (matrix.shape[0],) * n:
            raise ValueError("grid must be cubical")
        asym = np.abs(matrix - np.swapaxes(matrix, -1, -2)).max()
        if asym > 1e-12:
            raise ValueError(f"metric samples are not symmetric (defect {asym:.3e})")
        matrix = 0.5 * (matrix + np.swapaxes(matrix, -1, -2))
        matrix.flags.writeable = False
        self.matrix = matrix
        self.dimension = n
        self.resolution = matrix.shape[0]
        self._inv = None
        self._det = None

    @classmethod
    def euclidean(cls, dimension, resolution):
        eye = np.eye(dimension)
        shape = (resolution,) * dimension + (dimension, dimension)
        return cls(np.broadcast_to(eye, shape))

    @classmethod
    def from_entries(cls, dimension, resolution, entries):
        """Build from the n(n+1)/2 upper-triangle entries {(i, j): field}."""
        mat = np.zeros((resolution,) * dimension + (dimension, dimension))
        for (i, j), field in entries.items():
            vals = field.values if isinstance(field, ScalarField) else np.asarray(field, float)
            mat[..., i, j] = vals
            mat[..., j, i] = vals
        return cls(mat)

    def entry(self, i, j):
        return ScalarField(self.matrix[..., i, j])

    def det(self):
        if self._det is None:
            m = self.matrix
            if self.dimension == 2:
                d = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] ** 2
            else:
                d = (
                    m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] ** 2)
                    - m[..., 0, 1] * (m[..., 0, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 0, 2])
                    + m[..., 0, 2] * (m[..., 0, 1] * m[..., 1, 2] - m[..., 1, 1] * m[..., 0, 2])
                )
            d.flags.writeable = False
            self._det = d
        return self._det

    def assert_spd(self):
        """Raise naming a grid index if any sample fails Sylvester's criterion."""
        m = self.matrix
        leading = [m[..., 0, 0]]
        if self.dimension == 3:
            leading.append(m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] ** 2)
        leading.append(self.det())
        for minor in leading:
            worst = np.unravel_index(np.argmin(minor), minor.shape)
            if minor[worst] <= 0.0:
                raise ValueError(
                    f"metric is not positive definite at grid index {tuple(int(i) for i in worst)}"
                )

    def inverse(self):
        """Pointwise inverse matrices, shape (..., n, n)."""
        if self._inv is None:
            self.assert_spd()
            m = self.matrix
            d = self.det()
            if self.dimension == 2:
                inv = np.empty_like(m)
                inv[..., 0, 0] = m[..., 1, 1]
                inv[..., 1, 1] = m[..., 0, 0]
                inv[..., 0, 1] = -m[..., 0, 1]
                inv[..., 1, 0] = -m[..., 0, 1]
                inv = inv / d[..., None, None]
            else:
                inv = np.empty_like(m)
                for i in range(3):
                    for j in range(3):
                        r = [a for a in range(3) if a != i]
                        c = [a for a in range(3) if a != j]
                        minor = (
                            m[..., r[0], c[0]] * m[..., r[1], c[1]]
                            - m[..., r[0], c[1]] * m[..., r[1], c[0]]
                        )
                        inv[..., j, i] = (-1) ** (i + j) * minor
                inv = inv / d[..., None, None]
            inv.flags.writeable = False
            self._inv = inv
        return self._inv

    def sqrt_det(self):
        """Riemannian volume density as a ScalarField."""
        self.assert_spd()
        return ScalarField(np.sqrt(self.det()))

    def volume_form(self):
        """The Riemannian volume form sqrt(det g) dx^1 ∧ ... ∧ dx^n."""
        return DifferentialForm.volume(self.sqrt_det())

    def min_eigenvalue(self):
        flat = self.matrix.reshape(-1, self.dimension, self.dimension)
        return float(np.linalg.eigvalsh(flat)[:, 0].min())


class DifferentialForm:
    """Degree-k form as coefficients over increasing multi-indices.

    Represents sum_I a_I dx^I with one ScalarField per increasing index
    tuple I of length k; missing coefficients are stored as zeros.
    """

    def __init__(self, dimension, degree, coefficients, resolution=None):
        if dimension not in (2, 3):
            raise ValueError(f"torus dimension must be 2 or 3, got {dimension}")
        if not 0 <= degree <= dimension:
            raise ValueError(f"degree {degree} out of range for dimension {dimension}")
        coeffs = {}
        for key, field in coefficients.items():
            key = tuple(key)
            if list(key) != sorted(set(key)) or any(i < 0 or i >= dimension for i in key):
                raise ValueError(f"invalid multi-index {key}")
            if len(key) != degree:
                raise ValueError(f"multi-index {key} does not match degree {degree}")
            if not isinstance(field, ScalarField):
                field = ScalarField(field)
            coeffs[key] = field
        if resolution is None:
            if not coeffs:
                raise ValueError("resolution required for a form with no coefficients")
            resolution = next(iter(coeffs.values())).resolution
        for key, field in coeffs.items():
            if field.dimension != dimension or field.resolution != resolution:
                raise ValueError(f"coefficient {key} lives on the wrong grid")
        for key in multi_indices(dimension, degree):
            coeffs.setdefault(key, ScalarField.constant(dimension, resolution, 0.0))
        self.dimension = dimension
        self.degree = degree
        self.resolution = resolution
        self.coefficients = {key: coeffs[key] for key in multi_indices(dimension, degree)}

    @classmethod
    def zero(cls, dimension, degree, resolution):
        return cls(dimension, degree, {}, resolution=resolution)

    @classmethod
    def from_scalar(cls, field):
        """Wrap a ScalarField as a 0-form."""
        return cls(field.dimension, 0, {(): field})

    @classmethod
    def volume(cls, density):
        """Top-degree form density · dx^1 ∧ ... ∧ dx^n."""
        n = density.dimension
        return cls(n, n, {tuple(range(n)): density})

    def coefficient(self, index):
        return self.coefficients[tuple(index)]

    def is_volume_form(self):
        if self.degree != self.dimension:
            return False
        return self.coefficient(range(self.dimension)).min() > 0.0

    # -- arithmetic ------------------------------------------------------

    def _check_compatible(self, other):
        if (
            not isinstance(other, DifferentialForm)
            or other.dimension != self.dimension
            or other.degree != self.degree
            or other.resolution != self.resolution
        ):
            raise ValueError("forms are incompatible")

    def __add__(self, other):
        self._check_compatible(other)
        return DifferentialForm(
            self.dimension,
            self.degree,
            {k: a + other.coefficients[k] for k, a in self.coefficients.items()},
        )

    def __sub__(self, other):
        self._check_compatible(other)
        return DifferentialForm(
            self.dimension,
            self.degree,
            {k: a - other.coefficients[k] for k, a in self.coefficients.items()},
        )

    def __neg__(self):
        return DifferentialForm(
            self.dimension, self.degree, {k: -a for k, a in self.coefficients.items()}
        )

    def __mul__(self, factor):
        return DifferentialForm(
            self.dimension, self.degree, {k: a * factor for k, a in self.coefficients.items()}
        )

    __rmul__ = __mul__

    # -- norms -----------------------------------------------------------

    def sup_norm(self):
        return max(a.sup_norm() for a in self.coefficients.values())

    def l2_norm(self):
        return float(np.sqrt(sum(a.l2_norm() ** 2 for a in self.coefficients.values())))


@dataclass(frozen=True)
class ResidualReport:
    """Discrete L² and sup norms of a residual, with the grid resolution."""

    l2: float
    sup: float
    resolution: int

    def to_dict(self):
        return {"l2": self.l2, "sup": self.sup, "resolution": self.resolution}


def residual_report(form):
    """Norm report for a DifferentialForm or ScalarField residual."""
    if isinstance(form, ScalarField):
        return ResidualReport(form.l2_norm(), form.sup_norm(), form.resolution)
    return ResidualReport(form.l2_norm(), form.sup_norm(), form.resolution)
