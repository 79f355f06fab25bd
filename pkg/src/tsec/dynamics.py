"""Flow dynamics on flat tori: orbits, cross sections, return maps, suspensions.

A candidate cross section is always a level set of a circle-valued map
G(x) = m·x + q·h(x) mod 1 with integer class vector m, built from an
:class:`AngleFunction` F = c·x + h with rational periods c = m/q.  Along
any orbit transverse to ker dF the lifted value of G increases strictly,
which makes first-return detection a bracketing-plus-bisection problem on
a monotone scalar.

Orbit integration is classical fixed-step 4th-order Runge-Kutta with
off-grid field values supplied by trigonometric interpolation, matching
the spectral calculus.  All routines are deterministic for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .fields import (
    DifferentialForm,
    PeriodicInterpolator,
    ResidualReport,
    ScalarField,
    VectorField,
    grid_points,
)

__all__ = [
    "AngleFunction",
    "CrossSection",
    "PoincareData",
    "SectionExtractionError",
    "SuspensionFlow",
    "SuspensionModel",
    "Trajectory",
    "cross_section",
    "integrate_orbit",
    "orbit_equivalence_check",
    "poincare_map",
    "reparametrize_unit_return",
    "suspend",
    "suspension_from_return_data",
    "unimodular_completion",
]


class SectionExtractionError(RuntimeError):
    """Level-set extraction failed (non-graph geometry or broken closure)."""


def torus_distance(a, b):
    """Componentwise-wrapped sup distance between points of the unit torus."""
    d = np.abs(np.asarray(a, float) - np.asarray(b, float)) % 1.0
    d = np.minimum(d, 1.0 - d)
    return d.max(axis=-1)


class AngleFunction:
    """Circle-valued map F(x) = c·x + h(x) with period vector c and periodic h.

    The differential dF = sum_i c_i dx^i + dh is closed by construction; it
    is the closed 1-form whose kernel carries candidate cross sections.
    When c = m/q is rational the scaled map G = q·F mod 1 is a genuine
    circle-valued function on the torus and its level sets are closed.
    """

    def __init__(self, periods, offset=None, dimension=None, resolution=None):
        periods = np.asarray(periods, dtype=float).reshape(-1)
        if dimension is None:
            dimension = offset.dimension if offset is not None else periods.size
        if periods.size != dimension:
            raise ValueError("period vector length does not match dimension")
        if offset is not None and offset.dimension != dimension:
            raise ValueError("offset dimension mismatch")
        if resolution is None:
            resolution = offset.resolution if offset is not None else 64
        if offset is not None and offset.resolution != resolution:
            raise ValueError("offset resolution mismatch")
        self.periods = periods
        self.offset = offset
        self.dimension = int(dimension)
        self.resolution = int(resolution)
        self.numerators, self.denominator = _rational_class(periods)

    @classmethod
    def coordinate(cls, dimension, axis=0, resolution=64):
        """The coordinate angle F = x_axis."""
        periods = np.zeros(dimension)
        periods[axis] = 1.0
        return cls(periods, dimension=dimension, resolution=resolution)

    @classmethod
    def from_rational(cls, numerators, denominator, offset=None, dimension=None, resolution=None):
        numerators = np.asarray(numerators, dtype=int)
        return cls(
            numerators / float(denominator),
            offset=offset,
            dimension=dimension if dimension is not None else numerators.size,
            resolution=resolution,
        )

    @property
    def is_rational(self):
        return self.numerators is not None

    def differential(self, resolution=None):
        """dF as a DifferentialForm of degree 1."""
        res = resolution or self.resolution
        coeffs = {}
        for i in range(self.dimension):
            base = ScalarField.constant(self.dimension, res, self.periods[i])
            if self.offset is not None:
                h = self.offset if self.offset.resolution == res else self.offset.resample(res)
                base = base + h.derivative(i)
            coeffs[(i,)] = base
        return DifferentialForm(self.dimension, 1, coeffs, resolution=res)

    def pairing(self, X):
        """dF(X) as a ScalarField on X's grid."""
        fields = [X.components[i] * self.periods[i] for i in range(self.dimension)]
        total = fields[0]
        for f in fields[1:]:
            total = total + f
        if self.offset is not None:
            h = self.offset
            if h.resolution != X.resolution:
                h = h.resample(X.resolution)
            for i in range(self.dimension):
                total = total + h.derivative(i) * X.components[i]
        return total

    def margin(self, X):
        """min over the grid of dF(X); positive margin certifies transversality."""
        return self.pairing(X).min()

    def lift(self, points):
        """Real-valued lift c·x + h(x) at (lifted) points of shape (..., n)."""
        pts = np.asarray(points, dtype=float)
        val = pts @ self.periods
        if self.offset is not None:
            val = val + self.offset.evaluate(pts)
        return val


def _rational_class(periods, tol=1e-9, max_den=10**6):
    """Detect an exactly-rational period vector (m, q); None otherwise."""
    from fractions import Fraction

    fracs = []
    for c in periods:
        f = Fraction(float(c)).limit_denominator(max_den)
        if abs(float(f) - float(c)) > tol:
            return None, None
        fracs.append(f)
    q = 1
    for f in fracs:
        q = q * f.denominator // math.gcd(q, f.denominator)
    m = np.array([int(f * q) for f in fracs], dtype=int)
    if not m.any():
        return None, None
    return m, int(q)


# ---------------------------------------------------------------------------
# integer linear algebra for level-set coordinates
# ---------------------------------------------------------------------------


def _int_det(mat):
    m = [[int(v) for v in row] for row in mat]
    if len(m) == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def unimodular_completion(class_vector):
    """Integer matrix A with det A = 1 whose first row is the primitive vector.

    In the coordinates u = A x the circle map with class `class_vector`
    becomes u_1 (+ periodic terms), so its level sets are global graphs
    over the remaining coordinates.
    """
    p = [int(v) for v in np.asarray(class_vector, dtype=int)]
    if math.gcd(*[abs(v) for v in p]) != 1:
        raise ValueError(f"class vector {p} is not primitive")
    n = len(p)
    if n == 2:
        g, a, b = _extended_gcd(p[0], p[1])
        rows = [p, [-b, a]]
    else:
        g23 = math.gcd(p[1], p[2])
        if g23 == 0:
            rows = [p, [0, 1, 0], [0, 0, p[0]]]
        else:
            s, t = _extended_gcd(p[1], p[2])[1:]
            u, v = _extended_gcd(p[0], g23)[1:]
            q2, q3 = p[1] // g23, p[2] // g23
            rows = [p, [0, -t, s], [-v, u * q2, u * q3]]
    A = np.array(rows, dtype=int)
    det = _int_det(A)
    if det == -1:
        A[1] = -A[1]
        det = _int_det(A)
    if det != 1:
        raise AssertionError(f"unimodular completion failed for {p} (det {det})")
    return A


def _extended_gcd(a, b):
    """Return (g, x, y) with a·x + b·y = g = gcd(a, b)."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_x, x = x, old_x - quo * x
        old_y, y = y, old_y - quo * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


class CrossSection:
    """A compact level set {q·F = level mod 1} of a rational angle function.

    The mesh is stored in lifted coordinates (so tangent vectors can be
    computed spectrally) together with the integer unimodular change of
    coordinates that realizes the level set as a graph.  On T² the mesh is
    a closed polyline sampled at `resolution` parameters; on T³ it is a
    2-parameter grid of surface samples.
    """

    def __init__(self, angle, level, params, mesh_lifted, matrix, margin, components):
        self.angle = angle
        self.level = float(level)
        self.params = params
        self.mesh_lifted = mesh_lifted
        self.mesh = np.mod(mesh_lifted, 1.0)
        self.matrix = matrix                       # A, first row = primitive class
        self.inverse_matrix = np.round(np.linalg.inv(matrix)).astype(int)
        self.margin = float(margin)
        self.components = int(components)
        self.dimension = angle.dimension
        self.class_vector = np.asarray(angle.numerators, dtype=int)
        self.denominator = int(angle.denominator)

    def parameter_of(self, points):
        """Graph parameters of ambient points lying on the section."""
        u = np.asarray(points, float) @ self.matrix.T
        return np.mod(u[..., 1:], 1.0)

    def point_of(self, params):
        """Ambient (lifted) section points for graph parameters of shape (..., n-1)."""
        params = np.asarray(params, dtype=float)
        zeta = _solve_graph_height(self, params)
        u = np.concatenate([zeta[..., None], params], axis=-1)
        return u @ self.inverse_matrix.T.astype(float)

    def tangents(self):
        """Spectral parameter-derivatives of the lifted mesh, one per parameter.

        The lifted mesh is B(ζ(t), t), i.e. a linear drift B[:, a+1] per
        parameter plus a periodic part, so differentiating the periodic
        part spectrally and adding the drift back is exact for smooth ζ.
        """
        mesh = self.mesh_lifted
        Binv = self.inverse_matrix.astype(float)
        n_params = mesh.ndim - 1
        shape = mesh.shape[:-1]
        axes_coords = np.meshgrid(*[np.arange(m) / m for m in shape], indexing="ij")
        periodic = mesh - sum(
            np.multiply.outer(axes_coords[a], Binv[:, a + 1]) for a in range(n_params)
        )
        tangents = []
        for axis in range(n_params):
            deriv = _spectral_derivative_grid(periodic, axis)
            tangents.append(deriv + Binv[:, axis + 1])
        return tangents

    def to_csv(self, path):
        params = self.params
        mesh = self.mesh
        n = self.dimension
        coords = ["x", "y", "z"][:n]
        with open(path, "w", encoding="utf-8") as fh:
            if n == 2:
                fh.write("t," + ",".join(coords) + "\n")
                for t, p in zip(params, mesh):
                    fh.write(",".join(format(v, ".17g") for v in (t, *p)) + "\n")
            else:
                fh.write("t1,t2," + ",".join(coords) + "\n")
                flat_p = params.reshape(-1, 2)
                flat_m = mesh.reshape(-1, n)
                for t, p in zip(flat_p, flat_m):
                    fh.write(",".join(format(v, ".17g") for v in (*t, *p)) + "\n")


def _spectral_derivative_grid(values, axis):
    """Spectral derivative of periodic samples along one axis of a (..., n) array."""
    m = values.shape[axis]
    wav = np.fft.fftfreq(m, d=1.0 / m)
    if m % 2 == 0:
        wav[m // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = m
    mult = (2j * np.pi) * wav.reshape(shape)
    return np.fft.ifft(np.fft.fft(values, axis=axis) * mult, axis=axis).real


def _solve_graph_height(section, params):
    """Height u1 = ζ(t) of the level-set graph at arbitrary parameters."""
    angle = section.angle
    g = section.components
    base = section.level / g if g > 1 else section.level
    if angle.offset is None:
        return np.full(params.shape[:-1], base)
    return _newton_graph(
        angle.offset,
        section.denominator / g,
        base,
        section.inverse_matrix.astype(float),
        params,
    )


def _newton_graph(h_field, scale, base, Binv, params):
    """Solve ζ + scale·h(B(ζ, t)) = base for ζ, vectorized over parameters t."""
    grads = [h_field.derivative(i) for i in range(h_field.dimension)]
    col0 = Binv[:, 0]
    zeta = np.full(params.shape[:-1], float(base))
    for _ in range(60):
        u = np.concatenate([zeta[..., None], params], axis=-1)
        x = u @ Binv.T
        f = zeta + scale * h_field.evaluate(x) - base
        if np.abs(f).max() < 1e-13:
            break
        slope = 1.0 + scale * sum(
            grads[i].evaluate(x) * col0[i] for i in range(h_field.dimension)
        )
        if slope.min() <= 0.0:
            raise SectionExtractionError(
                "level set is not a graph over the section coordinates "
                f"(min slope {slope.min():.3e})"
            )
        zeta = zeta - f / slope
    else:
        raise SectionExtractionError("graph height iteration did not converge")
    return zeta


def cross_section(angle, level=0.0, resolution=256, X=None):
    """Extract the level set {q·(c·x + h) = level mod 1} as a CrossSection.

    The integer class vector is reduced to its primitive part; the gcd is
    reported as the number of connected components (the mesh covers the
    component through level/gcd).  If `X` is given the transversality
    margin min dF(X) is computed and required to be positive.
    """
    if not angle.is_rational:
        raise ValueError("cross sections require an angle function with rational periods")
    m = angle.numerators
    g = int(math.gcd(*[abs(int(v)) for v in m])) if angle.dimension > 1 else int(abs(m[0]))
    primitive = (m // g).astype(int)
    A = unimodular_completion(primitive)
    n = angle.dimension
    if n == 2:
        params = (np.arange(resolution) / resolution)[:, None]
    else:
        axis = np.arange(resolution) / resolution
        t1, t2 = np.meshgrid(axis, axis, indexing="ij")
        params = np.stack([t1, t2], axis=-1)
    margin = angle.margin(X) if X is not None else float("nan")
    if X is not None and margin <= 0.0:
        raise ValueError(f"section candidate is not transverse (margin {margin:.3e})")
    section = CrossSection.__new__(CrossSection)
    section.angle = angle
    section.level = float(level)
    section.matrix = A
    section.inverse_matrix = np.round(np.linalg.inv(A)).astype(int)
    section.margin = float(margin)
    section.components = g
    section.dimension = n
    section.class_vector = np.asarray(m, dtype=int)
    section.denominator = int(angle.denominator)
    section.params = params[..., 0] if n == 2 else params
    zeta = _solve_graph_height(section, params)
    u = np.concatenate([zeta[..., None], params], axis=-1)
    section.mesh_lifted = u @ section.inverse_matrix.T.astype(float)
    section.mesh = np.mod(section.mesh_lifted, 1.0)
    # closure diagnostic: the scaled angle must sit on the level at every mesh node
    scaled = section.denominator * angle.lift(section.mesh_lifted)
    defect = np.abs((scaled - level + 0.5) % 1.0 - 0.5).max()
    if defect > 1e-9:
        raise SectionExtractionError(f"mesh does not close on the level set (defect {defect:.3e})")
    return section


# ---------------------------------------------------------------------------
# orbit integration
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Fixed-step orbit samples; points are reduced mod 1, times are absolute."""

    times: np.ndarray
    points: np.ndarray
    completed: bool

    def to_csv(self, path):
        n = self.points.shape[-1]
        coords = ["x", "y", "z"][:n]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t," + ",".join(coords) + "\n")
            for t, p in zip(self.times, self.points):
                fh.write(",".join(format(v, ".17g") for v in (t, *p)) + "\n")


def _rk4_step(rhs, x, dt):
    """One classical Runge-Kutta step; dt may be scalar or per-row (k, 1)."""
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dt * k1)
    k3 = rhs(x + 0.5 * dt * k2)
    k4 = rhs(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_orbit(X, start, duration, dt):
    """Integrate the flow of X from `start` for `duration` with fixed step dt.

    Returns a Trajectory with points reduced mod 1.  If the state stops
    being finite the integration aborts and `completed` is False.
    """
    if dt <= 0:
        raise ValueError("step size must be positive")
    steps = int(round(duration / dt))
    rhs = X.evaluate
    x = np.asarray(start, dtype=float).reshape(1, X.dimension)
    times = [0.0]
    points = [x[0] % 1.0]
    completed = True
    for k in range(steps):
        x = _rk4_step(rhs, x, dt)
        if not np.all(np.isfinite(x)):
            completed = False
            break
        times.append((k + 1) * dt)
        points.append(x[0] % 1.0)
    return Trajectory(np.array(times), np.array(points), completed)


# ---------------------------------------------------------------------------
# first-return machinery
# ---------------------------------------------------------------------------


def _lifted_angle_value(section, points):
    """Lift of the scaled circle map G = q·F along lifted coordinates."""
    pts = np.asarray(points, dtype=float)
    val = pts @ section.class_vector.astype(float)
    if section.angle.offset is not None:
        val = val + section.denominator * section.angle.offset.evaluate(pts)
    return val


def _first_return_batch(X, section, starts, dt, event_tol=1e-12, max_time=None):
    """First-return points/times for a batch of lifted starting points.

    Brackets the unit increase of the lifted circle map at integrator
    steps, then bisects the step size to |ΔG − 1| < event_tol.  Returns
    (return_points, times, steps, refinement_iterations, failed_mask).
    """
    rhs = X.evaluate
    x = np.array(starts, dtype=float)
    npts = x.shape[0]
    g0 = _lifted_angle_value(section, x)
    target = g0 + 1.0
    q_margin = section.denominator * section.margin
    if max_time is None:
        max_time = 4.0 / q_margin + 16.0 * dt
    bracket_x = np.zeros_like(x)
    bracket_t = np.zeros(npts)
    done = np.zeros(npts, dtype=bool)
    t = 0.0
    steps = 0
    while not done.all() and t < max_time:
        idx = np.flatnonzero(~done)
        xa = x[idx]
        xn = _rk4_step(rhs, xa, dt)
        crossed = _lifted_angle_value(section, xn) >= target[idx]
        hit = idx[crossed]
        bracket_x[hit] = xa[crossed]
        bracket_t[hit] = t
        done[hit] = True
        keep = idx[~crossed]
        x[keep] = xn[~crossed]
        t += dt
        steps += 1
    failed = ~done
    ret = np.array(x)
    tau = np.full(npts, np.nan)
    refinements = 0
    if done.any():
        idx = np.flatnonzero(done)
        xb = bracket_x[idx]
        tgt = target[idx]
        lo = np.zeros(idx.size)
        hi = np.full(idx.size, dt)
        xm = xb
        for it in range(90):
            mid = 0.5 * (lo + hi)
            xm = _rk4_step(rhs, xb, mid[:, None])
            gm = _lifted_angle_value(section, xm)
            err = np.abs(gm - tgt)
            if err.max() < event_tol:
                refinements = it + 1
                break
            below = gm < tgt
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        else:
            refinements = 90
        ret[idx] = xm
        tau[idx] = bracket_t[idx] + mid
    return ret, tau, steps, refinements, failed


@dataclass
class PoincareData:
    """Sampled first-return map and time over a section parameter grid."""

    section: CrossSection
    params: np.ndarray
    points: np.ndarray
    return_points: np.ndarray
    return_params: np.ndarray
    return_times: np.ndarray
    steps: int
    refinements: int
    failed: np.ndarray

    def to_csv(self, path):
        n = self.section.dimension
        n_par = 1 if n == 2 else 2
        par = self.params.reshape(-1, n_par)
        rp = self.return_params.reshape(-1, n_par)
        pts = self.return_points.reshape(-1, n)
        tau = self.return_times.reshape(-1)
        with open(path, "w", encoding="utf-8") as fh:
            par_names = ["t"] if n_par == 1 else ["t1", "t2"]
            ret_names = [f"P_{p}" for p in par_names]
            coords = ["Px", "Py", "Pz"][:n]
            fh.write(",".join(par_names + ret_names + coords + ["tau"]) + "\n")
            for i in range(par.shape[0]):
                row = list(par[i]) + list(rp[i]) + list(pts[i]) + [tau[i]]
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def poincare_map(X, angle, level=0.0, section_resolution=256, dt=1e-3,
                 event_tol=1e-12, max_time=None):
    """Sample the first-return map P and time τ of the level-set section.

    Requires a positive transversality margin min dF(X); each section
    sample is integrated until the lifted circle value gains one full
    period, with the crossing refined by bisection.
    """
    margin = angle.margin(X)
    if margin <= 0.0:
        raise ValueError(f"angle function is not transverse to the flow (margin {margin:.3e})")
    section = cross_section(angle, level, section_resolution, X=X)
    n = X.dimension
    starts = section.mesh_lifted.reshape(-1, n)
    ret, tau, steps, refinements, failed = _first_return_batch(
        X, section, starts, dt, event_tol=event_tol, max_time=max_time
    )
    ret_mod = np.mod(ret, 1.0)
    ret_params = section.parameter_of(ret_mod)
    shape = section.mesh_lifted.shape[:-1]
    n_par = 1 if n == 2 else 2
    return PoincareData(
        section=section,
        params=section.params.reshape(shape + (() if n == 2 else (2,))) if n == 3 else section.params,
        points=section.mesh.reshape(shape + (n,)),
        return_points=ret_mod.reshape(shape + (n,)),
        return_params=ret_params.reshape(shape + ((n_par,) if n == 3 else ())) if n == 3 else ret_params.reshape(shape),
        return_times=tau.reshape(shape),
        steps=steps,
        refinements=refinements,
        failed=failed.reshape(shape),
    )


def reparametrize_unit_return(X, angle):
    """Rescale X to X̃ = X / dF(X), making the return time equal F's period.

    The positive factor u = 1/dF(X) preserves orbits; afterwards
    dF(X̃) ≡ 1 to round-off.
    """
    margin = angle.margin(X)
    if margin <= 0.0:
        raise ValueError(f"angle function is not transverse to the flow (margin {margin:.3e})")
    rate = angle.pairing(X)
    return VectorField([c / rate for c in X.components])


# ---------------------------------------------------------------------------
# suspensions
# ---------------------------------------------------------------------------


class SuspensionModel:
    """Quotient model (Σ, f, τ): base map samples and positive roof samples.

    The base is the section parameter torus [0,1)^d (d = 1 or 2) on a
    uniform grid; `map_values` holds f in base coordinates, `roof_values`
    the return time.  Gluing convention: (ξ, τ(ξ)) ~ (f(ξ), 0).
    """

    def __init__(self, map_values, roof_values):
        roof = np.asarray(roof_values, dtype=float)
        fvals = np.asarray(map_values, dtype=float)
        d = roof.ndim
        if d not in (1, 2):
            raise ValueError("base must be 1- or 2-dimensional")
        if d == 1 and fvals.shape != roof.shape:
            raise ValueError("map and roof grids differ")
        if d == 2 and fvals.shape != roof.shape + (2,):
            raise ValueError("map and roof grids differ")
        if roof.min() <= 0.0:
            raise ValueError(f"roof function must be positive (min {roof.min():.3e})")
        self.base_dimension = d
        self.shape = roof.shape
        self.roof_values = roof
        if d == 1:
            grid = np.arange(roof.size) / roof.size
            disp = np.mod(fvals - grid + 0.5, 1.0) - 0.5
            self.displacement = disp[..., None]
        else:
            grid = np.stack(
                np.meshgrid(*[np.arange(m) / m for m in roof.shape], indexing="ij"), axis=-1
            )
            self.displacement = np.mod(fvals - grid + 0.5, 1.0) - 0.5
        self._roof_interp = PeriodicInterpolator(roof)
        self._disp_interp = [
            PeriodicInterpolator(self.displacement[..., i]) for i in range(self.displacement.shape[-1])
        ]
        self.invertibility_defect = self._check_invertible()

    def _check_invertible(self):
        if self.base_dimension == 1:
            grid = np.arange(self.shape[0]) / self.shape[0]
            lift = grid + self.displacement[:, 0]
            diffs = np.diff(np.concatenate([lift, [lift[0] + 1.0]]))
            if diffs.min() <= 0.0:
                raise ValueError("base map samples are not invertible (lift not increasing)")
            # compose with the numerically inverted map
            fine = np.arange(8 * self.shape[0]) / (8 * self.shape[0])
            flift = fine + self._disp_interp[0](fine)
            order = np.argsort(flift % 1.0)
            inv = np.interp(
                self.map_point(grid), (flift % 1.0)[order], fine[order], period=1.0
            )
            return float(torus_distance(inv[:, None], grid[:, None]).max())
        # 2-d base: positive Jacobian determinant of the displacement lift
        jac = np.zeros(self.shape + (2, 2))
        for i in range(2):
            for j in range(2):
                jac[..., i, j] = _spectral_derivative_grid(self.displacement[..., i], j)
            jac[..., i, i] += 1.0
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        if det.min() <= 0.0:
            raise ValueError("base map samples are not invertible (Jacobian sign change)")
        return 0.0

    def map_point(self, params):
        params = np.asarray(params, dtype=float)
        if self.base_dimension == 1:
            return np.mod(params + self._disp_interp[0](params), 1.0)
        disp = np.stack([f(params) for f in self._disp_interp], axis=-1)
        return np.mod(params + disp, 1.0)

    def roof(self, params):
        return self._roof_interp(np.asarray(params, dtype=float))


def suspension_from_return_data(data):
    """Build the SuspensionModel (Σ, P, τ) from sampled return data."""
    return SuspensionModel(data.return_params, data.return_times)


class SuspensionFlow:
    """Unit-vertical-speed sampler of the suspension of (Σ, f, τ).

    States are pairs (ξ, s) with 0 ≤ s < τ(ξ); advancing by Δt applies the
    gluing (ξ, τ(ξ)) → (f(ξ), 0) exactly at each roof crossing, so roof
    events carry no integration error.
    """

    def __init__(self, model):
        self.model = model

    def advance(self, params, heights, duration):
        params = np.array(np.atleast_1d(np.asarray(params, dtype=float)))
        if self.model.base_dimension == 2 and params.ndim == 1:
            params = params[None, :]
        heights = np.array(np.atleast_1d(np.asarray(heights, dtype=float)))
        remaining = np.full(heights.shape, float(duration))
        for _ in range(1000000):
            roof = self.model.roof(params)
            to_roof = roof - heights
            cross = remaining >= to_roof
            if not cross.any():
                break
            heights = np.where(cross, 0.0, heights)
            remaining = np.where(cross, remaining - to_roof, remaining)
            new_params = self.model.map_point(params)
            if self.model.base_dimension == 1:
                params = np.where(cross, new_params, params)
            else:
                params = np.where(cross[..., None], new_params, params)
        heights = heights + remaining
        return params, heights

    def section_hits(self, params, count):
        """Times and base points of the first `count` roof crossings from (ξ, 0)."""
        params = np.asarray(params, dtype=float)
        times = []
        hits = []
        t = np.zeros(params.shape if self.model.base_dimension == 1 else params.shape[:-1])
        current = np.array(params)
        for _ in range(count):
            t = t + self.model.roof(current)
            current = self.model.map_point(current)
            times.append(np.array(t))
            hits.append(np.array(current))
        return np.array(times), np.array(hits)


def suspend(model):
    """Sampler for the suspension flow of the model (validated at construction)."""
    return SuspensionFlow(model)


def orbit_equivalence_check(X, angle, model, samples=100, starts=8, level=0.0,
                            dt=1e-3, event_tol=1e-12, seed=0):
    """Compare section-hit sequences of the real flow against the suspension.

    Random section parameters are iterated `samples` returns through both
    the event-integrated flow and the suspension sampler; the report's sup
    is the largest parameter deviation (wrapped distance) observed.
    """
    rng = np.random.default_rng(seed)
    n = X.dimension
    section = cross_section(angle, level, max(64, model.shape[0]), X=X)
    if n == 2:
        params = rng.random(starts)[:, None]
    else:
        params = rng.random((starts, 2))
    points = section.point_of(params)
    _, model_hits = suspend(model).section_hits(
        params[:, 0] if n == 2 else params, samples
    )
    worst = 0.0
    total = 0.0
    count = 0
    current = np.array(points)
    for k in range(samples):
        current, _, _, _, failed = _first_return_batch(
            X, section, current, dt, event_tol=event_tol
        )
        if failed.any():
            raise RuntimeError("first-return integration failed during equivalence check")
        real = section.parameter_of(np.mod(current, 1.0))
        model_k = model_hits[k]
        if n == 2:
            dev = torus_distance(real, model_k[:, None])
        else:
            dev = torus_distance(real, model_k)
        worst = max(worst, float(dev.max()))
        total += float((dev**2).sum())
        count += dev.size
    return ResidualReport(l2=math.sqrt(total / count), sup=worst, resolution=samples)
