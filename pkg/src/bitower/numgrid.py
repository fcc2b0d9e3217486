"""Uniform grids, finite differences, exact lattice shifts, quadrature and time steppers.

Array-level helpers (``derivative``, ``cumulative``, ``shift_array``) work on raw
numpy arrays whose leading dimensions are grid axes; trailing dimensions (for
example an ``N x N`` matrix) are carried along untouched.  The ``SampledField``
wrappers add grid bookkeeping on top of them.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import NonzeroMeanError, NumericFailure

PERIODIC = "periodic"
DECAYING = "decaying"
BOUNDARIES = (PERIODIC, DECAYING)


@dataclass(frozen=True)
class Axis:
    name: str
    origin: float
    step: float
    n: int
    boundary: str = DECAYING
    lattice: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"axis {self.name!r}: step must be positive, got {self.step}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"axis {self.name!r}: unknown boundary mode {self.boundary!r}")
        min_n = 3 if self.lattice else 5
        if self.n < min_n:
            raise ValueError(f"axis {self.name!r}: need at least {min_n} points, got {self.n}")

    @property
    def coords(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.n)

    @property
    def length(self) -> float:
        return self.step * (self.n if self.boundary == PERIODIC else self.n - 1)


@dataclass(frozen=True)
class Grid:
    axes: tuple[Axis, ...]

    def __post_init__(self):
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate axis names: {names}")

    @classmethod
    def uniform(cls, spec: dict[str, tuple[float, float, int]], boundary=DECAYING) -> "Grid":
        """Build from ``{name: (start, stop, n)}``; the stop point is included for decaying axes."""
        axes = []
        for name, (start, stop, n) in spec.items():
            if boundary == PERIODIC:
                step = (stop - start) / n
            else:
                step = (stop - start) / (n - 1)
            axes.append(Axis(name, start, step, n, boundary))
        return cls(tuple(axes))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def axis_index(self, axis: int | str) -> int:
        if isinstance(axis, str):
            for i, a in enumerate(self.axes):
                if a.name == axis:
                    return i
            raise ValueError(f"no axis named {axis!r}")
        if not 0 <= axis < self.ndim:
            raise IndexError(f"axis {axis} out of range for a {self.ndim}-D grid")
        return axis

    def __getitem__(self, axis: int | str) -> Axis:
        return self.axes[self.axis_index(axis)]

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(a.coords for a in self.axes), indexing="ij"))


@dataclass(frozen=True)
class SampledField:
    """Values of a real, complex or matrix-valued function on a ``Grid``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape[: self.grid.ndim] != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not start with grid shape {self.grid.shape}")
        extra = v.shape[self.grid.ndim:]
        if extra not in ((),) and not (len(extra) == 2 and extra[0] == extra[1]):
            raise ValueError(f"value arity {extra} is neither scalar nor square matrix")
        if not np.all(np.isfinite(v)):
            raise NumericFailure("sampled field contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def kind(self) -> str:
        if self.values.ndim > self.grid.ndim:
            return "matrix"
        return "complex" if np.iscomplexobj(self.values) else "real"

    @property
    def matrix_size(self) -> int | None:
        return self.values.shape[-1] if self.kind == "matrix" else None

    def with_values(self, values) -> "SampledField":
        return SampledField(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, other):
        return self.with_values(self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _vals(x):
    return x.values if isinstance(x, SampledField) else x


# -- finite-difference stencils ------------------------------------------------


def _solve_exact(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    n = len(rhs)
    a = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] / a[i][i] for i in range(n)]


@lru_cache(maxsize=None)
def stencil_weights(offsets: tuple[int, ...], order: int) -> tuple[Fraction, ...]:
    """Exact weights w with sum_j w_j f(x + o_j h) = h^order f^(order)(x) + O(h^(len - order))."""
    n = len(offsets)
    if order >= n:
        raise ValueError("stencil too small for the derivative order")
    vander = [[Fraction(o) ** i for o in offsets] for i in range(n)]
    rhs = [Fraction(0)] * n
    fact = 1
    for i in range(2, order + 1):
        fact *= i
    rhs[order] = Fraction(fact)
    return tuple(_solve_exact(vander, rhs))


def _central_halfwidth(order: int, accuracy: int) -> int:
    return (order + 1) // 2 - 1 + accuracy // 2


def _combine(arr, idx_of, offsets, weights, scale):
    """sum_j w_j (f[i + o_j] - f[i]) * scale; exact zero on constants."""
    base = idx_of(0)
    out = np.zeros_like(base, dtype=np.result_type(arr, float))
    for o, w in zip(offsets, weights):
        if o == 0 or w == 0:
            continue
        out = out + float(w) * (idx_of(o) - base)
    return out * scale


def derivative(values: np.ndarray, axis: int, h: float, boundary: str = DECAYING,
               order: int = 1, accuracy: int = 2) -> np.ndarray:
    """``order``-th derivative along ``axis`` with central stencils of the given accuracy.

    Decaying axes close with one-sided stencils of the same formal accuracy.
    """
    if accuracy not in (2, 4):
        raise ValueError("accuracy must be 2 or 4")
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    values = np.asarray(values)
    if not 0 <= axis < values.ndim:
        raise IndexError(f"axis {axis} out of range")
    arr = np.moveaxis(values, axis, 0)
    n = arr.shape[0]
    r = _central_halfwidth(order, accuracy)
    width = order + accuracy
    if n < max(2 * r + 1, width):
        raise ValueError(f"grid too small ({n} points) for order {order} accuracy {accuracy}")
    scale = 1.0 / h**order
    central = tuple(range(-r, r + 1))
    wc = stencil_weights(central, order)
    if boundary == PERIODIC:
        out = _combine(arr, lambda o: np.roll(arr, -o, axis=0), central, wc, scale)
        return np.moveaxis(out, 0, axis)
    out = np.empty_like(arr, dtype=np.result_type(arr, float))
    inner = slice(r, n - r)
    out[inner] = _combine(arr, lambda o: arr[r + o: n - r + o], central, wc, scale)
    for i in list(range(r)) + list(range(n - r, n)):
        if i < r:
            offs = tuple(range(-i, -i + width))
        else:
            offs = tuple(range(n - 1 - i - width + 1, n - i))
        w = stencil_weights(offs, order)
        out[i] = _combine(arr, lambda o, i=i: arr[i + o], offs, w, scale)
    return np.moveaxis(out, 0, axis)


def cumulative(values: np.ndarray, axis: int, h: float, boundary: str = DECAYING,
               tol: float = 1e-9) -> np.ndarray:
    """Trapezoidal running integral along ``axis``, zero at the first grid point."""
    values = np.asarray(values)
    if not 0 <= axis < values.ndim:
        raise IndexError(f"axis {axis} out of range")
    arr = np.moveaxis(values, axis, 0)
    if boundary == PERIODIC:
        mean = np.max(np.abs(np.mean(arr, axis=0))) if arr.size else 0.0
        if mean > tol:
            raise NonzeroMeanError(f"periodic primitive is multivalued: |mean| = {mean:.3e} > {tol:.1e}")
    out = np.zeros_like(arr, dtype=np.result_type(arr, float))
    out[1:] = np.cumsum(0.5 * h * (arr[1:] + arr[:-1]), axis=0)
    return np.moveaxis(out, 0, axis)


def trapezoid(values: np.ndarray, axis: int, h: float, boundary: str = DECAYING) -> np.ndarray:
    """Full-axis quadrature; periodic axes use the rectangle (= periodic trapezoid) rule."""
    arr = np.moveaxis(np.asarray(values), axis, 0)
    if boundary == PERIODIC:
        return h * np.sum(arr, axis=0)
    return h * (np.sum(arr, axis=0) - 0.5 * (arr[0] + arr[-1]))


def shift_array(values: np.ndarray, axis: int, offset: int, boundary: str = DECAYING) -> np.ndarray:
    """``out[k] = values[k + offset]``; periodic wraps, decaying repeats the edge value."""
    values = np.asarray(values)
    if not 0 <= axis < values.ndim:
        raise IndexError(f"axis {axis} out of range")
    if offset == 0:
        return values
    if boundary == PERIODIC:
        return np.roll(values, -offset, axis=axis)
    n = values.shape[axis]
    idx = np.clip(np.arange(n) + offset, 0, n - 1)
    return np.take(values, idx, axis=axis)


# -- SampledField wrappers -----------------------------------------------------


def fd_derivative(f: SampledField, axis: int | str, accuracy: int = 2, order: int = 1) -> SampledField:
    i = f.grid.axis_index(axis)
    ax = f.grid.axes[i]
    if ax.lattice:
        raise ValueError(f"axis {ax.name!r} is a lattice axis; use shift()")
    return f.with_values(derivative(f.values, i, ax.step, ax.boundary, order, accuracy))


def cumulative_integral(f: SampledField, axis: int | str, tol: float = 1e-9) -> SampledField:
    i = f.grid.axis_index(axis)
    ax = f.grid.axes[i]
    return f.with_values(cumulative(f.values, i, ax.step, ax.boundary, tol))


def integral(f: SampledField, axis: int | str) -> np.ndarray:
    i = f.grid.axis_index(axis)
    ax = f.grid.axes[i]
    return trapezoid(f.values, i, ax.step, ax.boundary)


def shift(f: SampledField, axis: int | str, offset: int) -> SampledField:
    i = f.grid.axis_index(axis)
    return f.with_values(shift_array(f.values, i, offset, f.grid.axes[i].boundary))


# -- time integrators ----------------------------------------------------------


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericFailure("non-finite values encountered during time stepping")


def rk4_step(state, rhs: Callable, dt: float):
    """One classical Runge-Kutta step for ``state' = rhs(state)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    k1 = rhs(state)
    k2 = rhs(state + 0.5 * dt * k1)
    k3 = rhs(state + 0.5 * dt * k2)
    k4 = rhs(state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(out)
    return out


def verlet_step(q, p, force: Callable, dt: float, f0=None):
    """Velocity-Verlet step.  Returns ``(q, p, force(q_new))`` so callers can reuse the force."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if f0 is None:
        f0 = force(q)
    p_half = p + 0.5 * dt * f0
    q_new = q + dt * p_half
    f1 = force(q_new)
    p_new = p_half + 0.5 * dt * f1
    _check_finite(q_new, p_new)
    return q_new, p_new, f1


def observed_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    slope, _ = np.polyfit(np.log(np.asarray(steps, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)


# -- CSV -----------------------------------------------------------------------


def _value_columns(f: SampledField) -> list[str]:
    if f.kind == "real":
        return ["value"]
    if f.kind == "complex":
        return ["value.re", "value.im"]
    n = f.matrix_size
    return [f"m[{i}][{j}].{part}" for i in range(n) for j in range(n) for part in ("re", "im")]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def field_to_csv(f: SampledField, out=None) -> str:
    """One row per grid point: coordinates, then value components (17 significant digits)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([a.name for a in f.grid.axes] + _value_columns(f))
    coords = [c.ravel() for c in f.grid.mesh()]
    flat = f.values.reshape(int(np.prod(f.grid.shape)), -1)
    for row in range(flat.shape[0]):
        vals = flat[row]
        if f.kind == "real":
            comps = [vals[0].real]
        else:
            comps = [c for v in vals for c in (v.real, v.imag)]
        w.writerow([fmt(c[row]) for c in coords] + [fmt(v) for v in comps])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
