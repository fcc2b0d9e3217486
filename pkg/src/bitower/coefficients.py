"""Pluggable coefficient algebras for graded elements.

Every algebra exposes ``add``, ``sub``, ``neg``, ``mul``, ``scale``, ``zero``, ``one``,
``norm`` (sup norm) and ``is_zero`` (exact), plus a ``tag`` used to refuse mixing.
Matrix-valued algebras multiply by matrix product, so a "matrix of forms" is simply a
form with matrix coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from . import numgrid
from .errors import DerivativeUnavailable


class CoefficientAlgebra:
    tag: str = "abstract"

    def add(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        return self.scale(-1, a)

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        raise NotImplementedError

    def scale(self, c, a):
        raise NotImplementedError

    def zero(self):
        raise NotImplementedError

    def one(self):
        raise NotImplementedError

    def norm(self, a) -> float:
        raise NotImplementedError

    def is_zero(self, a) -> bool:
        return self.norm(a) == 0.0

    def __eq__(self, other):
        return isinstance(other, CoefficientAlgebra) and self.tag == other.tag

    def __hash__(self):
        return hash(self.tag)


# -- sampled arrays -------------------------------------------------------------


class ArrayAlgebra(CoefficientAlgebra):
    """Values on a grid of ``shape``; scalar (``n=None``) or ``n x n`` matrices per point."""

    def __init__(self, shape: tuple[int, ...], n: int | None = None, dtype=complex):
        self.shape = tuple(shape)
        self.n = n
        self.dtype = np.dtype(dtype)
        self.tag = f"array{self.shape}" + (f"x{n}" if n else "")

    @property
    def value_shape(self):
        return self.shape + ((self.n, self.n) if self.n else ())

    def coerce(self, a) -> np.ndarray:
        a = np.asarray(a)
        if a.shape != self.value_shape:
            a = np.broadcast_to(a, self.value_shape)
        return a

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a @ b if self.n else a * b

    def scale(self, c, a):
        return c * a

    def zero(self):
        return np.zeros(self.value_shape, self.dtype)

    def one(self):
        if self.n:
            return np.broadcast_to(np.eye(self.n, dtype=self.dtype), self.value_shape).copy()
        return np.ones(self.shape, self.dtype)

    def norm(self, a) -> float:
        a = np.asarray(a)
        return float(np.max(np.abs(a))) if a.size else 0.0

    def is_zero(self, a) -> bool:
        return not np.any(a)

    def derivation(self, axis: int, h: float, boundary: str = numgrid.DECAYING,
                   accuracy: int = 2, scale: complex = 1.0) -> Callable:
        """Finite-difference partial derivative (times ``scale``) along a grid axis."""
        def D(a):
            out = numgrid.derivative(np.asarray(a), axis, h, boundary, 1, accuracy)
            return out if scale == 1.0 else scale * out
        return D


# -- polynomials in one variable (exact derivations) ----------------------------


class PolynomialAlgebra(CoefficientAlgebra):
    """Real polynomials in x; derivations act exactly via coefficient arithmetic."""

    tag = "poly"

    def add(self, a, b):
        return a + b

    def mul(self, a, b):
        return a * b

    def scale(self, c, a):
        return c * a

    def zero(self):
        return Polynomial([0.0])

    def one(self):
        return Polynomial([1.0])

    @staticmethod
    def _coef(a) -> np.ndarray:
        return a.coef if isinstance(a, Polynomial) else np.atleast_1d(np.asarray(a, float))

    def norm(self, a) -> float:
        c = self._coef(a)
        return float(np.max(np.abs(c))) if c.size else 0.0

    def is_zero(self, a) -> bool:
        return not np.any(self._coef(a))


# -- shift-operator polynomials ------------------------------------------------


@dataclass(frozen=True)
class ShiftPoly:
    """Finite sum ``sum_n f_n S^n`` with coefficient arrays acted on by lattice shifts."""

    terms: dict = field(default_factory=dict)

    def coeff(self, n: int, algebra: "ShiftAlgebra"):
        return self.terms.get(n, algebra.coeff_zero())


class ShiftAlgebra(CoefficientAlgebra):
    """Operator-valued coefficients with ``S f_k = f_{k+1} S``.

    ``k_axis`` is the lattice axis of the coefficient arrays.  In periodic mode the
    algebra is exactly associative and ``S S^-1 = 1``; in decaying mode shifts clamp
    at the window edges (constant ghost values), which breaks both at the edges.
    """

    def __init__(self, shape: tuple[int, ...], k_axis: int, boundary: str = numgrid.PERIODIC,
                 n: int | None = None, dtype=float, trim: int = 0):
        self.shape = tuple(shape)
        self.k_axis = k_axis
        self.boundary = boundary
        self.n = n
        self.dtype = np.dtype(dtype)
        # norms skip ``trim`` points at both ends of every continuous axis, where
        # one-sided stencils of nested finite differences concentrate their error
        self.trim = trim
        self.tag = f"shift{self.shape}k{k_axis}{boundary}" + (f"x{n}" if n else "")

    @property
    def value_shape(self):
        return self.shape + ((self.n, self.n) if self.n else ())

    def coeff_zero(self):
        return np.zeros(self.value_shape, self.dtype)

    def shift(self, a, off: int):
        return numgrid.shift_array(a, self.k_axis, off, self.boundary)

    def make(self, terms: dict) -> ShiftPoly:
        return ShiftPoly({p: np.asarray(c) for p, c in terms.items() if np.any(c)})

    def function(self, values) -> ShiftPoly:
        """The multiplication operator by a lattice function (power 0)."""
        return self.make({0: np.asarray(values, self.dtype)})

    def monomial(self, values, power: int) -> ShiftPoly:
        return self.make({power: np.asarray(values, self.dtype)})

    def add(self, a, b):
        out = dict(a.terms)
        for p, c in b.terms.items():
            out[p] = out[p] + c if p in out else c
        return self.make(out)

    def neg(self, a):
        return ShiftPoly({p: -c for p, c in a.terms.items()})

    def scale(self, c, a):
        return self.make({p: c * v for p, v in a.terms.items()})

    def _cmul(self, f, g):
        return f @ g if self.n else f * g

    def mul(self, a, b):
        out: dict = {}
        for pa, fa in a.terms.items():
            for pb, gb in b.terms.items():
                t = self._cmul(fa, self.shift(gb, pa))
                p = pa + pb
                out[p] = out[p] + t if p in out else t
        return self.make(out)

    def zero(self):
        return ShiftPoly({})

    def one(self):
        if self.n:
            return self.function(np.broadcast_to(np.eye(self.n, dtype=self.dtype), self.value_shape).copy())
        return self.function(np.ones(self.shape, self.dtype))

    def _interior(self, c):
        if not self.trim:
            return c
        idx = [slice(None)] * c.ndim
        for ax in range(len(self.shape)):
            if ax != self.k_axis:
                idx[ax] = slice(self.trim, self.shape[ax] - self.trim)
        return c[tuple(idx)]

    def norm(self, a) -> float:
        return max((float(np.max(np.abs(self._interior(c)))) for c in a.terms.values()), default=0.0)

    def is_zero(self, a) -> bool:
        return not any(np.any(c) for c in a.terms.values())

    # derivations
    def ad_shift(self, power: int) -> Callable:
        """Derivation f -> [S^power, f] for power = +1 or -1."""
        if power not in (1, -1):
            raise ValueError("only [S, .] and [S^-1, .] are provided")

        def ad(a: ShiftPoly) -> ShiftPoly:
            return self.make({p + power: self.shift(c, power) - c for p, c in a.terms.items()})
        return ad

    def partial(self, axis: int, h: float, boundary: str = numgrid.DECAYING,
                accuracy: int = 2, scale: float = 1.0) -> Callable:
        """Coefficient-wise finite-difference derivative along a continuous axis."""
        if axis == self.k_axis:
            raise ValueError("the lattice axis has no partial derivative")

        def D(a: ShiftPoly) -> ShiftPoly:
            return self.make({p: scale * numgrid.derivative(c, axis, h, boundary, 1, accuracy)
                              for p, c in a.terms.items()})
        return D


# -- jets: values with optionally known first derivatives ----------------------


@dataclass(frozen=True)
class Jet:
    """A value together with those first partial derivatives that are known exactly."""

    value: np.ndarray
    derivs: dict = field(default_factory=dict)


class JetAlgebra(CoefficientAlgebra):
    """Sampled values on a slice, carrying exact first derivatives when available.

    Products keep a derivative only when both factors know it (product rule).  A
    derivation along an axis that a jet does not know falls back to finite
    differences if the axis is sampled in the slice (``fd_axes``), and raises
    :class:`DerivativeUnavailable` otherwise.
    """

    def __init__(self, shape: tuple[int, ...], n: int | None, fd_axes: dict[str, tuple],
                 axes: tuple[str, ...], dtype=complex):
        self.shape = tuple(shape)
        self.n = n
        self.fd_axes = dict(fd_axes)   # name -> (axis index, step, boundary)
        self.axes = tuple(axes)
        self.dtype = np.dtype(dtype)
        self.tag = f"jet{self.shape}" + (f"x{n}" if n else "") + ",".join(self.axes)

    @property
    def value_shape(self):
        return self.shape + ((self.n, self.n) if self.n else ())

    def const(self, value) -> Jet:
        v = np.broadcast_to(np.asarray(value, self.dtype), self.value_shape).copy()
        z = np.zeros(self.value_shape, self.dtype)
        return Jet(v, {a: z for a in self.axes})

    def _m(self, a, b):
        return a @ b if self.n else a * b

    def add(self, a: Jet, b: Jet) -> Jet:
        keys = a.derivs.keys() & b.derivs.keys()
        return Jet(a.value + b.value, {k: a.derivs[k] + b.derivs[k] for k in keys})

    def neg(self, a: Jet) -> Jet:
        return Jet(-a.value, {k: -v for k, v in a.derivs.items()})

    def scale(self, c, a: Jet) -> Jet:
        return Jet(c * a.value, {k: c * v for k, v in a.derivs.items()})

    def mul(self, a: Jet, b: Jet) -> Jet:
        keys = a.derivs.keys() & b.derivs.keys()
        return Jet(self._m(a.value, b.value),
                   {k: self._m(a.derivs[k], b.value) + self._m(a.value, b.derivs[k]) for k in keys})

    def zero(self) -> Jet:
        return self.const(0)

    def one(self) -> Jet:
        return self.const(np.eye(self.n) if self.n else 1)

    def norm(self, a: Jet) -> float:
        return float(np.max(np.abs(a.value))) if a.value.size else 0.0

    def is_zero(self, a: Jet) -> bool:
        return not np.any(a.value) and not any(np.any(v) for v in a.derivs.values())

    def derivation(self, axis: str, accuracy: int = 2) -> Callable:
        def D(a: Jet) -> Jet:
            if axis in a.derivs:
                return Jet(a.derivs[axis], {})
            if axis in self.fd_axes:
                i, h, boundary = self.fd_axes[axis]
                return Jet(numgrid.derivative(a.value, i, h, boundary, 1, accuracy), {})
            raise DerivativeUnavailable(f"derivative along {axis!r} is not known on this slice")
        return D
