"""Exact differential polynomials in u(x, y) with rational coefficients and formal x-primitives.

Atoms are either ``Deriv(a, b)``, denoting the derivative u with ``a`` x- and ``b``
y-derivatives, or ``Int(m)``, the formal primitive in x of a monic monomial ``m``
(integration constants dropped).  A monomial is a sorted tuple of ``(atom, power)``
pairs; a ``DiffPoly`` maps monomials to nonzero ``Fraction`` coefficients.

Canonical form is maintained by construction: d_y never survives outside an
integrand, ``Int(d_x e)`` is recognized and cancelled by :func:`int_x`, and every
``Int`` integrand is a monic monomial.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Union

import numpy as np

from . import numgrid


class Deriv(NamedTuple):
    tag: int
    a: int
    b: int


class Int(NamedTuple):
    tag: int
    body: tuple


Atom = Union[Deriv, Int]
Number = Union[int, Fraction]


def D(a: int = 0, b: int = 0) -> Deriv:
    if a < 0 or b < 0:
        raise ValueError("derivative orders must be non-negative")
    return Deriv(0, a, b)


def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    powers = dict(m1)
    for atom, k in m2:
        powers[atom] = powers.get(atom, 0) + k
    return tuple(sorted(powers.items()))


class DiffPoly:
    """Immutable sum of rational multiples of atom monomials."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[tuple, Number] | None = None):
        clean = {}
        for mono, c in (terms or {}).items():
            c = Fraction(c)
            if c != 0:
                clean[mono] = c
        self._terms = dict(sorted(clean.items()))
        self._hash = None

    # construction
    @classmethod
    def const(cls, c: Number) -> "DiffPoly":
        return cls({(): c})

    @classmethod
    def atom(cls, atom: Atom, power: int = 1) -> "DiffPoly":
        return cls({((atom, power),): 1})

    @classmethod
    def u(cls, a: int = 0, b: int = 0) -> "DiffPoly":
        return cls.atom(D(a, b))

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def atoms(self) -> set:
        return {a for mono in self._terms for a, _ in mono}

    # ring operations
    def __add__(self, other):
        other = _coerce(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return DiffPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return DiffPoly({m: c * other for m, c in self._terms.items()})
        other = _coerce(other)
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return DiffPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomial")
        out = DiffPoly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = DiffPoly.const(other)
        return isinstance(other, DiffPoly) and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(self._terms.items()))
        return self._hash

    def __repr__(self):
        return f"DiffPoly({pretty(self)})"

    def __str__(self):
        return pretty(self)


def _coerce(x) -> DiffPoly:
    if isinstance(x, DiffPoly):
        return x
    if isinstance(x, (int, Fraction)):
        return DiffPoly.const(x)
    raise TypeError(f"cannot use {type(x).__name__} as a DiffPoly")


ZERO = DiffPoly()
U = DiffPoly.u()


def normalize(p: DiffPoly) -> DiffPoly:
    """Rebuild ``p`` from its atoms so that every integrand passes through :func:`int_x`."""
    out = ZERO
    for mono, c in p.items():
        t = DiffPoly.const(c)
        for atom, k in mono:
            t = t * (_norm_atom(atom) ** k)
        out = out + t
    return out


def _norm_atom(atom: Atom) -> DiffPoly:
    if isinstance(atom, Deriv):
        return DiffPoly.atom(atom)
    return int_x(normalize(DiffPoly({atom.body: 1})))


# -- differentiation -----------------------------------------------------------


def _derive(p: DiffPoly, atom_rule) -> DiffPoly:
    out: dict = {}
    for mono, c in p.items():
        for i, (atom, k) in enumerate(mono):
            rest = mono[:i] + ((atom, k - 1),) * (k > 1) + mono[i + 1:]
            for m2, c2 in atom_rule(atom).items():
                m = _mono_mul(rest, m2)
                out[m] = out.get(m, 0) + c * k * c2
    return DiffPoly(out)


@lru_cache(maxsize=None)
def _dx_atom(atom: Atom) -> DiffPoly:
    if isinstance(atom, Deriv):
        return DiffPoly.atom(D(atom.a + 1, atom.b))
    return DiffPoly({atom.body: 1})


@lru_cache(maxsize=None)
def _dy_atom(atom: Atom) -> DiffPoly:
    if isinstance(atom, Deriv):
        return DiffPoly.atom(D(atom.a, atom.b + 1))
    return int_x(d_y(DiffPoly({atom.body: 1})))


def d_x(p: DiffPoly) -> DiffPoly:
    return _derive(_coerce(p), _dx_atom)


def d_y(p: DiffPoly) -> DiffPoly:
    return _derive(_coerce(p), _dy_atom)


# -- integration by recognition -------------------------------------------------


def chain_rank(atom: Atom):
    """(order, family) for atoms on a d_x chain ... Int²(u_y^b), Int(u_y^b), u_y^b, u_xy^b ...; else None."""
    if isinstance(atom, Deriv):
        return (atom.a, atom.b)
    if len(atom.body) == 1 and atom.body[0][1] == 1:
        inner = chain_rank(atom.body[0][0])
        if inner is not None and inner[0] <= 0:
            return (inner[0] - 1, inner[1])
    return None


def _predecessor(atom: Atom) -> Atom:
    if isinstance(atom, Deriv) and atom.a > 0:
        return D(atom.a - 1, atom.b)
    return Int(1, ((atom, 1),))


def _leading(p: DiffPoly):
    best = None
    for atom in p.atoms():
        r = chain_rank(atom)
        if r is not None and (best is None or r > best[0]):
            best = (r, atom)
    return best


def _peel(p: DiffPoly, alpha: Atom, rank):
    """One recognition step on the terms containing ``alpha``; None if they are not a derivative."""
    beta = _predecessor(alpha)
    cand = ZERO
    for mono, c in p.items():
        powers = dict(mono)
        k = powers.pop(alpha, 0)
        if k == 0:
            continue
        if k > 1:
            return None
        j = powers.pop(beta, 0)
        powers[beta] = j + 1
        cand = cand + DiffPoly({tuple(sorted(powers.items())): c / (j + 1)})
    rem = p - d_x(cand)
    lead2 = _leading(rem)
    if lead2 is not None and lead2[0] >= rank:
        return None
    return cand, rem


def _greedy(p: DiffPoly):
    """Peel total derivatives off ``p``.  Returns (Q, deferred) with p = d_x Q + deferred.

    Terms whose leading atom cannot be peeled are set aside so that the rest of
    the polynomial can still be recognized.
    """
    q, deferred = ZERO, ZERO
    while not p.is_zero():
        lead = _leading(p)
        if lead is None:
            deferred = deferred + p
            break
        rank, alpha = lead
        step = _peel(p, alpha, rank)
        if step is None:
            stuck = DiffPoly({m: c for m, c in p.items() if any(a == alpha for a, _ in m)})
            deferred = deferred + stuck
            p = p - stuck
            continue
        cand, p = step
        q = q + cand
    return q, deferred


_MAX_DEPTH = 12


def _integrate(p: DiffPoly, depth: int) -> DiffPoly:
    q, rem = _greedy(p)
    for mono, c in rem.items():
        single = DiffPoly({mono: c})
        q1, r1 = _greedy(single)
        if r1 == single or depth >= _MAX_DEPTH:
            # irreducible monomial: wrap it
            q = q + DiffPoly({((Int(1, mono), 1),): c})
        else:
            q = q + q1 + _integrate(r1, depth + 1)
    return q


@lru_cache(maxsize=None)
def _int_cached(p: DiffPoly) -> DiffPoly:
    return _integrate(p, 0)


def int_x(p: DiffPoly) -> DiffPoly:
    """Formal x-primitive with zero integration constant; recognizes exact derivatives."""
    p = _coerce(p)
    if () in p.terms:
        raise ValueError("the x-primitive of a constant is not a differential polynomial")
    return _int_cached(p)


def int_x_power(p: DiffPoly, n: int) -> DiffPoly:
    for _ in range(n):
        p = int_x(p)
    return p


# -- KP density recursion -----------------------------------------------------


def kp_density_recursion(M: int) -> list[DiffPoly]:
    """phi^(m)_x for m = 0..M from the Riccati-type expansion of the KP seed equation."""
    if M < 0:
        raise ValueError("M must be non-negative")
    phix = [-U]
    for m in range(1, M + 1):
        prev = phix[m - 1]
        term = (d_y(int_x(prev)) - d_x(prev)) * Fraction(1, 2)
        quad = ZERO
        for i in range(m - 1):
            quad = quad + phix[i] * phix[m - 2 - i]
        phix.append(term - quad * Fraction(1, 2))
    return phix


# -- numeric evaluation ---------------------------------------------------------


def evaluate(p: DiffPoly, u: numgrid.SampledField, accuracy: int = 4, tol: float = 1e-9) -> np.ndarray:
    """Evaluate on a scalar field over (x) or (x, y); x-primitives start at the first x point.

    Without a y axis every y-derivative evaluates to zero.
    """
    p = _coerce(p)
    grid = u.grid
    if u.kind == "matrix":
        raise ValueError("differential polynomials are evaluated on scalar fields")
    ix = grid.axis_index("x")
    iy = grid.axis_index("y") if any(a.name == "y" for a in grid.axes) else None
    cache: dict = {}

    def atom_val(atom):
        if atom in cache:
            return cache[atom]
        if isinstance(atom, Deriv):
            if atom.b > 0 and iy is None:
                v = np.zeros_like(u.values)
            else:
                v = u.values
                if atom.a:
                    ax = grid.axes[ix]
                    v = numgrid.derivative(v, ix, ax.step, ax.boundary, atom.a, accuracy)
                if atom.b:
                    ay = grid.axes[iy]
                    v = numgrid.derivative(v, iy, ay.step, ay.boundary, atom.b, accuracy)
        else:
            body = mono_val(atom.body)
            ax = grid.axes[ix]
            if ax.boundary == numgrid.PERIODIC:
                try:
                    v = numgrid.cumulative(body, ix, ax.step, ax.boundary, tol)
                except numgrid.NonzeroMeanError as exc:
                    raise numgrid.NonzeroMeanError(f"{exc}; offending atom {pretty_atom(atom)}") from None
            else:
                v = numgrid.cumulative(body, ix, ax.step, ax.boundary)
        cache[atom] = v
        return v

    def mono_val(mono):
        out = np.ones_like(u.values, dtype=float)
        for atom, k in mono:
            out = out * atom_val(atom) ** k
        return out

    total = np.zeros_like(u.values, dtype=float)
    for mono, c in p.items():
        total = total + float(c) * mono_val(mono)
    return total


# -- printing -------------------------------------------------------------------

_SUP = str.maketrans("0123456789-", "⁰¹²³⁴⁵⁶⁷⁸⁹⁻")


def pretty_atom(atom: Atom) -> str:
    if isinstance(atom, Deriv):
        if atom.a == atom.b == 0:
            return "u"
        return "u_" + "x" * atom.a + "y" * atom.b
    n, inner = 0, atom
    while isinstance(inner, Int) and chain_rank(inner) is not None:
        inner = inner.body[0][0]
        n += 1
    if n:
        return f"∂x{str(-n).translate(_SUP)} " + pretty_atom(inner)
    return "∂x⁻¹(" + _pretty_mono(atom.body) + ")"


def _pretty_mono(mono: tuple) -> str:
    parts = []
    for atom, k in mono:
        s = pretty_atom(atom)
        if k > 1:
            s = (f"({s})" if " " in s else s) + f"^{k}"
        parts.append(s)
    return " ".join(parts)


def pretty(p: DiffPoly) -> str:
    if p.is_zero():
        return "0"
    out = []
    for i, (mono, c) in enumerate(p.items()):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = _pretty_mono(mono)
        if not body:
            txt = str(mag)
        elif mag == 1:
            txt = body
        else:
            txt = f"{mag} {body}"
        out.append((sign if sign == "-" else "") + txt if i == 0 else f" {sign} {txt}")
    return "".join(out)


def to_sexpr(p: DiffPoly) -> str:
    """Machine-readable form: (+ (* c f...) ...) with factors (u a b), (int (* f...)), (^ f k)."""
    return "(+" + "".join(" " + _term_sexpr(m, c) for m, c in p.items()) + ")"


def _atom_sexpr(atom: Atom) -> str:
    if isinstance(atom, Deriv):
        return f"(u {atom.a} {atom.b})"
    return "(int " + _mono_sexpr(atom.body) + ")"


def _mono_sexpr(mono) -> str:
    fs = []
    for atom, k in mono:
        s = _atom_sexpr(atom)
        fs.append(s if k == 1 else f"(^ {s} {k})")
    return "(*" + "".join(" " + f for f in fs) + ")"


def _term_sexpr(mono, c) -> str:
    return f"(* {c}" + _mono_sexpr(mono)[2:]


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _parse_tokens(text: str):
    stack: list = [[]]
    for tok in _TOKEN.findall(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) < 2:
                raise ValueError("unbalanced parentheses")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1 or len(stack[0]) != 1:
        raise ValueError("malformed S-expression")
    return stack[0][0]


def _build_mono(tree) -> tuple:
    if not (isinstance(tree, list) and tree and tree[0] == "*"):
        raise ValueError(f"expected a product, got {tree!r}")
    mono: tuple = ()
    for f in tree[1:]:
        atom, k = _build_factor(f)
        mono = _mono_mul(mono, ((atom, k),))
    return mono


def _build_factor(tree):
    if not isinstance(tree, list) or not tree:
        raise ValueError(f"bad factor {tree!r}")
    head = tree[0]
    if head == "^":
        atom, k = _build_factor(tree[1])
        return atom, k * int(tree[2])
    if head == "u":
        return D(int(tree[1]), int(tree[2])), 1
    if head == "int":
        return Int(1, _build_mono(tree[1])), 1
    raise ValueError(f"unknown factor head {head!r}")


def from_sexpr(text: str) -> DiffPoly:
    tree = _parse_tokens(text)
    if not (isinstance(tree, list) and tree and tree[0] == "+"):
        raise ValueError("expected (+ ...) at top level")
    out: dict = {}
    for term in tree[1:]:
        if not (isinstance(term, list) and len(term) >= 2 and term[0] == "*"):
            raise ValueError(f"bad term {term!r}")
        c = Fraction(term[1])
        mono = _build_mono(["*"] + term[2:])
        out[mono] = out.get(mono, 0) + c
    return DiffPoly(out)


def poly_from_terms(terms: Iterable[tuple[Number, Iterable[tuple[Atom, int]]]]) -> DiffPoly:
    out = ZERO
    for c, factors in terms:
        mono: tuple = ()
        for atom, k in factors:
            mono = _mono_mul(mono, ((atom, k),))
        out = out + DiffPoly({mono: c})
    return out
