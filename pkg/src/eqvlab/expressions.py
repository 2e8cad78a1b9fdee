"""Exact symbolic expressions for differential-algebra work.

An :class:`Expression` is a quotient of two multivariate polynomials with
rational coefficients.  The polynomial generators ("atoms") are independent
variables, parameters, jet variables (a dependent variable together with a
multi-index of differentiations), applied function symbols with slot-indexed
derivative markers, unevaluated antiderivatives, and logarithms.  Each
monomial additionally carries one exponential factor ``exp(argument)``.

Every expression is kept in a normal form:

* numerator and denominator are expanded polynomials over the atoms,
* monomial factors common to all monomials of numerator and denominator are
  cancelled (no polynomial gcd beyond that is attempted),
* when the denominator is a single monomial its exponential factor is moved
  into the numerator, so quotients like ``exp(f+g)*g1(z)/exp(f+g)`` collapse,
* the denominator is scaled so its leading monomial has coefficient one,
* ``exp(a)*exp(b)`` merges to ``exp(a+b)`` and ``exp(0)`` disappears; no other
  transcendental rewriting happens.

Equality (``==``) is structural identity of normal forms.  Semantic equality
of two expressions is decided by subtracting them and asking
:meth:`Expression.is_zero`; the subtraction cross-multiplies, so it is an
exact zero test in the field of fractions freely generated by the atoms.

Expressions and atoms are immutable and hashable; all operations return new
objects and are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import chain
from typing import Iterable, Mapping, Sequence, Union

from .errors import UnsupportedAtomError, ZeroDenominatorError

__all__ = [
    "Atom",
    "Var",
    "Param",
    "Jet",
    "Func",
    "Antideriv",
    "Log",
    "Monomial",
    "Expression",
    "DependencySet",
    "ZERO",
    "ONE",
    "as_expression",
    "as_atom",
    "var",
    "param",
    "jet",
    "func",
    "antiderivative",
    "log",
    "exp",
    "fraction",
    "from_monomial",
    "from_terms",
    "normalize",
    "partial",
    "substitute",
    "substitute_functions",
    "collect",
    "dependency_closure",
    "polynomial_jets",
    "closure_jets",
    "sign_canonical",
    "expr_sum",
    "expr_prod",
]

ExpressionLike = Union["Expression", "Atom", int, Fraction]


def _check_name(name: str, what: str) -> str:
    if not isinstance(name, str) or not name.isidentifier():
        raise ValueError(f"{what} name must be a Python-style identifier, got {name!r}")
    return name


# ---------------------------------------------------------------------------
# Atoms


class Atom:
    """A generator of the polynomial layer.  Immutable.

    Atoms of different kinds are mutually independent for differentiation.
    The ``text`` form is injective within a kind, so ``(rank, text)`` is a
    faithful identity; it doubles as the deterministic ordering key.
    """

    __slots__ = ("_text", "_hash", "_skey")
    rank = -1

    def _seal(self):
        # every subclass calls this last: freezes the (rank, text) identity
        # key that monomial merging and sorting read straight off the slot
        self._hash = hash((self.rank, self._text))
        self._skey = (self.rank, self._text)

    @property
    def text(self) -> str:
        return self._text

    def __eq__(self, other):
        return self is other or (
            isinstance(other, Atom) and self.rank == other.rank and self._text == other._text
        )

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return self._text

    def children(self) -> tuple:
        """Inner expressions (function arguments, integrands, log arguments)."""
        return ()

    def rebuilt(self, children: Sequence["Expression"]) -> "Atom":
        """The same atom with ``children`` substituted for :meth:`children`."""
        if children:
            raise ValueError("atom has no children to rebuild")
        return self


class Var(Atom):
    """An independent variable."""

    __slots__ = ("name",)
    rank = 0

    def __init__(self, name: str):
        self.name = _check_name(name, "variable")
        self._text = name
        self._seal()


class Jet(Atom):
    """A dependent variable differentiated by a multi-index of variable names.

    The index is stored sorted, so mixed derivatives have one representative.
    An empty index is the dependent variable itself.
    """

    __slots__ = ("dep", "index")
    rank = 1

    def __init__(self, dep: str, index: Iterable[str] = ()):
        self.dep = _check_name(dep, "dependent variable")
        self.index = tuple(sorted(_check_name(i, "jet index") for i in index))
        self._text = self.dep if not self.index else "D[%s,%s]" % (self.dep, ",".join(self.index))
        self._seal()

    @property
    def order(self) -> int:
        return len(self.index)

    def extended(self, name: str) -> "Jet":
        """The jet one order higher, differentiated additionally by ``name``."""
        return Jet(self.dep, self.index + (name,))


class Param(Atom):
    """A named constant."""

    __slots__ = ("name",)
    rank = 2

    def __init__(self, name: str):
        self.name = _check_name(name, "parameter")
        self._text = name
        self._seal()


class Func(Atom):
    """An applied function symbol with slot-indexed derivative markers.

    ``dindex`` is a sorted tuple of 1-based argument positions; each entry
    marks one differentiation with respect to that slot.  Arguments are full
    expressions, so composed values like ``a1(R(y), S(z))`` are atoms here.
    """

    __slots__ = ("name", "arity", "dindex", "args")
    rank = 3

    def __init__(self, name: str, args: Sequence[ExpressionLike], dindex: Iterable[int] = ()):
        self.name = _check_name(name, "function")
        self.args = tuple(as_expression(a) for a in args)
        self.arity = len(self.args)
        if self.arity == 0:
            raise ValueError(f"function {name!r} needs at least one argument")
        self.dindex = tuple(sorted(dindex))
        for s in self.dindex:
            if not isinstance(s, int) or not 1 <= s <= self.arity:
                raise ValueError(f"derivative slot {s!r} outside 1..{self.arity} for {name!r}")
        head = self.name if not self.dindex else "D[%s,%s]" % (
            self.name, ",".join(str(s) for s in self.dindex))
        self._text = head + "(" + ",".join(a.text for a in self.args) + ")"
        self._seal()

    def children(self):
        return self.args

    def rebuilt(self, children):
        return Func(self.name, children, self.dindex)

    def slot_derivative(self, slot: int) -> "Func":
        return Func(self.name, self.args, self.dindex + (slot,))


class Antideriv(Atom):
    """An unevaluated antiderivative of ``integrand`` with respect to ``var``.

    Differentiating by ``var`` returns the integrand; differentiating by
    anything else passes under the integral sign.
    """

    __slots__ = ("integrand", "var")
    rank = 4

    def __init__(self, integrand: ExpressionLike, var: str):
        self.integrand = as_expression(integrand)
        self.var = _check_name(var, "integration variable")
        self._text = "int(%s,%s)" % (self.integrand.text, self.var)
        self._seal()

    def children(self):
        return (self.integrand,)

    def rebuilt(self, children):
        return Antideriv(children[0], self.var)


class Log(Atom):
    """A natural logarithm, keyed by the normal form of its argument."""

    __slots__ = ("arg",)
    rank = 5

    def __init__(self, arg: ExpressionLike):
        self.arg = as_expression(arg)
        if self.arg.is_zero():
            raise ZeroDenominatorError("log of an expression that normalizes to zero")
        self._text = "log(%s)" % self.arg.text
        self._seal()

    def children(self):
        return (self.arg,)

    def rebuilt(self, children):
        return Log(children[0])


# ---------------------------------------------------------------------------
# Monomials


class Monomial:
    """A product of atom powers and at most one exponential factor.

    ``atoms`` is a tuple of ``(atom, power)`` pairs with positive integer
    powers, sorted by the atom ordering key.  ``exparg`` is the exponential's
    argument expression, or ``None`` when there is no exponential factor.
    """

    __slots__ = ("atoms", "exparg", "_hash", "_key")

    def __init__(self, atoms: Iterable[tuple[Atom, int]] = (), exparg: "Expression | None" = None):
        pairs = [(a, p) for a, p in atoms if p != 0]
        for a, p in pairs:
            if p < 0:
                raise ValueError("monomial powers must be positive")
        pairs.sort(key=lambda ap: ap[0]._skey)
        self.atoms = tuple(pairs)
        if exparg is not None and exparg.is_zero():
            exparg = None
        self.exparg = exparg
        self._hash = hash((self.atoms, self.exparg))
        self._key = None

    @staticmethod
    def _raw(atoms: tuple, exparg: "Expression | None") -> "Monomial":
        # trusted constructor: atoms already sorted, powers positive, exparg
        # already None when zero; skips all validation on the hot paths
        m = object.__new__(Monomial)
        m.atoms = atoms
        m.exparg = exparg
        m._hash = hash((atoms, exparg))
        m._key = None
        return m

    def order_key(self):
        if self._key is None:
            ek = "" if self.exparg is None else self.exparg.text
            self._key = (tuple((a.rank, a.text, p) for a, p in self.atoms), ek)
        return self._key

    def __eq__(self, other):
        return self is other or (
            isinstance(other, Monomial)
            and self.atoms == other.atoms
            and self.exparg == other.exparg
        )

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "Monomial(%s)" % self.text("1")

    def __mul__(self, other: "Monomial") -> "Monomial":
        a, b = self.atoms, other.atoms
        if not a:
            merged = b
        elif not b:
            merged = a
        else:
            # both sides are sorted by the atom identity key; merge them
            out = []
            i = j = 0
            na, nb = len(a), len(b)
            while i < na and j < nb:
                pa = a[i]
                pb = b[j]
                ka = pa[0]._skey
                kb = pb[0]._skey
                if ka == kb:
                    out.append((pa[0], pa[1] + pb[1]))
                    i += 1
                    j += 1
                elif ka < kb:
                    out.append(pa)
                    i += 1
                else:
                    out.append(pb)
                    j += 1
            out.extend(a[i:])
            out.extend(b[j:])
            merged = tuple(out)
        if self.exparg is None:
            ea = other.exparg
        elif other.exparg is None:
            ea = self.exparg
        else:
            ea = self.exparg + other.exparg
            if ea.is_zero():
                ea = None
        return Monomial._raw(merged, ea)

    def __pow__(self, k: int) -> "Monomial":
        if k < 0:
            raise ValueError("monomial powers must be positive")
        if k == 0:
            return _ONE_M
        ea = None if self.exparg is None else self.exparg * k
        return Monomial._raw(tuple((a, p * k) for a, p in self.atoms), ea)

    def without(self, powers: Mapping[Atom, int]) -> "Monomial":
        """The monomial divided by the given atom powers (must divide exactly)."""
        out = []
        for a, p in self.atoms:
            q = p - powers.get(a, 0)
            if q < 0:
                raise ValueError("monomial division is not exact")
            if q:
                out.append((a, q))
        return Monomial._raw(tuple(out), self.exparg)

    def shifted_exp(self, delta: "Expression") -> "Monomial":
        """The monomial with ``delta`` added to its exponential argument."""
        ea = delta if self.exparg is None else self.exparg + delta
        if ea.is_zero():
            ea = None
        return Monomial._raw(self.atoms, ea)

    def is_one(self) -> bool:
        return not self.atoms and self.exparg is None

    def text(self, coeff_text: str) -> str:
        parts = []
        if coeff_text != "1" or (not self.atoms and self.exparg is None):
            parts.append(coeff_text)
        for a, p in self.atoms:
            parts.append(a.text if p == 1 else "%s^%d" % (a.text, p))
        if self.exparg is not None:
            parts.append("exp(%s)" % self.exparg.text)
        return "*".join(parts)


_ONE_M = None  # set after Expression exists; Monomial((), None) needs ZERO


# ---------------------------------------------------------------------------
# Polynomial helpers.  A polynomial is a dict {Monomial: Fraction} with no
# zero coefficients.  The dicts are private to Expression and never mutated
# after construction.


def _padd(a: dict, b: dict) -> dict:
    out = dict(a)
    for m, c in b.items():
        s = out.get(m)
        if s is None:
            out[m] = c
        else:
            s = s + c
            if s:
                out[m] = s
            else:
                del out[m]
    return out


def _pneg(a: dict) -> dict:
    return {m: -c for m, c in a.items()}


def _pscale(a: dict, c: Fraction) -> dict:
    if c == 1:
        return a
    return {m: v * c for m, v in a.items()}


def _pmul(a: dict, b: dict) -> dict:
    if len(a) > len(b):
        a, b = b, a
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = ma * mb
            c = ca * cb
            s = out.get(m)
            if s is None:
                out[m] = c
            else:
                s = s + c
                if s:
                    out[m] = s
                else:
                    del out[m]
    return out


def _ppow(a: dict, k: int) -> dict:
    result = None
    sq = a
    while k:
        if k & 1:
            result = sq if result is None else _pmul(result, sq)
        k >>= 1
        if k:
            sq = _pmul(sq, sq)
    if result is None:
        return {_ONE_M: Fraction(1)}
    return result


def _plead(a: dict) -> Monomial:
    return max(a, key=Monomial.order_key)


# ---------------------------------------------------------------------------
# Expressions


class Expression:
    """A normal-form quotient of two polynomials over the atoms.

    Construct values through the factory functions (:func:`var`, :func:`jet`,
    :func:`func`, ...) and arithmetic operators; the constructor itself is an
    internal entry point that normalizes a raw numerator/denominator pair.
    """

    __slots__ = ("_num", "_den", "_hash", "_text", "_deps")

    def __init__(self, num: dict, den: dict):
        num, den = _canonical(num, den)
        self._num = num
        self._den = den
        self._hash = None
        self._text = None
        self._deps = None

    # -- inspection

    def is_zero(self) -> bool:
        return not self._num

    def is_one(self) -> bool:
        return self._num == self._den

    def is_constant(self) -> bool:
        return (not self._num or (len(self._num) == 1 and _plead(self._num).is_one())) \
            and len(self._den) == 1 and _plead(self._den).is_one()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("expression is not a rational constant")
        if not self._num:
            return Fraction(0)
        return next(iter(self._num.values()))

    def num_terms(self) -> tuple[tuple[Fraction, Monomial], ...]:
        """Numerator terms, leading monomial first."""
        return tuple(
            (self._num[m], m)
            for m in sorted(self._num, key=Monomial.order_key, reverse=True)
        )

    def den_terms(self) -> tuple[tuple[Fraction, Monomial], ...]:
        return tuple(
            (self._den[m], m)
            for m in sorted(self._den, key=Monomial.order_key, reverse=True)
        )

    def numerator(self) -> "Expression":
        return Expression(self._num, {_ONE_M: Fraction(1)})

    def denominator(self) -> "Expression":
        return Expression(self._den, {_ONE_M: Fraction(1)})

    @property
    def text(self) -> str:
        if self._text is None:
            if len(self._den) == 1 and _plead(self._den).is_one():
                self._text = _poly_text(self._num)
            else:
                self._text = "(%s)/(%s)" % (_poly_text(self._num), _poly_text(self._den))
        return self._text

    def __repr__(self):
        return self.text

    def __str__(self):
        return self.text

    def to_tree(self):
        """A JSON-ready tree of the normal form, stable across runs."""
        return {"num": _poly_tree(self._num), "den": _poly_tree(self._den)}

    # -- identity

    def __eq__(self, other):
        if self is other:
            return True
        if isinstance(other, (int, Fraction)):
            other = as_expression(other)
        if not isinstance(other, Expression):
            return NotImplemented
        return self._num == other._num and self._den == other._den

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((
                frozenset(self._num.items()),
                frozenset(self._den.items()),
            ))
        return self._hash

    # -- arithmetic

    def __add__(self, other) -> "Expression":
        other = as_expression(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self._den == other._den:
            return Expression(_padd(self._num, other._num), self._den)
        return Expression(
            _padd(_pmul(self._num, other._den), _pmul(other._num, self._den)),
            _pmul(self._den, other._den),
        )

    __radd__ = __add__

    def __neg__(self) -> "Expression":
        return Expression(_pneg(self._num), self._den)

    def __sub__(self, other) -> "Expression":
        return self.__add__(as_expression(other).__neg__())

    def __rsub__(self, other) -> "Expression":
        return as_expression(other).__sub__(self)

    def __mul__(self, other) -> "Expression":
        other = as_expression(other)
        if self.is_zero() or other.is_zero():
            return ZERO
        return Expression(_pmul(self._num, other._num), _pmul(self._den, other._den))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Expression":
        other = as_expression(other)
        if other.is_zero():
            raise ZeroDenominatorError("division by an expression that normalizes to zero")
        if self.is_zero():
            return ZERO
        return Expression(_pmul(self._num, other._den), _pmul(self._den, other._num))

    def __rtruediv__(self, other) -> "Expression":
        return as_expression(other).__truediv__(self)

    def __pow__(self, k: int) -> "Expression":
        if not isinstance(k, int):
            raise UnsupportedAtomError("only integer powers are supported")
        if k == 0:
            return ONE
        if k < 0:
            if self.is_zero():
                raise ZeroDenominatorError("negative power of zero")
            return Expression(_ppow(self._den, -k), _ppow(self._num, -k))
        return Expression(_ppow(self._num, k), _ppow(self._den, k))


def _canonical(num: dict, den: dict) -> tuple[dict, dict]:
    """Normalize a raw numerator/denominator pair.  See the module docstring."""
    if not den:
        raise ZeroDenominatorError("denominator normalizes to zero")
    if not num:
        return {}, {_ONE_M: Fraction(1)}

    # cancel atom powers present in every monomial of both polynomials
    common: dict | None = None
    for m in chain(num, den):
        if common is None:
            common = dict(m.atoms)
        else:
            here = dict(m.atoms)
            common = {a: min(p, here[a]) for a, p in common.items() if a in here}
        if not common:
            break
    if common:
        num = {m.without(common): c for m, c in num.items()}
        den = {m.without(common): c for m, c in den.items()}

    # cancel exponential factors jointly: shift every exponential argument in
    # both polynomials by minus the mean of the denominator's arguments.  The
    # mean is equivariant under joint shifts, so the normalized pair has
    # denominator mean zero and a second pass is a no-op; any argument part
    # shared by all denominator monomials cancels completely.  For a
    # single-monomial denominator this strips its exponential outright.
    if any(m.exparg is not None for m in den):
        total = ZERO
        for m in den:
            if m.exparg is not None:
                total = total + m.exparg
        delta = total / -len(den)
        if not delta.is_zero():
            num = {m.shifted_exp(delta): c for m, c in num.items()}
            den = {m.shifted_exp(delta): c for m, c in den.items()}

    # scale so the leading denominator monomial has coefficient one
    lc = den[_plead(den)]
    if lc != 1:
        inv = 1 / lc
        num = {m: c * inv for m, c in num.items()}
        den = {m: c * inv for m, c in den.items()}
    return num, den


def _expr_raw(num: dict, den: dict) -> Expression:
    return Expression(num, den)


# the constant monomial must exist before ZERO/ONE below
_ONE_M = Monomial((), None)

ZERO = Expression({}, {_ONE_M: Fraction(1)})
ONE = Expression({_ONE_M: Fraction(1)}, {_ONE_M: Fraction(1)})


# ---------------------------------------------------------------------------
# Construction


def as_expression(x: ExpressionLike) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, Atom):
        return Expression({Monomial(((x, 1),)): Fraction(1)}, {_ONE_M: Fraction(1)})
    if isinstance(x, (int, Fraction)):
        c = Fraction(x)
        if not c:
            return ZERO
        return Expression({_ONE_M: c}, {_ONE_M: Fraction(1)})
    raise UnsupportedAtomError(f"cannot interpret {x!r} as an expression")


def as_atom(x) -> Atom:
    """Extract the atom from a bare-atom expression (or pass an atom through)."""
    if isinstance(x, Atom):
        return x
    if isinstance(x, Expression):
        if len(x._num) == 1 and len(x._den) == 1 and _plead(x._den).is_one():
            (m, c), = x._num.items()
            if c == 1 and m.exparg is None and len(m.atoms) == 1 and m.atoms[0][1] == 1:
                return m.atoms[0][0]
    raise UnsupportedAtomError(f"{x!r} is not a bare atom")


def var(name: str) -> Expression:
    return as_expression(Var(name))


def param(name: str) -> Expression:
    return as_expression(Param(name))


def jet(dep: str, *index: str) -> Expression:
    return as_expression(Jet(dep, index))


def func(name: str, *args: ExpressionLike, d: Iterable[int] = ()) -> Expression:
    return as_expression(Func(name, args, d))


def antiderivative(integrand: ExpressionLike, variable: str) -> Expression:
    integrand = as_expression(integrand)
    if integrand.is_zero():
        return ZERO
    return as_expression(Antideriv(integrand, variable))


def log(arg: ExpressionLike) -> Expression:
    return as_expression(Log(arg))


def exp(arg: ExpressionLike) -> Expression:
    arg = as_expression(arg)
    if arg.is_zero():
        return ONE
    return Expression({Monomial((), arg): Fraction(1)}, {_ONE_M: Fraction(1)})


def fraction(p: int, q: int = 1) -> Expression:
    return as_expression(Fraction(p, q))


def from_monomial(m: Monomial, coeff: int | Fraction = 1) -> Expression:
    """The expression ``coeff * m``."""
    c = Fraction(coeff)
    if not c:
        return ZERO
    return Expression({m: c}, {_ONE_M: Fraction(1)})


def from_terms(terms: Mapping[Monomial, Fraction]) -> Expression:
    """The polynomial with the given monomial coefficients."""
    clean = {m: Fraction(c) for m, c in terms.items() if c}
    if not clean:
        return ZERO
    return Expression(clean, {_ONE_M: Fraction(1)})


def expr_sum(terms: Iterable[ExpressionLike]) -> Expression:
    """Sum with balanced pairing; kinder than a linear fold for long lists."""
    items = [as_expression(t) for t in terms if not as_expression(t).is_zero()]
    if not items:
        return ZERO
    while len(items) > 1:
        items = [
            items[i] + items[i + 1] if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def expr_prod(factors: Iterable[ExpressionLike]) -> Expression:
    items = [as_expression(f) for f in factors]
    out = ONE
    for f in items:
        out = out * f
    return out


def normalize(e: ExpressionLike) -> Expression:
    """The normal form of ``e``.  Idempotent; expressions are built normalized."""
    return as_expression(e)


# ---------------------------------------------------------------------------
# Printing


def _coeff_text(c: Fraction) -> str:
    return str(c) if c.denominator == 1 else "%d/%d" % (c.numerator, c.denominator)


def _poly_text(p: dict) -> str:
    if not p:
        return "0"
    parts = []
    for m in sorted(p, key=Monomial.order_key, reverse=True):
        c = p[m]
        body = m.text(_coeff_text(abs(c)))
        if not parts:
            parts.append(body if c > 0 else "-" + body)
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    return " ".join(parts)


def _atom_tree(a: Atom):
    if isinstance(a, Var):
        return {"kind": "var", "name": a.name}
    if isinstance(a, Param):
        return {"kind": "param", "name": a.name}
    if isinstance(a, Jet):
        return {"kind": "jet", "dep": a.dep, "index": list(a.index)}
    if isinstance(a, Func):
        return {
            "kind": "func",
            "name": a.name,
            "d": list(a.dindex),
            "args": [x.to_tree() for x in a.args],
        }
    if isinstance(a, Antideriv):
        return {"kind": "int", "var": a.var, "integrand": a.integrand.to_tree()}
    if isinstance(a, Log):
        return {"kind": "log", "arg": a.arg.to_tree()}
    raise UnsupportedAtomError(f"unknown atom {a!r}")


def _poly_tree(p: dict):
    out = []
    for m in sorted(p, key=Monomial.order_key, reverse=True):
        term = {
            "coeff": _coeff_text(p[m]),
            "factors": [[_atom_tree(a), k] for a, k in m.atoms],
        }
        if m.exparg is not None:
            term["exp"] = m.exparg.to_tree()
        out.append(term)
    return out


# ---------------------------------------------------------------------------
# Differentiation


def _atom_derivative(a: Atom, x: Atom) -> Expression:
    """d(atom)/d(x) where x is a Var, Jet, or Param atom."""
    if a == x:
        return ONE
    if isinstance(a, (Var, Jet, Param)):
        return ZERO
    if isinstance(a, Func):
        terms = []
        for s, arg in enumerate(a.args, start=1):
            da = partial(arg, x)
            if not da.is_zero():
                terms.append(da * as_expression(a.slot_derivative(s)))
        return expr_sum(terms)
    if isinstance(a, Antideriv):
        if isinstance(x, Var) and x.name == a.var:
            return a.integrand
        inner = partial(a.integrand, x)
        return antiderivative(inner, a.var)
    if isinstance(a, Log):
        da = partial(a.arg, x)
        if da.is_zero():
            return ZERO
        return da / a.arg
    raise UnsupportedAtomError(f"cannot differentiate atom {a!r}")


def _poly_partial(p: dict, x: Atom) -> Expression:
    terms = []
    cache: dict[Atom, Expression] = {}
    for m, c in p.items():
        base = as_expression(c)
        for i, (a, k) in enumerate(m.atoms):
            da = cache.get(a)
            if da is None:
                da = cache[a] = _atom_derivative(a, x)
            if da.is_zero():
                continue
            rest = Monomial(
                tuple((b, q) if j != i else (b, q - 1) for j, (b, q) in enumerate(m.atoms)),
                m.exparg,
            )
            terms.append(base * k * da * _expr_raw({rest: Fraction(1)}, {_ONE_M: Fraction(1)}))
        if m.exparg is not None:
            de = partial(m.exparg, x)
            if not de.is_zero():
                terms.append(base * de * _expr_raw({m: Fraction(1)}, {_ONE_M: Fraction(1)}))
    return expr_sum(terms)


def partial(e: ExpressionLike, x) -> Expression:
    """The partial derivative of ``e`` with respect to a variable, jet, or parameter.

    Atoms of the three kinds are mutually independent: differentiating by a
    jet treats every other jet (any other multi-index, any other dependent
    variable) as constant.  Function symbols follow the chain rule and pick
    up slot-derivative markers; antiderivatives differentiate back to their
    integrand on the integration variable.
    """
    e = as_expression(e)
    x = as_atom(x)
    if not isinstance(x, (Var, Jet, Param)):
        raise UnsupportedAtomError(f"cannot differentiate with respect to {x!r}")
    dn = _poly_partial(e._num, x)
    if len(e._den) == 1 and _plead(e._den).is_one():
        return dn
    den = e.denominator()
    dd = _poly_partial(e._den, x)
    num = e.numerator()
    # quotient rule, assembled to keep one shared denominator
    return (dn * den - num * dd) / (den * den)


# ---------------------------------------------------------------------------
# Substitution


class _SubstState:
    """Shared caches for one substitution pass.

    ``hits`` decides whether an atom is affected at all; unaffected parts of
    the tree are reused as-is instead of being rebuilt.
    """

    __slots__ = ("binds", "atom_values", "atom_hit", "expr_hit", "hit_fn")

    def __init__(self, binds, hit_fn):
        self.binds = binds
        self.atom_values: dict[Atom, Expression] = {}
        self.atom_hit: dict[Atom, bool] = {}
        self.expr_hit: dict[Expression, bool] = {}
        self.hit_fn = hit_fn

    def expr_mentions(self, e: Expression) -> bool:
        got = self.expr_hit.get(e)
        if got is not None:
            return got
        self.expr_hit[e] = False  # cycle-safe default; trees are acyclic anyway
        out = False
        for m in chain(e._num, e._den):
            for a, _ in m.atoms:
                if self.atom_mentions(a):
                    out = True
                    break
            if not out and m.exparg is not None and self.expr_mentions(m.exparg):
                out = True
            if out:
                break
        self.expr_hit[e] = out
        return out

    def atom_mentions(self, a: Atom) -> bool:
        got = self.atom_hit.get(a)
        if got is not None:
            return got
        out = self.hit_fn(a) or any(self.expr_mentions(k) for k in a.children())
        self.atom_hit[a] = out
        return out


def substitute(e: ExpressionLike, bindings: Mapping) -> Expression:
    """Simultaneous substitution of expressions for atoms.

    Keys may be atoms or bare-atom expressions; matching looks at the original
    expression only, so swaps like ``{t: x, x: t}`` behave as expected.  The
    substitution recurses into function arguments, integrands, logarithm
    arguments, and exponential arguments.
    """
    e = as_expression(e)
    binds = {as_atom(k): as_expression(v) for k, v in bindings.items()}
    if not binds:
        return e
    state = _SubstState(binds, lambda a: a in binds)
    return _subst_expr(e, state)


def _subst_atom(a: Atom, state: _SubstState) -> Expression:
    got = state.atom_values.get(a)
    if got is not None:
        return got
    hit = state.binds.get(a)
    if hit is not None:
        out = hit
    elif not state.atom_mentions(a):
        out = as_expression(a)
    else:
        if isinstance(a, Antideriv) and Var(a.var) in state.binds:
            # rebinding the integration variable is a change of variables,
            # which plain substitution must not pretend to perform
            raise UnsupportedAtomError(
                f"cannot substitute for integration variable {a.var!r}")
        out = as_expression(a.rebuilt([_subst_expr(k, state) for k in a.children()]))
    state.atom_values[a] = out
    return out


def _subst_expr(e: Expression, state: _SubstState) -> Expression:
    if not state.expr_mentions(e):
        return e
    num = _subst_poly(e._num, state)
    if len(e._den) == 1 and _plead(e._den).is_one():
        return num
    den = _subst_poly(e._den, state)
    if den.is_zero():
        raise ZeroDenominatorError("substitution sent a denominator to zero")
    return num / den


def _subst_poly(p: dict, state: _SubstState) -> Expression:
    plain: dict = {}
    terms = []
    for m, c in p.items():
        touched = any(state.atom_mentions(a) for a, _ in m.atoms) or (
            m.exparg is not None and state.expr_mentions(m.exparg))
        if not touched:
            plain[m] = plain.get(m, Fraction(0)) + c
            continue
        factors = [as_expression(c)]
        for a, k in m.atoms:
            factors.append(_subst_atom(a, state) ** k)
        if m.exparg is not None:
            factors.append(exp(_subst_expr(m.exparg, state)))
        terms.append(expr_prod(factors))
    plain = {m: c for m, c in plain.items() if c}
    if plain:
        terms.append(_expr_raw(plain, {_ONE_M: Fraction(1)}))
    return expr_sum(terms)


def substitute_functions(e: ExpressionLike, bindings: Mapping[str, tuple[Sequence[str], ExpressionLike]]) -> Expression:
    """Replace function symbols by concrete expressions in formal slot variables.

    ``bindings`` maps a function base name to ``(slot_names, body)``; every
    applied occurrence, including ones carrying derivative markers, becomes
    the correspondingly differentiated body composed with the (recursively
    rewritten) arguments.
    """
    e = as_expression(e)
    binds = {
        name: (tuple(slots), as_expression(body))
        for name, (slots, body) in bindings.items()
    }
    for name, (slots, body) in binds.items():
        extra = dependency_closure(body).variables - set(slots)
        if extra:
            raise ValueError(
                f"body for {name!r} uses variables {sorted(extra)} outside its slots")
    state = _SubstState(binds, lambda a: isinstance(a, Func) and a.name in binds)
    return _subst_funcs_expr(e, state)


def _subst_funcs_expr(e: Expression, state: _SubstState) -> Expression:
    if not state.expr_mentions(e):
        return e
    num = _subst_funcs_poly(e._num, state)
    if len(e._den) == 1 and _plead(e._den).is_one():
        return num
    den = _subst_funcs_poly(e._den, state)
    if den.is_zero():
        raise ZeroDenominatorError("function instantiation sent a denominator to zero")
    return num / den


def _subst_funcs_atom(a: Atom, state: _SubstState) -> Expression:
    got = state.atom_values.get(a)
    if got is not None:
        return got
    if isinstance(a, Func) and a.name in state.binds:
        slots, body = state.binds[a.name]
        if len(slots) != a.arity:
            raise ValueError(
                f"binding for {a.name!r} has {len(slots)} slots, atom has arity {a.arity}")
        for s in reversed(a.dindex):
            body = partial(body, Var(slots[s - 1]))
        args = [_subst_funcs_expr(x, state) for x in a.args]
        out = substitute(body, {Var(n): v for n, v in zip(slots, args)})
    elif not state.atom_mentions(a):
        out = as_expression(a)
    else:
        out = as_expression(a.rebuilt([_subst_funcs_expr(k, state) for k in a.children()]))
    state.atom_values[a] = out
    return out


def _subst_funcs_poly(p: dict, state: _SubstState) -> Expression:
    plain: dict = {}
    terms = []
    for m, c in p.items():
        touched = any(state.atom_mentions(a) for a, _ in m.atoms) or (
            m.exparg is not None and state.expr_mentions(m.exparg))
        if not touched:
            plain[m] = plain.get(m, Fraction(0)) + c
            continue
        factors = [as_expression(c)]
        for a, k in m.atoms:
            factors.append(_subst_funcs_atom(a, state) ** k)
        if m.exparg is not None:
            factors.append(exp(_subst_funcs_expr(m.exparg, state)))
        terms.append(expr_prod(factors))
    plain = {m: c for m, c in plain.items() if c}
    if plain:
        terms.append(_expr_raw(plain, {_ONE_M: Fraction(1)}))
    return expr_sum(terms)


# ---------------------------------------------------------------------------
# Collection


def _monomial_of(e: Expression) -> Monomial:
    if len(e._num) == 1 and len(e._den) == 1 and _plead(e._den).is_one():
        (m, c), = e._num.items()
        if c == 1:
            return m
    raise ValueError(f"{e.text} is not a coefficient-one monomial")


def collect(e: ExpressionLike, monomials: Sequence[ExpressionLike]) -> tuple[dict, Expression]:
    """Split ``e`` into coefficients of the given jet monomials plus a residual.

    Each entry of ``monomials`` must be a coefficient-one monomial whose atoms
    are all jet variables of one dependent variable; the constant monomial
    ``1`` is allowed and collects the jet-free part.  Coefficients are free of
    every jet variable of the collected dependent variables.  Attribution is
    exact: the coefficient of a listed monomial is the sum of numerator terms
    whose jet content equals that monomial, divided by the denominator, and
    ``e == sum(coeff[m] * m) + residual`` holds identically.

    If the denominator itself contains jet variables of a collected dependent
    variable no attribution is possible; every coefficient is then zero and
    the whole of ``e`` is returned as the residual.
    """
    e = as_expression(e)
    given = [as_expression(m) for m in monomials]
    deps: set[str] = set()
    targets: dict[Monomial, Expression] = {}
    for ge in given:
        m = _monomial_of(ge)
        if m.exparg is not None:
            raise ValueError(f"{ge.text} carries an exponential factor")
        for a, _ in m.atoms:
            if not isinstance(a, Jet):
                raise ValueError(f"{ge.text} contains the non-jet atom {a!r}")
            deps.add(a.dep)
        if m in targets:
            raise ValueError(f"duplicate monomial {ge.text}")
        targets[m] = ge

    def jet_part(m: Monomial) -> Monomial:
        return Monomial(
            tuple((a, k) for a, k in m.atoms if isinstance(a, Jet) and a.dep in deps))

    if any(not jet_part(m).is_one() for m in e._den):
        return {ge: ZERO for ge in given}, e

    buckets: dict[Monomial, dict] = {m: {} for m in targets}
    residual: dict = {}
    for m, c in e._num.items():
        jp = jet_part(m)
        if jp in buckets:
            rest = Monomial(
                tuple((a, k) for a, k in m.atoms
                      if not (isinstance(a, Jet) and a.dep in deps)),
                m.exparg,
            )
            buckets[jp][rest] = buckets[jp].get(rest, Fraction(0)) + c
        else:
            residual[m] = residual.get(m, Fraction(0)) + c

    den = e.denominator()
    coeffs = {}
    for jm, ge in targets.items():
        b = {m: c for m, c in buckets[jm].items() if c}
        coeffs[ge] = _expr_raw(b, {_ONE_M: Fraction(1)}) / den if b else ZERO
    res = {m: c for m, c in residual.items() if c}
    res_e = _expr_raw(res, {_ONE_M: Fraction(1)}) / den if res else ZERO
    return coeffs, res_e


# ---------------------------------------------------------------------------
# Dependencies


@dataclass(frozen=True)
class DependencySet:
    """What an expression can depend on, after normalization.

    ``variables`` are independent-variable names, ``jets`` the jet atoms that
    occur (anywhere, including inside function arguments), ``functions`` the
    function base names.  Parameters are constants and are not tracked.
    """

    variables: frozenset = field(default_factory=frozenset)
    jets: frozenset = field(default_factory=frozenset)
    functions: frozenset = field(default_factory=frozenset)

    def union(self, other: "DependencySet") -> "DependencySet":
        return DependencySet(
            self.variables | other.variables,
            self.jets | other.jets,
            self.functions | other.functions,
        )

    def within(self, variables: Iterable[str], jets: Iterable[Jet]) -> bool:
        """True when variables and jets both fall inside the allowed sets."""
        return self.variables <= frozenset(variables) and self.jets <= frozenset(jets)

    def describe(self) -> str:
        names = sorted(self.variables) + sorted(j.text for j in self.jets)
        return ", ".join(names) if names else "(constants only)"


_EMPTY_DEPS = DependencySet()


def _atom_deps(a: Atom) -> DependencySet:
    if isinstance(a, Var):
        return DependencySet(variables=frozenset((a.name,)))
    if isinstance(a, Param):
        return _EMPTY_DEPS
    if isinstance(a, Jet):
        return DependencySet(
            variables=frozenset(a.index), jets=frozenset((a,)))
    if isinstance(a, Func):
        out = DependencySet(functions=frozenset((a.name,)))
        for x in a.args:
            out = out.union(dependency_closure(x))
        return out
    if isinstance(a, Antideriv):
        return dependency_closure(a.integrand).union(
            DependencySet(variables=frozenset((a.var,))))
    if isinstance(a, Log):
        return dependency_closure(a.arg)
    raise UnsupportedAtomError(f"unknown atom {a!r}")


def dependency_closure(e: ExpressionLike) -> DependencySet:
    """The closed dependency set of the normal form of ``e``.

    Cancellation is honored because the walk happens over the normal form;
    composed function atoms contribute the closures of their arguments.
    """
    e = as_expression(e)
    if e._deps is not None:
        return e._deps
    out = _EMPTY_DEPS
    for m in chain(e._num, e._den):
        for a, _ in m.atoms:
            out = out.union(_atom_deps(a))
        if m.exparg is not None:
            out = out.union(dependency_closure(m.exparg))
    e._deps = out
    return out


def polynomial_jets(e: ExpressionLike, dep: str | None = None) -> frozenset:
    """Jet atoms occurring at the polynomial level of numerator or denominator.

    Unlike :func:`dependency_closure` this does not look inside function
    arguments: a composed symbol like ``T(y,z,w)`` is an opaque generator, so
    its ``w`` does not count.  This is the notion that matters when reading
    off coefficients of jet monomials.
    """
    e = as_expression(e)
    found = set()
    for m in chain(e._num, e._den):
        for a, _ in m.atoms:
            if isinstance(a, Jet) and (dep is None or a.dep == dep):
                found.add(a)
    return frozenset(found)


def closure_jets(e: ExpressionLike, dep: str) -> frozenset:
    """All jet atoms of ``dep`` in the closure, including inside arguments."""
    return frozenset(j for j in dependency_closure(e).jets if j.dep == dep)


def sign_canonical(e: ExpressionLike) -> Expression:
    """``e`` or ``-e``, whichever has a positive leading numerator coefficient.

    Vanishing conditions are sign-symmetric, so comparisons of "this
    expression must vanish" evidence go through this canonicalizer.
    """
    e = as_expression(e)
    if e.is_zero():
        return e
    if e._num[_plead(e._num)] < 0:
        return -e
    return e
