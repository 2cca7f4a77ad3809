"""Exact finite Markov kernels and the Markov-category structure on them.

A kernel ``k: A -> B`` stores, for every input ``a``, a probability vector
over ``B``; ``k(b, a)`` reads as the probability of ``b`` given ``a``.
All entries are :class:`fractions.Fraction`, so every equation between
kernels is decided exactly.

Products are flat: ``product(product(A, B), C)`` and ``product(A, product(B, C))``
build the same space, and the one-point space ``UNIT`` is dropped from
products. Elements of a product are tuples of factor elements.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Hashable, Mapping, Sequence

__all__ = [
    "FinSpace",
    "UNIT",
    "product",
    "power",
    "split",
    "join",
    "Kernel",
    "dist",
    "point",
    "uniform",
    "compose",
    "tensor",
    "identity",
    "copy",
    "delete",
    "swap",
    "rearrange",
    "structural",
    "marginalize",
    "disintegrate",
    "bayes_invert",
    "is_deterministic",
    "kernels_equal",
    "uniform_fill",
    "parse_rational",
    "format_rational",
    "SpaceMismatchError",
    "CompositionError",
    "NotAProductError",
    "NotStochasticError",
]


class SpaceMismatchError(ValueError):
    """Two kernels or a kernel and a space do not line up."""


class CompositionError(SpaceMismatchError):
    def __init__(self, left: FinSpace, right: FinSpace):
        super().__init__(f"cannot compose: output space {left.name} does not match input space {right.name}")
        self.left = left
        self.right = right


class NotAProductError(ValueError):
    pass


class NotStochasticError(ValueError):
    pass


@dataclass(frozen=True)
class FinSpace:
    """A finite set of labelled outcomes.

    ``factors`` is ``None`` for an atomic space, ``()`` for the unit space and
    the tuple of atomic factors for a product.
    """

    name: str
    elements: tuple
    factors: tuple[FinSpace, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise ValueError(f"space {self.name!r} has no elements")
        if len(set(self.elements)) != len(self.elements):
            raise ValueError(f"space {self.name!r} has repeated labels")

    @cached_property
    def _index(self) -> dict:
        return {e: i for i, e in enumerate(self.elements)}

    def index(self, element: Hashable) -> int:
        try:
            return self._index[element]
        except KeyError:
            raise KeyError(f"{element!r} is not an element of {self.name}") from None

    def __contains__(self, element) -> bool:
        return element in self._index

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def parts(self) -> tuple[FinSpace, ...]:
        """Atomic factors; ``(self,)`` for an atomic space."""
        return (self,) if self.factors is None else self.factors

    @property
    def is_product(self) -> bool:
        return self.factors is not None and len(self.factors) >= 2

    def __repr__(self) -> str:
        return f"FinSpace({self.name!r}, {len(self.elements)} elements)"


UNIT = FinSpace("1", ((),), ())


def product(*spaces: FinSpace) -> FinSpace:
    parts = [p for s in spaces for p in s.parts]
    if not parts:
        return UNIT
    if len(parts) == 1:
        return parts[0]
    return FinSpace(
        "⊗".join(p.name for p in parts),
        tuple(itertools.product(*(p.elements for p in parts))),
        tuple(parts),
    )


def power(space: FinSpace, n: int) -> FinSpace:
    if n < 0:
        raise ValueError("power must be nonnegative")
    return product(*([space] * n))


def _flat(space: FinSpace, element) -> tuple:
    if space.factors is None:
        return (element,)
    return tuple(element)


def _assemble(space: FinSpace, flat: Sequence) -> Any:
    if space.factors is None:
        return flat[0]
    return tuple(flat)


def split(element, spaces: Sequence[FinSpace]) -> tuple:
    """Cut an element of ``product(*spaces)`` into one element per space."""
    flat = _flat(product(*spaces), element)
    out, i = [], 0
    for s in spaces:
        n = len(s.parts)
        out.append(_assemble(s, flat[i : i + n]))
        i += n
    return tuple(out)


def join(elements: Sequence, spaces: Sequence[FinSpace]) -> Any:
    """Inverse of :func:`split`."""
    flat = [x for e, s in zip(elements, spaces) for x in _flat(s, e)]
    return _assemble(product(*spaces), flat)


_ZERO = Fraction(0)
_ONE = Fraction(1)

_RATIONAL = re.compile(r"^\s*(-?\d+)(?:\s*/\s*(\d+))?\s*$")


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"p/q"`` or an integer string. Decimals are refused."""
    if isinstance(text, (int, Fraction)) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"expected a rational string, got {text!r}")
    m = _RATIONAL.match(text)
    if not m:
        hint = ""
        if re.match(r"^\s*-?\d*\.\d*", text):
            hint = ' (decimals are not exact; write a fraction such as "3/4")'
        raise ValueError(f"not an exact rational: {text!r}{hint}")
    num, den = m.groups()
    if den is not None and int(den) == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(int(num), int(den) if den else 1)


def format_rational(x: Fraction) -> str:
    return str(Fraction(x))


def uniform_fill(space: FinSpace) -> tuple[Fraction, ...]:
    """Row used wherever a conditional is unconstrained (zero mass)."""
    n = len(space)
    return (Fraction(1, n),) * n


@dataclass(frozen=True)
class Kernel:
    """Exact Markov kernel ``src -> dst``; ``cols[i]`` is the distribution for ``src.elements[i]``."""

    src: FinSpace
    dst: FinSpace
    cols: tuple[tuple[Fraction, ...], ...] = field(repr=False)

    def __post_init__(self):
        cols = tuple(tuple(p if type(p) is Fraction else Fraction(p) for p in col) for col in self.cols)
        object.__setattr__(self, "cols", cols)
        if len(cols) != len(self.src):
            raise ValueError(f"kernel needs {len(self.src)} columns, got {len(cols)}")
        n = len(self.dst)
        for a, col in zip(self.src.elements, cols):
            if len(col) != n:
                raise ValueError(f"column {a!r} has {len(col)} entries, expected {n}")
            nonzero = [p for p in col if p]
            if any(p < 0 or p > 1 for p in nonzero):
                raise NotStochasticError(f"column {a!r} has an entry outside [0, 1]")
            total = sum(nonzero, _ZERO)
            if total != 1:
                raise NotStochasticError(f"column {a!r} sums to {total}, not 1")

    @classmethod
    def from_columns(cls, src: FinSpace, dst: FinSpace, table: Mapping[Any, Mapping[Any, Any]]) -> Kernel:
        """Build from ``{a: {b: p}}``; omitted entries are zero."""
        cols = []
        for a in src.elements:
            col = [Fraction(0)] * len(dst)
            for b, p in table.get(a, {}).items():
                col[dst.index(b)] += parse_rational(p)
            cols.append(col)
        for a in table:
            src.index(a)
        return cls(src, dst, cols)

    @classmethod
    def from_function(cls, src: FinSpace, dst: FinSpace, fn: Callable[[Any], Any]) -> Kernel:
        cols = []
        for a in src.elements:
            col = [_ZERO] * len(dst)
            col[dst.index(fn(a))] = _ONE
            cols.append(col)
        return cls(src, dst, cols)

    def __call__(self, b, a=()) -> Fraction:
        return self.cols[self.src.index(a)][self.dst.index(b)]

    def column(self, a=()) -> dict:
        """Nonzero entries of the distribution at ``a``."""
        return {b: p for b, p in zip(self.dst.elements, self.cols[self.src.index(a)]) if p}

    def support(self, a=()) -> list:
        return list(self.column(a))

    def items(self):
        """Yield ``(a, b, p)`` for every entry, zeros included."""
        for a, col in zip(self.src.elements, self.cols):
            for b, p in zip(self.dst.elements, col):
                yield a, b, p

    def __rshift__(self, other: Kernel) -> Kernel:
        return compose(self, other)

    def __matmul__(self, other: Kernel) -> Kernel:
        return tensor(self, other)

    def to_table(self) -> dict:
        return {a: {b: p for b, p in zip(self.dst.elements, col) if p} for a, col in zip(self.src.elements, self.cols)}


def dist(space: FinSpace, probs: Mapping[Any, Any]) -> Kernel:
    """A distribution, i.e. a kernel out of ``UNIT``."""
    return Kernel.from_columns(UNIT, space, {(): probs})


def point(space: FinSpace, element) -> Kernel:
    return dist(space, {element: 1})


def uniform(space: FinSpace) -> Kernel:
    return Kernel(UNIT, space, (uniform_fill(space),))


def compose(f: Kernel, g: Kernel) -> Kernel:
    """``f`` then ``g``: ``(c | a) = sum_b f(b | a) g(c | b)``."""
    if f.dst != g.src:
        raise CompositionError(f.dst, g.src)
    n = len(g.dst)
    cols = []
    for fcol in f.cols:
        out = [Fraction(0)] * n
        for p, gcol in zip(fcol, g.cols):
            if p:
                for j, q in enumerate(gcol):
                    if q:
                        out[j] += p * q
        cols.append(out)
    return Kernel(f.src, g.dst, cols)


def tensor(f: Kernel, g: Kernel) -> Kernel:
    src = product(f.src, g.src)
    dst = product(f.dst, g.dst)
    gidx = {a: i for i, a in enumerate(g.src.elements)}
    fidx = {a: i for i, a in enumerate(f.src.elements)}
    cols = []
    for e in src.elements:
        a, c = split(e, (f.src, g.src))
        fcol, gcol = f.cols[fidx[a]], g.cols[gidx[c]]
        cols.append([p * q for p in fcol for q in gcol])
    # itertools.product order of dst matches the nested loop above
    return Kernel(src, dst, cols)


def identity(space: FinSpace) -> Kernel:
    return Kernel.from_function(space, space, lambda a: a)


def copy(space: FinSpace) -> Kernel:
    pair = (space, space)
    return Kernel.from_function(space, product(space, space), lambda a: join((a, a), pair))


def delete(space: FinSpace) -> Kernel:
    return Kernel.from_function(space, UNIT, lambda a: ())


def rearrange(spaces: Sequence[FinSpace], order: Sequence[int]) -> Kernel:
    """Deterministic kernel permuting (or dropping/duplicating) tensor factors.

    ``order`` lists, for each output factor, the index of the input factor it
    takes its value from.
    """
    spaces = tuple(spaces)
    out_spaces = tuple(spaces[i] for i in order)

    def move(e):
        parts = split(e, spaces)
        return join([parts[i] for i in order], out_spaces)

    return Kernel.from_function(product(*spaces), product(*out_spaces), move)


def swap(a: FinSpace, b: FinSpace) -> Kernel:
    return rearrange((a, b), (1, 0))


def structural(kind: str, *spaces: FinSpace) -> Kernel:
    builders = {"identity": (identity, 1), "copy": (copy, 1), "delete": (delete, 1), "swap": (swap, 2)}
    try:
        build, arity = builders[kind]
    except KeyError:
        raise ValueError(f"unknown structural kernel {kind!r}") from None
    if len(spaces) != arity:
        raise ValueError(f"{kind} takes {arity} space(s), got {len(spaces)}")
    return build(*spaces)


def _groups(k: Kernel, groups: Sequence[FinSpace] | None) -> tuple[FinSpace, ...]:
    if groups is None:
        if k.dst.factors is None or len(k.dst.factors) < 2:
            raise NotAProductError(f"{k.dst.name} is not a product space")
        return k.dst.factors
    groups = tuple(groups)
    if product(*groups) != k.dst:
        raise NotAProductError(f"{k.dst.name} is not the product of {[g.name for g in groups]}")
    return groups


def marginalize(k: Kernel, keep: int | Sequence[int], groups: Sequence[FinSpace] | None = None) -> Kernel:
    """Sum out every output factor except those in ``keep`` (kept in the given order).

    ``groups`` describes how ``k.dst`` splits into factors; by default it is
    the flat list of atomic factors.
    """
    groups = _groups(k, groups)
    keep = (keep,) if isinstance(keep, int) else tuple(keep)
    return compose(k, rearrange(groups, keep))


def disintegrate(
    q: Kernel, groups: Sequence[FinSpace] | None = None, fill: Callable[[FinSpace], tuple] = uniform_fill
) -> tuple[Kernel, Kernel]:
    """Split ``q: Z -> A⊗B`` into a marginal ``Z -> A`` and a conditional ``Z⊗A -> B``.

    With ``groups`` of length > 2, ``A`` is the first group and ``B`` the rest.
    """
    groups = _groups(q, groups)
    a_space, b_space = groups[0], product(*groups[1:])
    marginal = marginalize(q, 0, groups)
    cond_src = product(q.src, a_space)
    cols = []
    for e in cond_src.elements:
        z, a = split(e, (q.src, a_space))
        m = marginal(a, z)
        if m == 0:
            cols.append(fill(b_space))
        else:
            cols.append([q(join((a, b), (a_space, b_space)), z) / m for b in b_space.elements])
    return marginal, Kernel(cond_src, b_space, cols)


def bayes_invert(prior: Kernel, f: Kernel, fill: Callable[[FinSpace], tuple] = uniform_fill) -> Kernel:
    """Parametrised Bayesian inverse of ``f`` w.r.t. ``prior: Z -> A``, a kernel ``Z⊗B -> A``."""
    if prior.dst != f.src:
        raise CompositionError(prior.dst, f.src)
    z_space, a_space, b_space = prior.src, f.src, f.dst
    src = product(z_space, b_space)
    cols = []
    for e in src.elements:
        z, b = split(e, (z_space, b_space))
        weights = [prior(a, z) * f(b, a) for a in a_space.elements]
        evidence = sum(weights)
        cols.append(fill(a_space) if evidence == 0 else [w / evidence for w in weights])
    return Kernel(src, a_space, cols)


def _is_point_mass_everywhere(f: Kernel) -> bool:
    return all(sum(1 for p in col if p) == 1 for col in f.cols)


def _copy_equation_holds(f: Kernel) -> bool:
    return compose(f, copy(f.dst)) == compose(copy(f.src), tensor(f, f))


def is_deterministic(f: Kernel, method: str = "copy") -> bool:
    """Decide determinism by the copy equation (``"copy"``) or by point-mass columns (``"columns"``)."""
    if method == "copy":
        return _copy_equation_holds(f)
    if method == "columns":
        return _is_point_mass_everywhere(f)
    raise ValueError(f"unknown method {method!r}")


def kernels_equal(f: Kernel, g: Kernel) -> bool:
    if f.src != g.src or f.dst != g.dst:
        raise SpaceMismatchError(
            f"cannot compare {f.src.name} -> {f.dst.name} with {g.src.name} -> {g.dst.name}"
        )
    return f.cols == g.cols


def label(element) -> str:
    """Render an element (possibly a product tuple) as a flat string."""
    if isinstance(element, tuple):
        return ",".join(label(x) for x in element) if element else "*"
    return str(element)


def kernel_to_json(k: Kernel) -> dict:
    return {
        label(a): {label(b): format_rational(p) for b, p in zip(k.dst.elements, col) if p}
        for a, col in zip(k.src.elements, k.cols)
    }


def kernel_from_json(src: FinSpace, dst: FinSpace, table: Mapping[str, Mapping[str, str]]) -> Kernel:
    src_lookup = {label(a): a for a in src.elements}
    dst_lookup = {label(b): b for b in dst.elements}
    resolved: dict = {}
    for a, col in table.items():
        if a not in src_lookup:
            raise KeyError(f"{a!r} is not an element of {src.name}")
        inner = resolved.setdefault(src_lookup[a], {})
        for b, p in col.items():
            if b not in dst_lookup:
                raise KeyError(f"{b!r} is not an element of {dst.name}")
            inner[dst_lookup[b]] = p
    return Kernel.from_columns(src, dst, resolved)
