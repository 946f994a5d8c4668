"""Subtree encodings ``2^colour * 3^dist * prod p_{j+2}^{enc(child_j)}``.

Encodings are towers of exponents: a node two levels above a leaf already
has a value with dozens of digits, one level higher it cannot be written
out. :class:`Encoding` therefore keeps the factorisation itself and only
materialises the integer while it stays below :data:`EXACT_BITS` bits.
Equality is structural, which coincides with numeric equality because
factorisations are unique and every child exponent is at least 2.
"""

import math
from dataclasses import dataclass, field
from decimal import Context, Decimal
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import sympy

# Largest encoding, in bits, that is ever materialised as an int.
EXACT_BITS = 4096

# Canonical magnitudes keep the top value of a tower in [_TOWER_FLOOR, 2**_TOWER_FLOOR).
_TOWER_FLOOR = 1000.0

_LOG2_3 = math.log2(3)


@lru_cache(maxsize=None)
def child_prime(j: int) -> int:
    """Prime carrying the exponent of child ``j`` (0-based): 5, 7, 11, ..."""
    return int(sympy.prime(j + 3))


@dataclass(frozen=True)
class Encoding:
    """Factorised subtree encoding."""
    colour: int
    dist: int
    children: Tuple["Encoding", ...] = ()
    _hash: int = field(default=0, init=False, repr=False, compare=False)
    _exact: Optional[int] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.colour < 1:
            raise ValueError("colour must be positive")
        if self.dist < 0:
            raise ValueError("dist must be non-negative")
        object.__setattr__(self, "_hash", hash((self.colour, self.dist, self.children)))
        object.__setattr__(self, "_exact", self._materialise())

    def __hash__(self) -> int:
        return self._hash

    def _materialise(self) -> Optional[int]:
        bits = self.colour + self.dist * _LOG2_3
        for j, child in enumerate(self.children):
            # Child primes are at least 5, so an exponent above EXACT_BITS
            # alone exceeds the cap; compare as ints before going to float.
            if child._exact is None or child._exact > EXACT_BITS:
                return None
            bits += child._exact * math.log2(child_prime(j))
            if bits > EXACT_BITS:
                return None
        value = 2**self.colour * 3**self.dist
        for j, child in enumerate(self.children):
            value *= child_prime(j) ** child._exact  # type: ignore[operator]
        return value

    @property
    def is_exact(self) -> bool:
        return self._exact is not None

    @property
    def exact(self) -> Optional[int]:
        """The integer value, or ``None`` when it is too large to hold."""
        return self._exact

    def __int__(self) -> int:
        if self._exact is None:
            raise OverflowError("encoding is too large to materialise")
        return self._exact

    def divides(self, other: "Encoding") -> bool:
        """Whether ``self`` divides ``other`` as integers."""
        if self is other or self == other:
            return True
        if self._exact is not None and other._exact is not None:
            return other._exact % self._exact == 0
        if (
            self.colour > other.colour
            or self.dist > other.dist
            or len(self.children) > len(other.children)
        ):
            return False
        return all(value_le(a, b) for a, b in zip(self.children, other.children))

    def log2_magnitude(self) -> Tuple[int, float]:
        """
        Canonical tower ``(h, x)`` with ``log2(value) = 2^2^..^x`` (``h`` times).

        Level 0 holds values below ``2**1000``; higher levels keep ``x`` in
        ``[1000, 2**1000)``, so magnitudes compare lexicographically.
        """
        return _log2_magnitude(self)

    def __str__(self) -> str:
        if self._exact is not None:
            return str(self._exact)
        parts = [f"2^{self.colour}", f"3^{self.dist}"]
        parts.extend(f"{child_prime(j)}^({c})" for j, c in enumerate(self.children))
        return "*".join(parts)

    def to_jsonable(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"colour": self.colour, "dist": self.dist}
        if self.children:
            data["children"] = [c.to_jsonable() for c in self.children]
        return data

    @classmethod
    def from_jsonable(cls, data: Dict[str, Any]) -> "Encoding":
        children = tuple(cls.from_jsonable(c) for c in data.get("children", ()))
        return cls(data["colour"], data["dist"], children)


def _normalise(level: int, x: float) -> Tuple[int, float]:
    while level > 0 and x < _TOWER_FLOOR:
        level, x = level - 1, 2.0**x
    while x >= 2.0**_TOWER_FLOOR:
        level, x = level + 1, math.log2(x)
    return level, x


@lru_cache(maxsize=65536)
def _log2_magnitude(e: Encoding) -> Tuple[int, float]:
    if e.exact is not None:
        return _normalise(0, math.log2(e.exact))
    # log2(value) = colour + dist*log2(3) + sum(value(child_j) * log2(p_j))
    terms: List[Tuple[int, float]] = [(0, e.colour + e.dist * _LOG2_3)]
    for j, child in enumerate(e.children):
        level, x = _log2_magnitude(child)
        loglog_p = math.log2(math.log2(child_prime(j)))
        # value(child) * log2(p) as a tower: log2 of it is log2(value) + loglog_p
        if level == 0:
            terms.append(_normalise(1, x + loglog_p))
        else:
            terms.append((level + 1, x))
    top = max(terms)
    if top[0] == 0:
        return _normalise(0, sum(x for _, x in terms))
    if top[0] == 1:
        # Sum in the log domain; level-0 terms become 2^log2(x).
        exps = [x if level == 1 else math.log2(x) for level, x in terms if x > 0]
        peak = max(exps)
        total = peak + math.log2(sum(2.0 ** (x - peak) for x in exps))
        return _normalise(1, total)
    return top


def _log_value(e: Encoding, context: Context) -> Decimal:
    """Natural log of ``e`` when every child is exact."""
    total = context.multiply(Decimal(e.colour), context.ln(Decimal(2)))
    total = context.add(
        total, context.multiply(Decimal(e.dist), context.ln(Decimal(3)))
    )
    for j, child in enumerate(e.children):
        term = context.multiply(
            Decimal(child.exact), context.ln(Decimal(child_prime(j)))  # type: ignore
        )
        total = context.add(total, term)
    return total


def value_le(a: Encoding, b: Encoding) -> bool:
    """
    Numeric ``a <= b`` for two encodings.

    Exact integers compare directly and divisibility settles related
    values. Encodings whose children are all exact compare through a
    high-precision sum of logarithms. Larger towers compare by magnitude,
    with the structure as the final tie-break.
    """
    if a == b:
        return True
    if a.exact is not None and b.exact is not None:
        return a.exact <= b.exact
    if a.exact is not None:
        return True
    if b.exact is not None:
        return False
    if a.divides(b):
        return True
    if b.divides(a):
        return False
    if all(c.exact is not None for c in a.children + b.children):
        kids = a.children + b.children
        widest = max(c.exact.bit_length() for c in kids)  # type: ignore[union-attr]
        context = Context(prec=int(widest * 0.302) + 60)
        return _log_value(a, context) <= _log_value(b, context)
    ma, mb = _log2_magnitude(a), _log2_magnitude(b)
    if ma != mb:
        return ma < mb
    return _structure_key(a) <= _structure_key(b)


def _structure_key(e: Encoding) -> Tuple[Any, ...]:
    nested = tuple(_structure_key(c) for c in e.children)
    return (len(e.children), e.colour, e.dist, nested)


def enc_base(colour: int, dist: int) -> Encoding:
    """``2^colour * 3^dist``: the encoding of a node with no known children."""
    return Encoding(colour, dist)


def enc_combine(
    colour: int, dist: int, children_encs: Iterable[Encoding]
) -> Encoding:
    """``2^colour * 3^dist * prod_j p_{j+2}^{children_encs[j]}`` with ``p_3 = 5``."""
    return Encoding(colour, dist, tuple(children_encs))


def absorb_child_enc(
    children_encs: Sequence[Encoding], recv_enc: Encoding
) -> List[Encoding]:
    """
    Overwrite the first stored encoding dividing ``recv_enc``, or append it.

    Args:
        children_encs: Encodings saved so far
        recv_enc: Encoding just received from a child

    Returns:
        The updated list; the input is left untouched
    """
    updated = list(children_encs)
    for i, stored in enumerate(updated):
        if stored.divides(recv_enc):
            updated[i] = recv_enc
            return updated
    updated.append(recv_enc)
    return updated
