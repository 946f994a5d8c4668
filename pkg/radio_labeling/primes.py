"""Prime arithmetic and the encoding-to-delay policies."""

import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Tuple

import sympy

from .config import PolicyMode
from .encoding import Encoding
from .errors import PrimeBoundExceededError

logger = logging.getLogger(__name__)

DEFAULT_PRIME_BOUND = 10_000_000


def nth_prime(i: int, bound: int = DEFAULT_PRIME_BOUND) -> int:
    """
    The ``i``-th prime, ``p_1 = 2``.

    Args:
        i: 1-based prime index
        bound: Largest index this call may compute

    Returns:
        The prime

    Raises:
        ValueError: If ``i`` is not positive
        PrimeBoundExceededError: If ``i`` exceeds ``bound``
    """
    if i < 1:
        raise ValueError(f"prime index must be positive, got {i}")
    if i > bound:
        raise PrimeBoundExceededError(i, bound)
    return int(sympy.prime(i))


class DelayPolicy(ABC):
    """Maps subtree encodings to prime transmission delays within one run."""

    mode: PolicyMode

    @abstractmethod
    def delay_for(self, enc: Encoding) -> int:
        """Delay of a node whose current encoding is ``enc``."""

    @abstractmethod
    def fresh(self) -> "DelayPolicy":
        """An unused policy with the same parameters."""


class FaithfulPrime(DelayPolicy):
    """``delay = p_enc``, guarded by a bound on the prime index."""

    mode = PolicyMode.FAITHFUL

    def __init__(self, bound: int = DEFAULT_PRIME_BOUND):
        self.bound = bound

    def delay_for(self, enc: Encoding) -> int:
        if enc.exact is None or enc.exact > self.bound:
            logger.error("Faithful delay for encoding %s exceeds the bound", enc)
            raise PrimeBoundExceededError(str(enc), self.bound)
        return nth_prime(enc.exact, self.bound)

    def fresh(self) -> "FaithfulPrime":
        return FaithfulPrime(self.bound)


class RegistryPrime(DelayPolicy):
    """
    Assigns 3, 5, 7, 11, ... to encodings in order of first request.

    Equal encodings always get the same prime and distinct encodings
    distinct primes. Requests must come in a deterministic order; the
    engine issues them in (round, node) order.
    """

    mode = PolicyMode.REGISTRY

    def __init__(self) -> None:
        self._registry: Dict[Encoding, int] = {}
        self._order: List[Tuple[Encoding, int]] = []
        self._next = 3

    def delay_for(self, enc: Encoding) -> int:
        prime = self._registry.get(enc)
        if prime is None:
            prime = self._next
            self._registry[enc] = prime
            self._order.append((enc, prime))
            self._next = int(sympy.nextprime(prime))
        return prime

    @property
    def registrations(self) -> List[Tuple[Encoding, int]]:
        return list(self._order)

    def fresh(self) -> "RegistryPrime":
        return RegistryPrime()

    def __len__(self) -> int:
        return len(self._registry)


def make_policy(mode: PolicyMode, bound: int = DEFAULT_PRIME_BOUND) -> DelayPolicy:
    """Build a delay policy from its configured mode."""
    if PolicyMode(mode) is PolicyMode.FAITHFUL:
        return FaithfulPrime(bound)
    return RegistryPrime()
