"""Radio messages and per-round node actions."""

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, Mapping, Optional, Tuple

from .encoding import Encoding

# Payload fields holding a single source token rather than a token set.
TOKEN_FIELDS = ("msg",)

# JSON objects only ever appear as these tagged values, so decoding is unambiguous.
SET_MARKER = "$set"
ENC_MARKER = "$enc"


def _normalise(value: Any) -> Any:
    if isinstance(value, (set, frozenset)):
        return frozenset(value)
    if isinstance(value, list):
        return tuple(value)
    return value


def _canonical(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def _jsonable(value: Any) -> Any:
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, frozenset):
        return {SET_MARKER: sorted((_jsonable(v) for v in value), key=_canonical)}
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, Encoding):
        return {ENC_MARKER: value.to_jsonable()}
    raise TypeError(f"unsupported payload value: {value!r}")


def _from_jsonable(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_from_jsonable(v) for v in value)
    if isinstance(value, dict):
        if set(value) == {SET_MARKER}:
            return frozenset(_from_jsonable(v) for v in value[SET_MARKER])
        if set(value) == {ENC_MARKER}:
            return Encoding.from_jsonable(value[ENC_MARKER])
        raise ValueError(f"untagged object in message payload: {value!r}")
    return value


@dataclass(frozen=True)
class Message:
    """A tagged record of named payload fields."""
    tag: str
    payload: Tuple[Tuple[str, Any], ...] = ()

    @classmethod
    def create(cls, tag: str, **fields: Any) -> "Message":
        return cls(tag, tuple(sorted((k, _normalise(v)) for k, v in fields.items())))

    @cached_property
    def fields(self) -> Dict[str, Any]:
        return dict(self.payload)

    def get(self, key: str, default: Any = None) -> Any:
        return self.fields.get(key, default)

    def __getitem__(self, key: str) -> Any:
        return self.fields[key]

    def __contains__(self, key: str) -> bool:
        return key in self.fields

    def with_fields(self, **fields: Any) -> "Message":
        merged = dict(self.fields)
        merged.update(fields)
        return Message.create(self.tag, **merged)

    def to_jsonable(self) -> Dict[str, Any]:
        return {"tag": self.tag, **{k: _jsonable(v) for k, v in self.payload}}

    def to_bytes(self) -> bytes:
        """Canonical serialization: sorted-key compact JSON."""
        return _canonical(self.to_jsonable()).encode()

    @classmethod
    def from_jsonable(cls, data: Mapping[str, Any]) -> "Message":
        fields = {k: _from_jsonable(v) for k, v in data.items() if k != "tag"}
        return cls.create(data["tag"], **fields)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Message":
        """
        Inverse of :meth:`to_bytes`.

        Raises:
            ValueError: If ``raw`` is not a serialized message
        """
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ValueError(f"not a serialized message: {e}") from e
        if not isinstance(data, dict) or not isinstance(data.get("tag"), str):
            raise ValueError("a serialized message is an object with a string tag")
        return cls.from_jsonable(data)

    @property
    def size(self) -> int:
        return len(self.to_bytes())

    def tokens(self) -> FrozenSet[str]:
        """Every source token carried by the message."""
        found = set()
        for key, value in self.payload:
            if isinstance(value, frozenset):
                found.update(v for v in value if isinstance(v, str))
            elif key in TOKEN_FIELDS and isinstance(value, str):
                found.add(value)
        return frozenset(found)

    def relabel(self, mapping: Mapping[str, str]) -> "Message":
        """Rename source tokens according to ``mapping``."""
        renamed = {}
        for key, value in self.payload:
            if isinstance(value, frozenset):
                value = frozenset(mapping.get(v, v) for v in value)
            elif key in TOKEN_FIELDS and isinstance(value, str):
                value = mapping.get(value, value)
            renamed[key] = value
        return Message.create(self.tag, **renamed)


@dataclass(frozen=True)
class Action:
    """A node's radio mode for one round: transmit ``message`` or listen."""
    message: Optional[Message] = None

    @classmethod
    def transmit(cls, message: Message) -> "Action":
        return cls(message)

    @property
    def transmits(self) -> bool:
        return self.message is not None


LISTEN = Action()


@dataclass(frozen=True)
class SourceSet:
    """Ordered source nodes ``s_1..s_k`` with their message tokens."""
    nodes: Tuple[int, ...]
    tokens: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ValueError("at least one source is required")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("sources must be distinct")
        if len(self.tokens) != len(self.nodes) or len(set(self.tokens)) != self.k:
            raise ValueError("every source needs its own token")

    @classmethod
    def of(cls, nodes: Iterable[int]) -> "SourceSet":
        ordered = tuple(nodes)
        return cls(ordered, tuple(f"mu_{v}" for v in ordered))

    @classmethod
    def everyone(cls, node_count: int) -> "SourceSet":
        return cls.of(range(node_count))

    @property
    def k(self) -> int:
        return len(self.nodes)

    def token_of(self, v: int) -> Optional[str]:
        try:
            return self.tokens[self.nodes.index(v)]
        except ValueError:
            return None

    def index_of(self, v: int) -> Optional[int]:
        """1-based source index of ``v``."""
        return self.nodes.index(v) + 1 if v in self.nodes else None

    def per_node(self, node_count: int) -> Tuple[Optional[str], ...]:
        return tuple(self.token_of(v) for v in range(node_count))

    def validate(self, node_count: int) -> None:
        if any(not 0 <= v < node_count for v in self.nodes):
            raise ValueError(f"sources must be nodes of a {node_count}-node graph")
