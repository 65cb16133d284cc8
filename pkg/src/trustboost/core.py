"""Shared domain types, quorum arithmetic and consensus-property predicates."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

ChainId = int
ProcessId = Hashable
ViewNumber = int
Tick = int
BinaryValue = int  # 0 or 1


class ConfigError(ValueError):
    """A scenario or world description is internally inconsistent."""


def binary(v: int) -> BinaryValue:
    if v not in (0, 1):
        raise ValueError(f"binary value must be 0 or 1, got {v!r}")
    return v


@dataclass(frozen=True)
class Quorums:
    m: int
    f: int
    vote_threshold: int
    check_threshold: int
    lite_threshold: int
    supermajority_ok: bool

    @property
    def abc_threshold(self) -> int:
        """Matching reads a passive ABC client needs.

        2f+1 at m = 3f+1. Above that, two values could each reach 2f+1
        from a split honest set plus the f faulty objects, so the count is
        raised to a strict majority of m+f. It is capped at m-f: a client
        must terminate with f objects silent, so a protocol claiming to
        tolerate f (even where m <= 3f) has to settle for m-f answers.
        """
        need = max(2 * self.f + 1, (self.m + self.f) // 2 + 1)
        return max(1, min(need, self.m - self.f))


def quorums_for(m: int, f: int) -> Quorums:
    if m < 1:
        raise ValueError(f"need at least one chain, got m={m}")
    if f < 0:
        raise ValueError(f"f must be non-negative, got {f}")
    two_thirds = (2 * m) // 3 + 1
    return Quorums(
        m=m,
        f=f,
        vote_threshold=two_thirds,
        check_threshold=m // 3 + 1,
        lite_threshold=two_thirds,
        supermajority_ok=m > 3 * f,
    )


def max_faults(m: int) -> int:
    """Largest f with m > 3f."""
    return (m - 1) // 3


@dataclass(frozen=True, order=True)
class Transaction:
    id: str
    payload: Any = field(compare=False, default=None)
    submitter: ProcessId = field(compare=False, default=0)


def payload_digest(payload: Any) -> str:
    return hashlib.blake2b(repr(payload).encode(), digest_size=4).hexdigest()


class TxFactory:
    """Deterministic transaction ids: running counter plus payload digest."""

    def __init__(self, prefix: str = "tx") -> None:
        self.prefix = prefix
        self._counter = itertools.count()

    def make(self, payload: Any, submitter: ProcessId = 0) -> Transaction:
        n = next(self._counter)
        return Transaction(f"{self.prefix}{n}-{payload_digest(payload)}", payload, submitter)


@dataclass(frozen=True)
class AgreementVerdict:
    ok: bool
    index: int | None = None
    conflict: tuple[Any, Any] | None = None
    # diagnosis only; never part of the ok decision
    commit_set_difference: frozenset = frozenset()

    def __bool__(self) -> bool:
        return self.ok


OK = AgreementVerdict(True)


def check_agreement(views: Sequence[Sequence[Hashable]]) -> AgreementVerdict:
    """Every pair of ledgers must be prefix-related.

    On violation, reports the smallest divergent index over all pairs and the
    conflicting ids ordered so the verdict does not depend on list order.
    """
    worst: AgreementVerdict | None = None
    for a, b in itertools.combinations(views, 2):
        for i, (x, y) in enumerate(zip(a, b)):
            if x != y:
                pair = tuple(sorted((x, y), key=repr))
                if worst is None or (i, repr(pair)) < (worst.index, repr(worst.conflict)):
                    worst = AgreementVerdict(False, i, pair)
                break
    return worst if worst is not None else OK


def check_weak_agreement(
    committed: Mapping[ProcessId, Iterable[Any]] | Sequence[Iterable[Any]],
    conflicts: Callable[[Any, Any], bool],
) -> AgreementVerdict:
    sets = list(committed.values()) if isinstance(committed, Mapping) else list(committed)
    sets = [set(s) for s in sets]
    union = set().union(*sets) if sets else set()
    inter = set.intersection(*sets) if sets else set()
    diff = frozenset(union - inter)
    ordered = sorted(union, key=_tx_key)
    for a, b in itertools.combinations(ordered, 2):
        if conflicts(a, b):
            return AgreementVerdict(False, None, (a, b), diff)
    return AgreementVerdict(True, commit_set_difference=diff)


def _tx_key(tx: Any) -> str:
    return str(getattr(tx, "id", tx))
