"""Off-chain replicas of contract state, rebuilt from the event log."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set

from .bls_crypto import PublicKey
from .contract import Deposited, Notarized, Registered, Withdrew
from .merkle import PaymentSet


@dataclass
class ContractMirror:
    """Replays events in order; re-feeding an already-seen prefix is a no-op."""

    cursor: int = 0
    registered: Set[PublicKey] = field(default_factory=set)
    fresh: Set[PublicKey] = field(default_factory=set)
    withdrawn: Set[PublicKey] = field(default_factory=set)
    exited: Set[PublicKey] = field(default_factory=set)
    missing: Dict[PublicKey, int] = field(default_factory=dict)
    missing_sets: Dict[PublicKey, PaymentSet] = field(default_factory=dict)
    deposits: Dict[PublicKey, int] = field(default_factory=dict)
    withdrawn_from: Dict[PublicKey, int] = field(default_factory=dict)
    last_root: Optional[bytes] = None
    last_submission: int = -1

    def sync(self, log: Sequence[object],
             on_event: Optional[Callable[[object], None]] = None) -> List[object]:
        """Apply unseen events; ``on_event`` runs after each one, against the updated mirror."""
        new = list(log[self.cursor:])
        for ev in new:
            self.apply(ev)
            self.cursor += 1
            if on_event is not None:
                on_event(ev)
        return new

    def apply(self, ev: object) -> None:
        if isinstance(ev, Deposited):
            self.deposits[ev.consumer] = ev.total
        elif isinstance(ev, Registered):
            self.registered.add(ev.merchant)
            self.fresh.add(ev.merchant)
        elif isinstance(ev, Withdrew):
            for d in ev.debits:
                self.withdrawn_from[d.consumer] = d.withdrawn
            self.missing.pop(ev.merchant, None)
            self.missing_sets.pop(ev.merchant, None)
            if ev.exit:
                self.exited.add(ev.merchant)
                self.registered.discard(ev.merchant)
            else:
                self.withdrawn.add(ev.merchant)
        elif isinstance(ev, Notarized):
            for p in ev.removed:
                self.missing.pop(p, None)
                self.missing_sets.pop(p, None)
            self.missing = {p: gap + 1 for p, gap in self.missing.items()}
            for p, ps in ev.added:
                self.missing[p] = 1
                self.missing_sets[p] = ps
            self.fresh.clear()
            self.withdrawn.clear()
            self.exited.clear()
            self.last_root = ev.root
            self.last_submission = ev.tick

    def active_merchants(self) -> List[PublicKey]:
        """Merchants that get a leaf in the next block."""
        return sorted(self.registered)

    def w_star(self, consumer: PublicKey) -> int:
        return self.withdrawn_from.get(consumer, 0)

    def deposited(self, consumer: PublicKey) -> int:
        return self.deposits.get(consumer, 0)
