"""Scenario description, YAML round-trip, validation and random generation."""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from ..contract import TimingParams

SCHEMA = "payplace-scenario/1"

POLICIES = (
    "honest",
    "double_spend",
    "data_withhold",
    "rogue_key",
    "duplicate_registration",
    "stale_commit",
    "colluding_withdraw",
    "fabricated_missing",
    "omit_merchant",
)


class ScenarioError(ValueError):
    """Invalid scenario input; ``key`` names the offending field."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class MerchantSpec:
    name: str
    register: int = 1
    schedule: List[bool] = field(default_factory=list)  # per round, starting with round 1


@dataclass
class Deposit:
    tick: int
    consumer: str
    amount: int


@dataclass
class Payment:
    tick: int
    consumer: str
    shares: Dict[str, int]


@dataclass
class Withdrawal:
    tick: int
    merchant: str
    exit: bool = False


@dataclass
class Policy:
    name: str = "honest"
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    seed: int
    timing: TimingParams
    horizon: int
    consumers: List[str]
    merchants: List[MerchantSpec]
    deposits: List[Deposit] = field(default_factory=list)
    payments: List[Payment] = field(default_factory=list)
    withdrawals: List[Withdrawal] = field(default_factory=list)
    policy: Policy = field(default_factory=Policy)
    backend: str = "transparent"
    fee_bps: int = 0
    expect: List[Dict[str, Any]] = field(default_factory=list)

    def validate(self) -> "Scenario":
        t = self.timing
        if self.horizon < 2 * t.beta:
            raise ScenarioError("horizon", f"must be at least 2*beta ({2 * t.beta})")
        names = [m.name for m in self.merchants]
        if len(set(names)) != len(names) or len(set(self.consumers)) != len(self.consumers):
            raise ScenarioError("merchants", "actor names must be unique")
        if "operator" in names or set(names) & set(self.consumers):
            raise ScenarioError("merchants", "actor names clash")
        known_m, known_c = set(names), set(self.consumers)
        for i, d in enumerate(self.deposits):
            if d.consumer not in known_c:
                raise ScenarioError(f"deposits[{i}].consumer", f"undeclared consumer {d.consumer!r}")
            if d.amount <= 0:
                raise ScenarioError(f"deposits[{i}].amount", "must be positive")
        for i, p in enumerate(self.payments):
            if p.consumer not in known_c:
                raise ScenarioError(f"payments[{i}].consumer", f"undeclared consumer {p.consumer!r}")
            for m, a in p.shares.items():
                if m not in known_m:
                    raise ScenarioError(f"payments[{i}].shares", f"undeclared merchant {m!r}")
                if a <= 0:
                    raise ScenarioError(f"payments[{i}].shares", "amounts must be positive")
        for i, w in enumerate(self.withdrawals):
            if w.merchant not in known_m:
                raise ScenarioError(f"withdrawals[{i}].merchant", f"undeclared merchant {w.merchant!r}")
        if self.policy.name not in POLICIES:
            raise ScenarioError("policy.name", f"unknown policy {self.policy.name!r}")
        if self.backend not in ("transparent", "bls12-381"):
            raise ScenarioError("backend", f"unknown backend {self.backend!r}")
        return self

    # serialization

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["timing"] = asdict(self.timing)
        return {"schema": SCHEMA, **d}

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "Scenario":
        if not isinstance(raw, dict):
            raise ScenarioError("<root>", "expected a mapping")
        if raw.get("schema") != SCHEMA:
            raise ScenarioError("schema", f"expected {SCHEMA!r}")
        try:
            timing = TimingParams(**raw["timing"])
        except KeyError as exc:
            raise ScenarioError(str(exc.args[0]), "missing key") from None
        except (TypeError, ValueError) as exc:
            raise ScenarioError("timing", str(exc)) from None

        def build(key: str, kind, default=None):
            items = raw.get(key, default if default is not None else [])
            try:
                return [kind(**item) for item in items]
            except TypeError as exc:
                raise ScenarioError(key, str(exc)) from None

        try:
            scenario = cls(
                name=str(raw["name"]),
                seed=int(raw["seed"]),
                timing=timing,
                horizon=int(raw["horizon"]),
                consumers=[str(c) for c in raw["consumers"]],
                merchants=build("merchants", MerchantSpec),
                deposits=build("deposits", Deposit),
                payments=build("payments", Payment),
                withdrawals=build("withdrawals", Withdrawal),
                policy=Policy(**raw.get("policy", {})),
                backend=raw.get("backend", "transparent"),
                fee_bps=int(raw.get("fee_bps", 0)),
                expect=list(raw.get("expect", [])),
            )
        except KeyError as exc:
            raise ScenarioError(str(exc.args[0]), "missing key") from None
        return scenario.validate()

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ScenarioError("<yaml>", " ".join(str(exc).split())) from None
        return cls.from_dict(raw)


DEFAULT_TIMING = TimingParams(beta=20, gamma=6, delta=2, gamma_prime=3)


def open_ticks(timing: TimingParams, horizon: int) -> List[int]:
    return [t for t in range(horizon + 1) if timing.is_open(t)]


def random_scenario(seed: int, policy: Optional[str] = None, periods: int = 6,
                    max_consumers: int = 10, max_merchants: int = 8,
                    timing: TimingParams = DEFAULT_TIMING) -> Scenario:
    """Churn-heavy scenario drawn from a seeded generator."""
    rng = random.Random(seed)
    policy = policy or POLICIES[seed % len(POLICIES)]
    horizon = periods * timing.beta + timing.gamma + 2 * timing.delta + 2
    consumers = [f"c{i}" for i in range(1, rng.randint(2, max_consumers) + 1)]
    n_merchants = rng.randint(2, max_merchants)
    opens = open_ticks(timing, horizon)

    merchants = []
    for i in range(1, n_merchants + 1):
        late = rng.random() < 0.25
        reg = rng.choice([t for t in opens if t >= timing.beta] if late else [t for t in opens if t < timing.beta])
        schedule = [rng.random() < 0.75 for _ in range(periods)]
        merchants.append(MerchantSpec(f"m{i}", reg, schedule))

    deposits = []
    budget = {}
    for c in consumers:
        budget[c] = 0
        for _ in range(rng.randint(1, 3)):
            amt = rng.randint(10, 100)
            deposits.append(Deposit(rng.randint(0, horizon - timing.beta), c, amt))
            budget[c] += amt

    payments = []
    for _ in range(rng.randint(5, 25)):
        tick = rng.randint(1, horizon - 1)
        c = rng.choice(consumers)
        eligible = [m.name for m in merchants if m.register < tick]
        if not eligible:
            continue
        picks = rng.sample(eligible, k=min(len(eligible), rng.randint(1, 2)))
        payments.append(Payment(tick, c, {m: rng.randint(1, 15) for m in picks}))

    withdrawals = []
    for _ in range(rng.randint(0, 4)):
        m = rng.choice(merchants)
        later = [t for t in opens if t > max(m.register, timing.beta)]
        if later:
            withdrawals.append(Withdrawal(rng.choice(later), m.name, rng.random() < 0.3))

    params: Dict[str, Any] = {}
    if policy == "double_spend":
        params = {"factor": rng.choice([1.5, 2.0, 3.0])}
    elif policy == "data_withhold":
        params = {"from_round": rng.randint(1, periods)}
    elif policy in ("rogue_key", "duplicate_registration", "colluding_withdraw"):
        params = {"tick": rng.choice([t for t in opens if t > timing.beta]),
                  "collude": rng.random() < 0.5 if policy == "rogue_key" else False}
    elif policy in ("stale_commit", "fabricated_missing", "omit_merchant"):
        params = {"from_round": rng.randint(1, 3)}

    sort = lambda xs: sorted(xs, key=lambda x: (x.tick, getattr(x, "consumer", ""), getattr(x, "merchant", "")))
    return Scenario(
        name=f"random-{seed}", seed=seed, timing=timing, horizon=horizon,
        consumers=consumers, merchants=merchants, deposits=sort(deposits),
        payments=sort(payments), withdrawals=sort(withdrawals), policy=Policy(policy, params),
    ).validate()
