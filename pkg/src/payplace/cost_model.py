"""Analytic off-chain load and on-chain gas for notarization, against a ZK Rollup baseline."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, fields
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .merkle import proof_height

CSV_SCHEMA = "# payplace-cost/1"


@dataclass(frozen=True)
class WorkloadParams:
    n: int = 0
    p_r: int = 0
    p_u: int = 0
    c_r: int = 0
    c_u: int = 0
    p_m: int = 0
    p_m_prime: int = 0
    p_a: int = 0
    p_x: int = 0
    p_b: int = 0
    p_w: int = 0
    z_max: int = 3000
    snark_ops: Optional[int] = 150_000
    gates: Optional[int] = None
    wires: Optional[int] = None
    known_inputs: Optional[int] = None
    p_r_prev: Optional[int] = None  # leaves in the previously notarized tree; defaults to p_r

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, int) and v < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.p_m_prime > self.p_m:
            raise ValueError("p_m' cannot exceed p_m")
        if self.p_u > self.p_r:
            raise ValueError("p_u cannot exceed p_r")

    def proof_ops(self) -> int:
        """Pairings plus exponentiations per SNARK proof."""
        if None not in (self.gates, self.wires, self.known_inputs):
            return 4 * self.gates + self.wires - self.known_inputs
        return self.snark_ops or 0


@dataclass(frozen=True)
class GasConstants:
    pairing: int = 34_000
    pairing_base: int = 45_000
    g1_mul: int = 150
    keccak: int = 42
    hash_to_g0: int = 100
    fixed_overhead: int = 30_000
    per_new_missing_overhead: int = 10_000
    zkr_verify: int = 300_000
    calldata_per_byte: int = 16
    bytes_per_tx: int = 15
    zkr_overhead: int = 50_000


@dataclass(frozen=True)
class GasBreakdown:
    newly_missing: int
    pairing_equations: Tuple[int, ...]
    g1_muls: int
    hash_to_g0: int
    hashes: int
    pairing_gas: int
    g1_gas: int
    hash_to_g0_gas: int
    hash_gas: int
    overhead_gas: int

    @property
    def pairings(self) -> int:
        return sum(self.pairing_equations)

    @property
    def gas(self) -> int:
        return self.pairing_gas + self.g1_gas + self.hash_to_g0_gas + self.hash_gas + self.overhead_gas

    def counts(self) -> Tuple[int, int, int, int]:
        """(pairings, G1 multiplications, hash-to-G0, other hashes), as the contract counts them."""
        return self.pairings, self.g1_muls, self.hash_to_g0, self.hashes


def payplace_offchain_ops(w: WorkloadParams) -> Tuple[int, int]:
    """(operator, per-merchant) pairings plus exponentiations per period."""
    return 2 * w.p_r, 2 * w.c_u


def zkr_offchain_ops(w: WorkloadParams) -> int:
    if w.z_max <= 0:
        raise ValueError("z_max must be positive")
    return math.ceil(w.n / w.z_max) * w.proof_ops()


def newly_missing(w: WorkloadParams) -> int:
    k = w.p_m - w.p_m_prime - w.p_b - w.p_w
    if k < 0:
        warnings.warn(f"p_m - p_m' - p_b - p_w = {k} < 0; clamped to 0", stacklevel=3)
        k = 0
    return k


def payplace_gas(w: WorkloadParams, g: GasConstants = GasConstants()) -> GasBreakdown:
    k = newly_missing(w)
    equations = (2,) + ((k + 1,) if k else ())
    prev = w.p_r if w.p_r_prev is None else w.p_r_prev
    proof_hashes = k * (proof_height(w.p_r) + proof_height(prev))
    hashes = w.p_a + 2 * k + proof_hashes
    h2g0 = 1 + k
    g1 = w.p_m + w.p_x
    return GasBreakdown(
        newly_missing=k,
        pairing_equations=equations,
        g1_muls=g1,
        hash_to_g0=h2g0,
        hashes=hashes,
        pairing_gas=sum(g.pairing * e + g.pairing_base for e in equations),
        g1_gas=g.g1_mul * g1,
        hash_to_g0_gas=g.hash_to_g0 * h2g0,
        hash_gas=g.keccak * hashes,
        overhead_gas=g.fixed_overhead + g.per_new_missing_overhead * (w.p_m - w.p_m_prime),
    )


def zkr_gas(w: WorkloadParams, g: GasConstants = GasConstants()) -> int:
    if w.z_max <= 0:
        raise ValueError("z_max must be positive")
    proofs = math.ceil(w.n / w.z_max)
    return proofs * (g.zkr_verify + g.zkr_overhead) + w.n * g.bytes_per_tx * g.calldata_per_byte


# sweeps

COLUMNS = (
    "figure", "series", "n", "p_r", "c_u", "p_m", "p_m_prime", "p_a", "p_x", "p_b", "p_w", "z_max",
    "newly_missing", "pairings", "g1_muls", "hash_to_g0", "hashes",
    "payplace_gas", "zkr_gas", "gas_ratio",
    "payplace_operator_ops", "payplace_merchant_ops", "zkr_operator_ops",
)


@dataclass(frozen=True)
class GridPoint:
    figure: str
    series: str
    params: WorkloadParams


def evaluate(point: GridPoint, g: GasConstants = GasConstants()) -> Dict[str, object]:
    w = point.params
    b = payplace_gas(w, g)
    zg = zkr_gas(w, g)
    op_ops, mer_ops = payplace_offchain_ops(w)
    return {
        "figure": point.figure, "series": point.series, "n": w.n, "p_r": w.p_r, "c_u": w.c_u,
        "p_m": w.p_m, "p_m_prime": w.p_m_prime, "p_a": w.p_a, "p_x": w.p_x, "p_b": w.p_b,
        "p_w": w.p_w, "z_max": w.z_max, "newly_missing": b.newly_missing, "pairings": b.pairings,
        "g1_muls": b.g1_muls, "hash_to_g0": b.hash_to_g0, "hashes": b.hashes,
        "payplace_gas": b.gas, "zkr_gas": zg, "gas_ratio": f"{b.gas / zg:.6g}" if zg else "",
        "payplace_operator_ops": op_ops, "payplace_merchant_ops": mer_ops,
        "zkr_operator_ops": zkr_offchain_ops(w),
    }


def sweep(grid: Sequence[GridPoint], g: GasConstants = GasConstants()) -> List[Dict[str, object]]:
    if not grid:
        raise ValueError("empty grid")
    return [evaluate(p, g) for p in grid]


def to_csv(rows: Iterable[Dict[str, object]]) -> str:
    buf = io.StringIO()
    buf.write(CSV_SCHEMA + "\n")
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def read_csv(text: str) -> List[Dict[str, str]]:
    lines = text.splitlines()
    if not lines or lines[0] != CSV_SCHEMA:
        raise ValueError("missing cost CSV schema line")
    return list(csv.DictReader(lines[1:]))


# figure grids

FIG_N = tuple(10 ** j for j in range(2, 11))


def fig5_grid(p_rs: Sequence[int] = (100, 10_000, 1_000_000), ns: Sequence[int] = FIG_N) -> List[GridPoint]:
    """Off-chain load. Max c_u: one unique consumer per order. Lim c_u: additionally capped at p_r."""
    out = []
    for p_r in p_rs:
        for n in ns:
            max_cu = max(math.ceil(n / p_r), 1)
            for label, cu in (("max_cu", max_cu), ("lim_cu", min(max_cu, p_r))):
                out.append(GridPoint("5", f"p_r={p_r},{label}", WorkloadParams(n=n, p_r=p_r, c_u=cu)))
    return out


def fig6_grid(p_r: int = 1000, p_ms: Sequence[int] = (200, 400, 600, 800, 1000),
              diffs: Sequence[int] = (0, 25, 50, 100, 200)) -> List[GridPoint]:
    out = []
    for diff in diffs:
        for p_m in p_ms:
            if diff > p_m:
                continue
            w = WorkloadParams(n=10_000, p_r=p_r, p_m=p_m, p_m_prime=p_m - diff)
            out.append(GridPoint("6", f"p_m={p_m}", w))
    return out


def fig7_grid(p_rs: Sequence[int] = (1000, 1_000_000), fractions: Sequence[float] = (0.001, 0.01, 0.1),
              z_max: int = 3000) -> List[GridPoint]:
    """Worst case p_m' = 0. n covers powers of ten and exact multiples of z_max."""
    ns = sorted(set(FIG_N) | {z_max * 10 ** j for j in range(0, 7)})
    out = []
    for p_r in p_rs:
        for frac in fractions:
            p_m = max(int(round(p_r * frac)), 1)
            for n in ns:
                out.append(GridPoint("7", f"p_r={p_r},p_m={p_m}",
                                     WorkloadParams(n=n, p_r=p_r, p_m=p_m, z_max=z_max)))
    return out


FIGURES = {"5": fig5_grid, "6": fig6_grid, "7": fig7_grid}


def figure_csv(fig: str, g: GasConstants = GasConstants()) -> str:
    try:
        grid = FIGURES[fig]()
    except KeyError:
        raise ValueError(f"unknown figure {fig!r}; choose from {sorted(FIGURES)}") from None
    return to_csv(sweep(grid, g))


def relative_spread(values: Sequence[int]) -> float:
    lo, hi = min(values), max(values)
    return (hi - lo) / lo if lo else math.inf
