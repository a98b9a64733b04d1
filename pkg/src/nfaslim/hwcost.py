"""Analytical resource and latency model for an STE overlay.

Logic cost is linear in states and in provisioned fanout slots, memory cost
follows the config-vector record size, and latency trades a serialization
term (fanout too small for the widest state) against a routing term that
grows with fanout. The numbers are a model, not synthesis results.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, replace

from .core import ScoredNfa, require_valid
from .formats import FanoutViolation, config_record_size

URAM_BITS = 288 * 1024


@dataclass(frozen=True)
class CostParams:
    lut_per_state: float = 0.0
    lut_per_fanout_slot: float = 0.0
    reg_per_state: float = 0.0
    reg_per_fanout_slot: float = 0.0
    uram_bits_per_block: int = URAM_BITS
    bits_per_transition: int = 48  # u32 destination + u16 score
    base_cycles_per_symbol: float = 1.0
    serialization_penalty: float = 1.0
    routing_penalty_per_fanout: float = 1.0 / 64

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0 or not math.isfinite(v):
                raise ValueError(f"{k} must be finite and non-negative, got {v}")
        if self.uram_bits_per_block <= 0:
            raise ValueError("uram_bits_per_block must be positive")

    def record_bits(self, max_fanout: int) -> int:
        fixed = 8 * (config_record_size(max_fanout) - 6 * max_fanout)
        return fixed + self.bits_per_transition * max_fanout


@dataclass(frozen=True)
class ResourceEstimate:
    luts: int
    registers: int
    uram_blocks: int
    min_latency_cycles: int
    max_latency_cycles: int


def throughput(input_len: int, max_cycles: int) -> float:
    """Input symbols per cycle under the worst-case latency."""
    return input_len / max_cycles if max_cycles else 0.0


def fit_linear(n_states: int, anchors) -> tuple[float, float]:
    """Solve ``n*(a + b*F) = value`` for (a, b) through two (F, value) points."""
    (f1, v1), (f2, v2) = anchors
    if f1 == f2:
        raise ValueError("anchor fanouts must differ")
    b = (v1 - v2) / (n_states * (f1 - f2))
    a = v1 / n_states - b * f1
    if a < 0 or b < 0:
        raise ValueError("anchors imply negative coefficients")
    return a, b


# Anchors: a 64K-state design at its generated fanout (256) versus the same
# design pruned and re-provisioned at fanout 16.
HW_ANCHOR_STATES = 65536
HW_ANCHOR_LUTS = ((256, 47000.0), (16, 7000.0))
HW_ANCHOR_REGS = ((256, 30000.0), (16, 2000.0))


def _paper2025_hw() -> CostParams:
    la, lb = fit_linear(HW_ANCHOR_STATES, HW_ANCHOR_LUTS)
    ra, rb = fit_linear(HW_ANCHOR_STATES, HW_ANCHOR_REGS)
    return CostParams(lut_per_state=la, lut_per_fanout_slot=lb,
                      reg_per_state=ra, reg_per_fanout_slot=rb)


COST_PROFILES = {"paper2025-hw": _paper2025_hw()}


def cost_profile(name: str, **overrides) -> CostParams:
    try:
        p = COST_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown cost profile {name!r}; choose from {sorted(COST_PROFILES)}")
    return replace(p, **overrides) if overrides else p


def provisioned_fanout(nfa: ScoredNfa, minimum: int = 1) -> int:
    """Smallest power of two covering the widest state."""
    need = max(minimum, nfa.max_out_degree(), 1)
    return 1 << (need - 1).bit_length()


def _check_fanout(nfa: ScoredNfa, max_fanout: int) -> int:
    if max_fanout < 1:
        raise ValueError("max_fanout must be >= 1")
    widest = nfa.max_out_degree()
    if widest > max_fanout:
        worst = int(nfa.out_degrees().argmax())
        raise FanoutViolation(nfa.states[worst].id, widest, max_fanout)
    return widest


def latency_bounds(nfa: ScoredNfa, max_fanout: int, input_len: int,
                   p: CostParams) -> tuple[int, int]:
    require_valid(nfa)
    widest = _check_fanout(nfa, max_fanout)
    if input_len < 0:
        raise ValueError("input_len must be non-negative")
    if input_len == 0 or nfa.n_states == 0:
        return 0, 0
    serial = p.serialization_penalty * math.ceil(widest / max_fanout)
    lo = math.ceil(p.base_cycles_per_symbol + serial)
    hi = math.ceil(p.base_cycles_per_symbol + serial + p.routing_penalty_per_fanout * max_fanout)
    return lo * input_len, hi * input_len


def estimate_resources(nfa: ScoredNfa, max_fanout: int, p: CostParams,
                       input_len: int = 1) -> ResourceEstimate:
    require_valid(nfa)
    _check_fanout(nfa, max_fanout)
    n = nfa.n_states
    luts = math.ceil(p.lut_per_state * n + p.lut_per_fanout_slot * n * max_fanout)
    regs = math.ceil(p.reg_per_state * n + p.reg_per_fanout_slot * n * max_fanout)
    uram = math.ceil(n * p.record_bits(max_fanout) / p.uram_bits_per_block)
    lo, hi = latency_bounds(nfa, max_fanout, input_len, p)
    return ResourceEstimate(luts, regs, uram, lo, hi)


@dataclass(frozen=True)
class SweepRow:
    fanout: int
    estimate: ResourceEstimate | None
    error: str | None = None


def fanout_sweep(nfa: ScoredNfa, fanouts, p: CostParams, input_len: int = 1) -> list[SweepRow]:
    """One row per requested fanout; a row that violates the fanout carries
    its error instead of an estimate."""
    rows = []
    for f in fanouts:
        try:
            rows.append(SweepRow(int(f), estimate_resources(nfa, int(f), p, input_len)))
        except (FanoutViolation, ValueError) as exc:
            rows.append(SweepRow(int(f), None, str(exc)))
    return rows


SWEEP_HEADER = ["fanout", "luts", "registers", "uram_blocks", "min_latency", "max_latency"]


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        if r.estimate is None:
            continue
        e = r.estimate
        w.writerow([r.fanout, e.luts, e.registers, e.uram_blocks,
                    e.min_latency_cycles, e.max_latency_cycles])
    return buf.getvalue()
