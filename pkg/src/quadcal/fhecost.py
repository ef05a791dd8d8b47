"""Leveled-CKKS cost planner for the polynomialized circuit.

Pure arithmetic-cost model: per-batch operation counts, multiplicative
depth, and the minimum feasible (N, depth, log Q) from the declared search
grid.  No ciphertext arithmetic, noise tracking, or latency prediction.

Calibration notes: ciphertext-plaintext counts and encryption counts are
exact for the supported task shapes; rotation and rescale counts follow the
documented BSGS/level model, whose cross-scheme deltas (not its absolute
values) are the quantities asserted in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ShapeError

# ordered (ring degree, depth budget, log2 Q) search grid
CONFIG_GRID = (
    (2**14, 4, 280),
    (2**14, 5, 320),
    (2**15, 5, 320),
    (2**15, 6, 360),
)

# coefficient-modulus chains for the log2(scale) = 40 policy
MODULUS_CHAINS = {
    4: (60, 40, 40, 40, 40, 60),
    5: (60, 40, 40, 40, 40, 40, 60),
    6: (60, 40, 40, 40, 40, 40, 40, 60),
}


def _next_pow2(x: int) -> int:
    return 1 if x <= 1 else 2 ** math.ceil(math.log2(x))


@dataclass(frozen=True)
class TaskShape:
    """Packing geometry of one encrypted inference task."""

    d: int  # input dimension
    m: int  # hidden width
    k: int  # classes
    ring_degree: int = 2**14

    def __post_init__(self):
        if self.d < 1 or self.m < 1 or self.k < 1:
            raise ShapeError("d, m, k must be positive")
        if self.m > self.slots:
            raise ShapeError(f"hidden width {self.m} exceeds slot count {self.slots}")

    @property
    def slots(self) -> int:
        return self.ring_degree // 2

    @property
    def batch(self) -> int:
        return self.slots // self.m

    @property
    def chunks(self) -> int:
        """Input blocks of at most m features, each its own ciphertext."""
        return math.ceil(self.d / self.m)

    @property
    def chunk_widths(self) -> list[int]:
        base = [self.m] * (self.d // self.m)
        if self.d % self.m:
            base.append(self.d % self.m)
        return base

    @property
    def padded_widths(self) -> list[int]:
        return [_next_pow2(w) for w in self.chunk_widths]


@dataclass(frozen=True)
class ActivationDescriptor:
    """Per-ciphertext cost of evaluating one activation polynomial."""

    name: str
    degree: int
    act_ctct: int
    act_ctpt: int
    act_rescale: int
    depth_act: int = field(init=False)

    def __post_init__(self):
        if self.degree < 2:
            raise ShapeError("activation degree must be at least 2")
        object.__setattr__(self, "depth_act", math.ceil(math.log2(self.degree + 1)))


# quad and the degree-7 Paterson-Stockmeyer schedule are calibrated counts;
# degrees 3 and 5 are documented interpolations between them
ACTIVATIONS = {
    "quad": ActivationDescriptor("quad", 2, 2, 2, 2),
    "square": ActivationDescriptor("square", 2, 2, 2, 2),
    "remez2": ActivationDescriptor("remez2", 2, 2, 2, 2),
    "remez3": ActivationDescriptor("remez3", 3, 3, 2, 3),
    "remez5": ActivationDescriptor("remez5", 5, 4, 3, 5),
    "remez7": ActivationDescriptor("remez7", 7, 5, 4, 7),
}


@dataclass(frozen=True)
class CostReport:
    encryptions: int
    ctct: int
    ctpt: int
    rotations: int
    rescales: int
    total_depth: int
    feasible_config: tuple[int, int, int] | None
    modulus_chain: tuple[int, ...] | None

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "encryptions": self.encryptions,
            "ctct": self.ctct,
            "ctpt": self.ctpt,
            "rotations": self.rotations,
            "rescales": self.rescales,
            "total_depth": self.total_depth,
            "feasible_config": None
            if self.feasible_config is None
            else {
                "ring_degree": self.feasible_config[0],
                "depth": self.feasible_config[1],
                "log_q": self.feasible_config[2],
            },
            "modulus_chain": None if self.modulus_chain is None else list(self.modulus_chain),
        }


def depth_of(act: ActivationDescriptor) -> int:
    """Multiplicative depth: two linear-layer levels plus the activation."""
    return 2 + act.depth_act


def min_feasible_config(depth_needed: int) -> tuple[int, int, int] | None:
    """First grid entry whose depth budget covers the circuit, else None."""
    for cfg in CONFIG_GRID:
        if cfg[1] >= depth_needed:
            return cfg
    return None


def _bsgs_rotations(width: int) -> int:
    """Baby-step/giant-step input rotations (g-1)+(b-1) with g*b = width."""
    g = 2 ** math.ceil(math.log2(math.sqrt(width))) if width > 1 else 1
    b = max(width // g, 1)
    return (g - 1) + (b - 1)


def op_counts(shape: TaskShape, act: ActivationDescriptor) -> CostReport:
    """Per-encrypted-batch operation counts for one task/activation pair.

    encryptions = input chunks; ct-pt = matvec diagonals (padded chunk
    widths) + head rows + activation scalars; ct-ct comes entirely from the
    activation; rotations are activation-independent (BSGS input rotations
    plus the output reduction tree).
    """
    enc = shape.chunks
    ctpt = sum(shape.padded_widths) + shape.k + act.act_ctpt
    ctct = act.act_ctct
    rotations = sum(_bsgs_rotations(w) for w in shape.padded_widths)
    rotations += max(0, int(math.log2(shape.m // _next_pow2(shape.k)))) if shape.m >= _next_pow2(shape.k) else 0
    rescales = 2 * shape.chunks + 2 + act.act_rescale
    depth = depth_of(act)
    cfg = min_feasible_config(depth)
    return CostReport(
        encryptions=enc,
        ctct=ctct,
        ctpt=ctpt,
        rotations=rotations,
        rescales=rescales,
        total_depth=depth,
        feasible_config=cfg,
        modulus_chain=MODULUS_CHAINS.get(cfg[1]) if cfg else None,
    )


def feasibility_grid(depths: dict[str, int] | None = None) -> list[dict]:
    """Minimum feasible configuration for every registered activation."""
    rows = []
    for name, act in ACTIVATIONS.items():
        depth = depth_of(act)
        cfg = min_feasible_config(depth)
        rows.append(
            {
                "scheme": name,
                "degree": act.degree,
                "depth": depth,
                "config": None
                if cfg is None
                else {"ring_degree": cfg[0], "depth": cfg[1], "log_q": cfg[2]},
            }
        )
    return rows
