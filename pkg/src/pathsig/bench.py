"""Timing harness comparing the naive and fused signature reductions."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .cost_model import conventional_cost, counted_fused_mul_exp, fused_cost
from .signature import _increment_steps, _right_fold, signature
from .tensor_algebra import FreeTensor, TruncationSpec, _exp_levels, _mul_levels

__all__ = ["STRATEGIES", "BenchRow", "naive_signature", "run_case", "time_min"]

STRATEGIES = ("naive", "fused", "fused_parallel")


def naive_signature(z, spec: TruncationSpec, counter=None):
    """Exponentiate every increment, then multiply: the unfused reduction.

    ``z`` has shape (n, d, B); returns a level list.
    """
    acc = _exp_levels(z[0], spec, counter)
    for i in range(1, z.shape[0]):
        acc = _mul_levels(acc, _exp_levels(z[i], spec, counter), spec.depth, counter)
    return acc


def _naive_step_count(spec):
    counter = [0]
    z = np.zeros((spec.channels, 1))
    _mul_levels(_exp_levels(z, spec), _exp_levels(z, spec, counter), spec.depth, counter)
    return counter[0]


def _fused_step_count(spec):
    _, count = counted_fused_mul_exp(FreeTensor.identity(spec), np.zeros(spec.channels))
    return count


def time_min(fn, repeats: int) -> float:
    """Fastest of ``repeats`` wall-clock runs of ``fn()``."""
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


@dataclass
class BenchRow:
    channels: int
    depth: int
    length: int
    batch: int
    strategy: str
    seconds: float | None
    mults_per_step: int
    conventional_formula: int
    fused_formula: int
    formula_ratio: float
    verified: bool

    def as_dict(self):
        return asdict(self)


def run_case(channels, depth, length=128, batch=32, repeats=50, seed=0, workers=None, strategies=STRATEGIES):
    """Time each strategy on one random batch; timings only for verified outputs."""
    spec = TruncationSpec(channels, depth)
    rng = np.random.default_rng(seed)
    path = rng.uniform(-1.0, 1.0, size=(batch, length, channels))
    z = _increment_steps(np.diff(path, axis=1), channels)

    runners = {
        "naive": lambda: np.concatenate(naive_signature(z, spec), axis=0).T,
        "fused": lambda: np.concatenate(_right_fold(z, spec), axis=0).T,
        "fused_parallel": lambda: signature(
            path, depth, parallelism="batch_and_stream_parallel", workers=workers
        ).data,
    }
    reference = runners["fused"]()
    scale = max(float(np.abs(reference).max()), 1.0)
    c_formula, f_formula = conventional_cost(spec), fused_cost(spec)
    counts = {"naive": _naive_step_count(spec), "fused": _fused_step_count(spec)}
    counts["fused_parallel"] = counts["fused"]

    rows = []
    for name in strategies:
        out = runners[name]()
        ok = bool(np.abs(out - reference).max() <= 1e-10 * scale)
        seconds = time_min(runners[name], repeats) if ok else None
        rows.append(
            BenchRow(
                channels=channels,
                depth=depth,
                length=length,
                batch=batch,
                strategy=name,
                seconds=seconds,
                mults_per_step=counts[name],
                conventional_formula=c_formula,
                fused_formula=f_formula,
                formula_ratio=c_formula / f_formula if f_formula else 1.0,
                verified=ok,
            )
        )
    return rows
