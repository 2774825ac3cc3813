"""Finite-difference verification of recorded gradients.

The checker re-evaluates a scalar-valued computation under central
perturbations of each leaf entry and compares against the gradients the
graph reports.  Only meaningful in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor, default_dtype


@dataclass
class GradCheckReport:
    """Max relative gradient error per leaf, plus the overall worst case."""

    tol: float
    per_leaf: dict[str, float] = field(default_factory=dict)

    @property
    def max_rel_err(self) -> float:
        return max(self.per_leaf.values()) if self.per_leaf else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol

    def __str__(self) -> str:
        lines = [f"{'PASS' if self.passed else 'FAIL'} max_rel_err={self.max_rel_err:.3e} tol={self.tol:.1e}"]
        for name, err in sorted(self.per_leaf.items(), key=lambda kv: -kv[1]):
            lines.append(f"  {name}: {err:.3e}")
        return "\n".join(lines)


def grad_check(
    f: Callable[[], Tensor],
    leaves: Mapping[str, Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_entries: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` must rebuild its graph from the current leaf data on every call and
    return a scalar Tensor.  ``max_entries`` caps how many entries of each
    leaf are perturbed (sampled deterministically); None checks every entry.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if default_dtype() is not np.float64:
        raise RuntimeError("grad_check requires float64 as the active dtype")
    for name, leaf in leaves.items():
        if not leaf.requires_grad:
            raise ValueError(f"leaf {name!r} does not require grad")

    out = f()
    if out.size != 1:
        raise ValueError(f"f() must return a scalar, got shape {out.shape}")
    out.backward()
    analytic = {name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
                for name, t in leaves.items()}
    for t in leaves.values():
        t.grad = None

    rng = np.random.default_rng(seed)
    report = GradCheckReport(tol=tol)
    for name, leaf in leaves.items():
        flat = leaf.data.reshape(-1)
        n = flat.size
        if max_entries is not None and n > max_entries:
            idx = rng.choice(n, size=max_entries, replace=False)
        else:
            idx = np.arange(n)
        worst = 0.0
        ga_flat = analytic[name].reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = f().item()
            flat[i] = orig - h
            fm = f().item()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise ArithmeticError(f"non-finite values while perturbing {name}[{i}]")
            gn = (fp - fm) / (2.0 * h)
            ga = ga_flat[i]
            rel = abs(ga - gn) / max(1e-8, abs(ga) + abs(gn))
            worst = max(worst, rel)
        report.per_leaf[name] = worst
    return report
