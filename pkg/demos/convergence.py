"""Empirical orders of the discretized operations."""
from rackoid import convergence_study

for op in ("simpson", "rk4", "homotopy", "simpson_periodic"):
    study = convergence_study(op, [8, 16, 32, 64])
    rows = "  ".join(f"{r['n']}:{r['max_residual']:.1e}" for r in study["table"])
    slope = "n/a" if study["slope"] is None else f"{study['slope']:.2f}"
    print(f"{op:17s} slope {slope:>5s}  {rows}  {' '.join(study['flags'])}")
