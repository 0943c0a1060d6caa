"""Exact revenue benchmarks for a combinatorial buyer.

Optimal revenue by lottery-menu LP, item/bundle pricing benchmarks, the
core/tail decomposition with its inequality chain, concentration and
monotonicity checks, and a replica-surrogate BIC reduction simulator.
"""

__version__ = "0.1.0"
