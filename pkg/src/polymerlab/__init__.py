"""Directed polymers in random environment.

Exact quenched endpoint laws on the lattice, the space of partitioned
subprobability measures with its metric, profile extraction, the update map
and energy functional, and empirical-measure diagnostics.
"""

from __future__ import annotations

__version__ = "0.1.0"
