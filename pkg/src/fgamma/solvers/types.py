"""Result records returned by the exact solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..measures import DiscreteMeasure

__all__ = ["DivergenceSolution", "DiracExampleSolution"]


@dataclass(frozen=True)
class DivergenceSolution:
    """Solution of a divergence problem on a finite space.

    ``value`` may be ``inf``.  ``g_star`` is indexed by the joint support
    of the two input measures in lexicographic order; ``nu_star`` is the
    optimal scalar shift.  ``eta_star`` (the intermediate measure) and
    ``transport_plan`` are produced by the transport-form solver only.
    ``diagnostics`` carries iteration counts, the final constraint
    violation of ``g_star``, and a primal-dual gap estimate.
    """

    value: float
    g_star: np.ndarray
    nu_star: float
    eta_star: Optional[DiscreteMeasure] = None
    transport_plan: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DiracExampleSolution:
    """Closed-track solution of the two-atom vs three-atom example.

    ``eta_x2_mass`` is the intermediate measure's mass at x2 (saturating
    at 2/3 past the transition), ``g_star_2`` the optimal witness value
    at x2, and ``regime`` one of "pre-transition" / "post-transition".
    """

    eta_x2_mass: float
    divergence_value: float
    regime: str
    g_star_2: float
    nu_star: float
