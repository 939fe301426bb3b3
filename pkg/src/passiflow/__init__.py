"""Passivity-based continuous-time optimization and control.

Constrained convex problems are solved by integrating primal-dual gradient
flows with switched projection dynamics; physical plants in pseudo-gradient
(Brayton-Moser) form are simulated under power-shaping and Krasovskii-type
controllers; and the dissipation inequalities behind every one of these
constructions are certified numerically along the computed trajectories.
"""

from . import brayton_moser, ode, plants, primal_dual, svm, tline

__version__ = "0.1.0"

__all__ = ["ode", "brayton_moser", "primal_dual", "plants", "svm", "tline"]
