"""Analysis and simulation of decode-and-forward relay chains in diffusive molecular channels."""

from .model import (Duplex, Scheme, Scenario, build_topology, make_scenario, make_schedule,
                    pad_sequence)

__version__ = "0.1.0"

__all__ = ["Duplex", "Scheme", "Scenario", "build_topology", "make_scenario", "make_schedule",
           "pad_sequence", "__version__"]
