"""percap: percolation-based multicast capacity simulator and bounds evaluator.

Modules:
  spatial     Poisson deployments, grid index, scheme lattices, exact EMST
  percolation Boolean-model clustering, giant components, crossing paths
  channel     SINR link rates and TDMA scheduling machinery
  backbones   highways, ordinary/parallel arterial roads, access paths
  routing     multicast sessions, spanning trees, scheme routing, loads
  bounds      closed-form order evaluators (occupancy, upper/lower bounds)
  harness     config-driven sweeps, slope fits, CSV emission (CLI: percap)
"""

__version__ = "0.1.0"

