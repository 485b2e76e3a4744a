"""polarlat: mean-field phase transitions of polaritons in doped
microcavity lattices.

Subpackages by task:

* :mod:`polarlat.model` - single-site basis, Hamiltonians and manifolds
* :mod:`polarlat.meanfield` - order-parameter scans, lobes, critical tunneling
* :mod:`polarlat.observables` - interaction energy, Q-factor requirements
* :mod:`polarlat.disorder` - site disorder sampling and Bose-glass criteria
* :mod:`polarlat.fields`, :mod:`polarlat.kerr` - dispersive-limit parameters
* :mod:`polarlat.cli` - command-line front end
"""

__version__ = "0.1.0"

from .model import (DEFAULT_COUPLING, SystemParams, FockDickeBasis,
                    build_basis, build_site_hamiltonian, lowest_eigenpair,
                    manifold_block, manifold_energy, angular_frequency,
                    coupling_from_ghz)
from .meanfield import (Phase, PhaseGrid, ScanPoint, ScanSettings,
                        bhm_boundary_oracle, boundary_tunneling, classify_phase,
                        critical_tunneling, ground_energy_at_psi,
                        landau_boundary_tunneling, minimize_order_parameter,
                        mott_lobe_mu_range, phase_diagram)

__all__ = [
    "__version__", "DEFAULT_COUPLING", "SystemParams", "FockDickeBasis",
    "build_basis", "build_site_hamiltonian", "lowest_eigenpair",
    "manifold_block", "manifold_energy", "angular_frequency",
    "coupling_from_ghz", "Phase", "PhaseGrid", "ScanPoint", "ScanSettings",
    "bhm_boundary_oracle", "boundary_tunneling", "classify_phase",
    "critical_tunneling", "ground_energy_at_psi", "landau_boundary_tunneling",
    "minimize_order_parameter", "mott_lobe_mu_range", "phase_diagram",
]
