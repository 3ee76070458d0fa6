"""
pilotwave - constrained-Hamiltonian pilot-wave dynamics.

Lattice Schrodinger fields with their canonical momenta, the second-class
constraint algebra, guidance trajectories and ensembles, the Dirac current
and truncated scalar-field modes.
"""

__version__ = "1.0.0"
