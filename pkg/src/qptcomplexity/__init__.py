"""Circuit complexity of ground-state preparation near quantum phase transitions.

Submodules
----------
pauli      Pauli-string algebra, sparse Hamiltonians, eigensolvers, Trotter steps
models     transverse-field Ising, ZZXZ and Dicke Hamiltonians
ising      free-fermion closed forms for the Ising chain
geometry   fidelity, quantum metric and Fubini-Study complexity
dicke      Gaussian (thermodynamic-limit) Dicke ground states
adiabatic  annealing with and without counter-diabatic driving
vqe        hardware-efficient variational eigensolver
scaling    peak extraction and finite-size-scaling fits
cli        batch front end (``qptc``)
"""
__version__ = "0.1.0"
