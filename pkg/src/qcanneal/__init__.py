"""Embedding QCA circuit graphs onto Chimera annealer hardware.

Submodules:
    chimera    hardware graphs, yield masks, geometry queries
    circuit    QCA cell layouts, kink energies, connectivity graphs
    router     negotiated-congestion chain routing
    dense      dense placement embedding (place-and-route with seams)
    heuristic  vertex-model heuristic embedding
    convert    chain -> vertex-model conversion, qubit allocation, validation
    ising      Ising parameter assignment and brute-force ground states
    spectrum   transverse-field spectra and annealing gap studies
    generate   stochastic circuit generator
    bench      embedding sweeps, fits, summaries
    cli        command-line workflows
"""

from qcanneal.chimera import ChimeraSpec, build_chimera, apply_yield, YieldMask
from qcanneal.circuit import QcaCell, ConnectivityGraph, build_connectivity, kink_energy

__version__ = "0.1.0"
