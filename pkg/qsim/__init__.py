"""
Simulation kernels.

This package contains:
- qcore: state vectors, Pauli strings, gate application, fidelities
- perturb: chain Hamiltonians and GUE perturbations
- decouple: bang-bang decoupling schedules
- algos: gate sequences, the QFT, PAREC and correlation matrices
- jumpcode: detected-jump codes, recovery and permutation averages
- trajectory: quantum-jump trajectories under the combined protocol
- analytics: closed-form fidelity predictions and fits
"""
