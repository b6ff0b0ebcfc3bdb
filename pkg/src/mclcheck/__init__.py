"""Static checker and runtime oracle for dynamic-memory consumption contracts.

The package analyzes programs in a small imperative object language whose
methods carry peak-allocation and escape contracts, verifies those
contracts symbolically, can instrument programs with runtime counters that
mirror the verified bounds, and can replay programs under an interpreter
with idealized reclamation to cross-check the static results.
"""

__version__ = "0.1.0"
