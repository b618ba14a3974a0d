"""Deterministic soft-PLC scan-cycle runtime for a simulated pick-and-place cell.

The package hosts a cyclically scanned control program organized as a
Unit / Equipment-Module / Control-Module hierarchy, a discrete-time plant
simulation with fault injection, two interchangeable error-handling
strategies (a matrix/broadcast template and a callback/error-manager design),
operating-mode management, product-family variant models, and an operator
gateway speaking newline-delimited JSON.
"""

__version__ = "0.1.0"
