"""Exception types shared across the package.

Invalid inputs (bad dimensions, malformed configs) raise plain ``ValueError``.
``NumericsError`` is reserved for runtime numerical failures: eigensolver
non-convergence, quadrature tails above the requested tolerance, and similar
conditions where the inputs were legal but the computation cannot meet its
accuracy contract.
"""


class NumericsError(RuntimeError):
    """A numerical routine failed to meet its accuracy or convergence contract."""
