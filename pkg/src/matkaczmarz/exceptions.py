"""Exception types raised by the solvers and kernels."""

import numpy as np


class SVDConvergenceError(np.linalg.LinAlgError):
    """One-sided Jacobi did not reach orthogonality within its sweep budget."""

    def __init__(self, sweeps, off):
        super().__init__(
            f"Jacobi SVD not converged after {sweeps} sweeps (off-orthogonality {off:.3e})"
        )
        self.sweeps = sweeps
        self.off = off


class InstanceError(ValueError):
    """A problem instance violates one of its structural invariants."""

    def __init__(self, invariant, detail=""):
        msg = f"instance invariant violated: {invariant}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.invariant = invariant


class InvariantError(RuntimeError):
    """An internal numerical invariant was breached during iteration."""


class ResidualDriftError(InvariantError):
    def __init__(self, iteration, drift):
        super().__init__(
            f"maintained residual drifted by {drift:.3e} (relative to ||C||_F) "
            f"at iteration {iteration}"
        )
        self.iteration = iteration
        self.drift = drift


class DivergenceError(ArithmeticError):
    def __init__(self, iteration):
        super().__init__(f"non-finite iterate at iteration {iteration}")
        self.iteration = iteration
