"""Markov jump linear systems and gain schedules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .modes import StochasticMatrix, validate_stochastic


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MjlsModel:
    """x(k+1) = A[r(k)] x(k) + B[r(k)] u(k) with mode chain transition matrix P.

    ``A`` has shape (N, n, n), ``B`` has shape (N, n, m). Modes are 1-based at
    the public surface and 0-based in the arrays.
    """

    A: np.ndarray
    B: np.ndarray
    P: StochasticMatrix

    @classmethod
    def build(cls, A, B, P) -> "MjlsModel":
        A = [np.atleast_2d(np.asarray(a, dtype=float)) for a in A]
        B = [np.asarray(b, dtype=float) for b in B]
        B = [b.reshape(-1, 1) if b.ndim == 1 else b for b in B]
        if not A:
            raise DimensionMismatch("need at least one mode")
        if len(A) != len(B):
            raise DimensionMismatch(f"{len(A)} A matrices but {len(B)} B matrices")
        n = A[0].shape[0]
        if any(a.shape != (n, n) for a in A):
            raise DimensionMismatch("all A_i must be square with a common size")
        m = B[0].shape[1]
        if any(b.shape != (n, m) for b in B):
            raise DimensionMismatch(f"all B_i must have shape ({n}, {m})")
        if not isinstance(P, StochasticMatrix):
            P = validate_stochastic(P)
        if P.dim != len(A):
            raise DimensionMismatch(f"P is {P.dim}x{P.dim} but there are {len(A)} modes")
        return cls(_frozen(np.stack(A)), _frozen(np.stack(B)), P)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[2]


@dataclass(frozen=True, eq=False)
class GainSchedule:
    """Feedback gains K[gamma, delta], stored as an array of shape (N, T, m, n)."""

    K: np.ndarray

    @classmethod
    def build(cls, K) -> "GainSchedule":
        K = np.asarray(K, dtype=float)
        if K.ndim != 4:
            raise DimensionMismatch(f"gain array must have shape (N, T, m, n), got {K.shape}")
        return cls(_frozen(K))

    @classmethod
    def zeros(cls, N: int, T: int, m: int, n: int) -> "GainSchedule":
        return cls(_frozen(np.zeros((N, T, m, n))))

    @property
    def N(self) -> int:
        return self.K.shape[0]

    @property
    def T(self) -> int:
        return self.K.shape[1]

    def gain(self, gamma: int, delta: int) -> np.ndarray:
        """Gain for last-observed mode ``gamma`` and clock ``delta`` (both 1-based)."""
        if not (1 <= gamma <= self.N and 1 <= delta <= self.T):
            raise IndexError(f"(gamma, delta) = ({gamma}, {delta}) outside <{self.N}> x <{self.T}>")
        return self.K[gamma - 1, delta - 1]

    def check_compatible(self, model: MjlsModel, T: int) -> None:
        expected = (model.N, T, model.m, model.n)
        if self.K.shape != expected:
            raise DimensionMismatch(f"gain array has shape {self.K.shape}, expected {expected}")


def closed_loop_matrix(model: MjlsModel, gains: GainSchedule, alpha: int, gamma: int, delta: int) -> np.ndarray:
    """A_alpha + B_alpha K_{gamma,delta}; all indices 1-based."""
    if not 1 <= alpha <= model.N:
        raise IndexError(f"mode {alpha} outside <{model.N}>")
    return model.A[alpha - 1] + model.B[alpha - 1] @ gains.gain(gamma, delta)


def closed_loop_stack(model: MjlsModel, gains: GainSchedule) -> np.ndarray:
    """All closed-loop matrices, shape (N_alpha, N_gamma, T, n, n), 0-based."""
    return model.A[:, None, None] + np.einsum("aij,gdjk->agdik", model.B, gains.K)
