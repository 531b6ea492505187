"""Block LMI feasibility problem for gain synthesis on the extended chain.

For every extended state chi = (alpha, beta, gamma, delta) the constraint is

    [[R_chi,                 A_alpha G + B_alpha F],
     [(A_alpha G + B_alpha F)^T, G + G^T - D_chi(R)]]  > 0

with G = G[gamma, delta], F = F[gamma, delta] and D_chi(R) the inflow-weighted
sum of R. Gains are recovered as K = F G^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .embedding import ExtendedChain
from .errors import DimensionMismatch
from .model import MjlsModel


@dataclass(frozen=True)
class LmiVariableLayout:
    """Offsets of the R, G and F blocks inside the flat variable vector.

    R_chi is stored by its upper-triangular entries (row-major), G and F
    row-major per (gamma, delta) with gamma outer and delta inner.
    """

    n: int
    m: int
    S: int
    N: int
    T: int

    @property
    def r_size(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def g_offset(self) -> int:
        return self.S * self.r_size

    @property
    def f_offset(self) -> int:
        return self.g_offset + self.N * self.T * self.n * self.n

    @property
    def count(self) -> int:
        return self.f_offset + self.N * self.T * self.m * self.n

    def r_slice(self, chi: int) -> slice:
        """Variables of R for 0-based extended state ``chi``."""
        start = chi * self.r_size
        return slice(start, start + self.r_size)

    def g_slice(self, gamma: int, delta: int) -> slice:
        start = self.g_offset + (gamma * self.T + delta) * self.n * self.n
        return slice(start, start + self.n * self.n)

    def f_slice(self, gamma: int, delta: int) -> slice:
        start = self.f_offset + (gamma * self.T + delta) * self.m * self.n
        return slice(start, start + self.m * self.n)

    def unpack(self, v):
        """Split ``v`` into R (S, n, n), G (N, T, n, n) and F (N, T, m, n)."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.count,):
            raise DimensionMismatch(f"expected {self.count} variables, got {v.shape}")
        n, m = self.n, self.m
        iu = np.triu_indices(n)
        R = np.zeros((self.S, n, n))
        R[:, iu[0], iu[1]] = v[: self.g_offset].reshape(self.S, -1)
        R = R + np.triu(R, 1).transpose(0, 2, 1)
        G = v[self.g_offset : self.f_offset].reshape(self.N, self.T, n, n)
        F = v[self.f_offset :].reshape(self.N, self.T, m, n)
        return R, G.copy(), F.copy()

    def pack(self, R, G, F) -> np.ndarray:
        iu = np.triu_indices(self.n)
        R = np.asarray(R, dtype=float)
        return np.concatenate(
            [R[:, iu[0], iu[1]].ravel(), np.asarray(G, dtype=float).ravel(), np.asarray(F, dtype=float).ravel()]
        )


def d_operator(chain: ExtendedChain, R, chi) -> np.ndarray:
    """sum over chi' of pbar[chi', chi] R[chi'], i.e. the inflow into ``chi``.

    ``R`` has shape (S, n, n); ``chi`` is a 1-based flat index or an extended state.
    """
    if not isinstance(chi, (int, np.integer)):
        chi = chain.index(chi)
    return np.einsum("c,cij->ij", chain.pbar.entries[:, chi - 1], np.asarray(R, dtype=float))


@dataclass(frozen=True, eq=False)
class LmiProblem:
    """Assembled constraints, one symmetric 2n x 2n block per retained state.

    Block ``b`` of the variable vector ``v`` equals ``(J @ v)[b*k*k:(b+1)*k*k]``
    reshaped to (k, k) with k = 2n. ``retained`` lists the 0-based extended
    states carrying a block; inflow sums only run over retained states.
    """

    model: MjlsModel
    chain: ExtendedChain
    layout: LmiVariableLayout
    retained: np.ndarray
    J: sparse.csr_matrix

    @property
    def block_size(self) -> int:
        return 2 * self.layout.n

    @property
    def num_blocks(self) -> int:
        return self.retained.size

    def evaluate(self, v) -> np.ndarray:
        """All blocks at ``v`` via the assembled linear map, shape (B, 2n, 2n)."""
        k = self.block_size
        return (self.J @ np.asarray(v, dtype=float)).reshape(-1, k, k)

    def blocks_from(self, R, G, F) -> np.ndarray:
        """All blocks built directly from the matrix variables.

        Independent of ``J``; used to re-verify solver output.
        """
        ch, ret = self.chain, self.retained
        A, B = self.model.A, self.model.B
        a, g, d = ch.alpha[ret], ch.gamma[ret], ch.delta[ret]
        Gs, Fs = G[g, d], F[g, d]
        off = A[a] @ Gs + B[a] @ Fs
        w = ch.pbar.entries[np.ix_(ret, ret)]
        D = np.einsum("cb,cij->bij", w, R[ret])
        lower = Gs + Gs.transpose(0, 2, 1) - D
        top = np.concatenate([R[ret], off], axis=2)
        bottom = np.concatenate([off.transpose(0, 2, 1), lower], axis=2)
        return np.concatenate([top, bottom], axis=1)


def assemble(model: MjlsModel, chain: ExtendedChain, prune=None) -> LmiProblem:
    """Build the constraint map for every extended state, or for ``prune`` only.

    ``prune`` is a set of 1-based flat indices closed under forward transitions
    (see :func:`reachable_states`).
    """
    if chain.N != model.N:
        raise DimensionMismatch(f"chain has {chain.N} modes, model has {model.N}")
    n, m = model.n, model.m
    layout = LmiVariableLayout(n, m, chain.size, chain.N, chain.T)
    if prune is None:
        retained = np.arange(chain.size)
    else:
        retained = np.array(sorted(int(i) - 1 for i in prune), dtype=np.intp)
    nb, k = retained.size, 2 * n
    block_of = np.full(chain.size, -1, dtype=np.intp)
    block_of[retained] = np.arange(nb)

    rows, cols, vals = [], [], []

    def put(block, i, j, col, val):
        rows.append(np.asarray(block) * k * k + np.asarray(i) * k + np.asarray(j))
        cols.append(np.broadcast_to(col, np.shape(rows[-1])))
        vals.append(np.broadcast_to(val, np.shape(rows[-1])).astype(float))

    iu = np.triu_indices(n)
    bidx = np.arange(nb)

    # R_chi in the upper-left block; D_chi(R) subtracted in the lower-right.
    pb = chain.pbar.entries[np.ix_(retained, retained)]
    src, dst = np.nonzero(pb)
    for u, (p, q) in enumerate(zip(*iu)):
        col_own = retained * layout.r_size + u
        col_src = retained[src] * layout.r_size + u
        for i, j in {(p, q), (q, p)}:
            put(bidx, i, j, col_own, 1.0)
            put(dst, n + i, n + j, col_src, -pb[src, dst])

    a, g, d = chain.alpha[retained], chain.gamma[retained], chain.delta[retained]
    gd = g * chain.T + d
    A, B = model.A, model.B
    for p in range(n):
        for q in range(n):
            col = layout.g_offset + gd * n * n + p * n + q
            for i in range(n):
                # A_alpha G: column p of A_alpha lands in column q of the off-diagonal block.
                put(bidx, i, n + q, col, A[a, i, p])
                put(bidx, n + q, i, col, A[a, i, p])
            put(bidx, n + p, n + q, col, 1.0)
            put(bidx, n + q, n + p, col, 1.0)
    for p in range(m):
        for q in range(n):
            col = layout.f_offset + gd * m * n + p * n + q
            for i in range(n):
                put(bidx, i, n + q, col, B[a, i, p])
                put(bidx, n + q, i, col, B[a, i, p])

    J = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nb * k * k, layout.count),
    ).tocsr()
    J.sum_duplicates()
    J.eliminate_zeros()
    return LmiProblem(model, chain, layout, retained, J)
