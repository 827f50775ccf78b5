"""Expanded-CP latent factor model with per-mode linear biases.

A plain CP decomposition writes each tensor cell as a sum of R triple
products of factor-vector entries. Here the user and service vectors of
each of the R components are widened to M columns, so the user-service
part of component r is the rank-M product A_r B_r^T instead of a single
outer product; M=1 recovers biased CP exactly. Per-mode bias vectors
d, e, f absorb level shifts in the data.

All parameters are kept nonnegative, which makes every prediction
nonnegative, matching QoS measurements.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import kernels
from .errors import (
    DimMismatchError,
    ExpansionNotOneError,
    IndexOutOfRangeError,
    InvalidConfigError,
)


@dataclass(frozen=True)
class ModelConfig:
    """Shape and initialization settings for a model.

    init_scale bounds the uniform initialization range (0, init_scale];
    zero is excluded so multiplicative updates can always move a parameter.
    """

    rank: int
    expansion: int
    init_scale: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.rank < 1 or self.expansion < 1:
            raise InvalidConfigError(
                f"rank and expansion must be >= 1, got R={self.rank}, M={self.expansion}"
            )
        if not self.init_scale > 0:
            raise InvalidConfigError(f"init_scale must be > 0, got {self.init_scale}")


class ExpandedCPModel:
    """Factor arrays A (I,M,R), B (J,M,R), C (K,R) and biases d, e, f.

    Arrays are stored C-contiguous with (m, r) innermost so the per-entry
    training scan touches each entity's block sequentially.
    """

    def __init__(self, A, B, C, d, e, f):
        A = np.ascontiguousarray(A, dtype=np.float64)
        B = np.ascontiguousarray(B, dtype=np.float64)
        C = np.ascontiguousarray(C, dtype=np.float64)
        d = np.ascontiguousarray(d, dtype=np.float64)
        e = np.ascontiguousarray(e, dtype=np.float64)
        f = np.ascontiguousarray(f, dtype=np.float64)
        if A.ndim != 3 or B.ndim != 3 or C.ndim != 2:
            raise InvalidConfigError("A and B must be 3-d, C must be 2-d")
        if A.shape[1:] != B.shape[1:] or C.shape[1] != A.shape[2]:
            raise InvalidConfigError(
                f"inconsistent factor shapes: A {A.shape}, B {B.shape}, C {C.shape}"
            )
        if d.shape != (A.shape[0],) or e.shape != (B.shape[0],) or f.shape != (C.shape[0],):
            raise InvalidConfigError("bias vector lengths must match factor dims")
        for name, arr in (("A", A), ("B", B), ("C", C), ("d", d), ("e", e), ("f", f)):
            if arr.size and (not np.isfinite(arr).all() or arr.min() < 0):
                raise InvalidConfigError(f"{name} must be nonnegative and finite")
        self.A, self.B, self.C = A, B, C
        self.d, self.e, self.f = d, e, f

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (self.A.shape[0], self.B.shape[0], self.C.shape[0])

    @property
    def rank(self) -> int:
        return self.A.shape[2]

    @property
    def expansion(self) -> int:
        return self.A.shape[1]

    def parameter_count(self) -> int:
        return self.A.size + self.B.size + self.C.size + self.d.size + self.e.size + self.f.size

    def _check_index(self, i: int, j: int, k: int) -> None:
        I, J, K = self.dims
        if not (0 <= i < I and 0 <= j < J and 0 <= k < K):
            raise IndexOutOfRangeError(f"({i}, {j}, {k}) outside dims {self.dims}")

    def predict_core(self, i: int, j: int, k: int) -> float:
        """Factor contraction at one cell, biases excluded.

        Explicit loops, summed in (m inner, then r) order: the reference
        arithmetic the vectorized kernels reproduce.
        """
        self._check_index(i, j, k)
        Ai, Bj, Ck = self.A[i], self.B[j], self.C[k]
        s = 0.0
        for r in range(self.rank):
            inter = 0.0
            for m in range(self.expansion):
                inter += Ai[m, r] * Bj[m, r]
            s += inter * Ck[r]
        return s

    def predict(self, i: int, j: int, k: int) -> float:
        """Predicted value at one cell: factor contraction plus biases."""
        return self.predict_core(i, j, k) + float(self.d[i] + self.e[j] + self.f[k])

    def predict_entries(self, ii, jj, kk) -> np.ndarray:
        """Vectorized prediction over coordinate arrays (hot path)."""
        ii = np.ascontiguousarray(ii, dtype=np.int64)
        jj = np.ascontiguousarray(jj, dtype=np.int64)
        kk = np.ascontiguousarray(kk, dtype=np.int64)
        return kernels.predict_entries(
            self.A, self.B, self.C, self.d, self.e, self.f, ii, jj, kk
        )

    def user_service_matrix(self, r: int) -> np.ndarray:
        """The (|I|, |J|) interaction matrix A_r B_r^T of component r."""
        if not 0 <= r < self.rank:
            raise IndexOutOfRangeError(f"component {r} outside [0, {self.rank})")
        return self.A[:, :, r] @ self.B[:, :, r].T

    def reduces_to_biased_cp(self) -> bool:
        """Check that an M=1 model predicts identically to the biased CP
        model built from the same numbers, at every cell.

        Structural regression test: widening the factors must be a strict
        generalization, so collapsing M to 1 has to give CP back exactly.
        """
        if self.expansion != 1:
            raise ExpansionNotOneError(f"expansion is {self.expansion}, need 1")
        U = self.A[:, 0, :]  # (I, R) CP user factors
        V = self.B[:, 0, :]
        I, J, K = self.dims
        for i in range(I):
            for j in range(J):
                for k in range(K):
                    cp = 0.0
                    for r in range(self.rank):
                        cp += (U[i, r] * V[j, r]) * self.C[k, r]
                    cp += self.d[i] + self.e[j] + self.f[k]
                    if self.predict(i, j, k) != cp:
                        return False
        return True

    def copy(self) -> "ExpandedCPModel":
        return ExpandedCPModel(
            self.A.copy(), self.B.copy(), self.C.copy(),
            self.d.copy(), self.e.copy(), self.f.copy(),
        )

    def save(self, path) -> None:
        """Write a self-describing dump; round-trips bit-exactly."""
        np.savez(
            path,
            dims=np.asarray(self.dims, dtype=np.int64),
            rank=np.int64(self.rank),
            expansion=np.int64(self.expansion),
            A=self.A, B=self.B, C=self.C, d=self.d, e=self.e, f=self.f,
        )

    @classmethod
    def load(cls, path) -> "ExpandedCPModel":
        with np.load(path) as dump:
            model = cls(dump["A"], dump["B"], dump["C"], dump["d"], dump["e"], dump["f"])
            stored = tuple(int(x) for x in dump["dims"])
            if stored != model.dims or int(dump["rank"]) != model.rank \
                    or int(dump["expansion"]) != model.expansion:
                raise DimMismatchError(f"dump header {stored} contradicts array shapes")
        return model

    def __repr__(self) -> str:
        return (
            f"ExpandedCPModel(dims={self.dims}, rank={self.rank}, "
            f"expansion={self.expansion})"
        )


def init_random(dims: Tuple[int, int, int], cfg: ModelConfig) -> ExpandedCPModel:
    """Fresh model with every parameter uniform on (0, init_scale].

    Deterministic for a given (dims, cfg); strictly positive draws so no
    parameter starts pinned at the multiplicative-update fixed point 0.
    """
    cfg.validate()
    dims = tuple(int(x) for x in dims)
    if len(dims) != 3 or any(x <= 0 for x in dims):
        raise InvalidConfigError(f"dims must be three positive integers, got {dims}")
    I, J, K = dims
    R, M = cfg.rank, cfg.expansion
    rng = np.random.default_rng(cfg.seed)

    def draw(*shape):
        # random() is [0, 1); flip to (0, 1] so zero is excluded
        return (1.0 - rng.random(shape)) * cfg.init_scale

    return ExpandedCPModel(
        A=draw(I, M, R), B=draw(J, M, R), C=draw(K, R),
        d=draw(I), e=draw(J), f=draw(K),
    )
