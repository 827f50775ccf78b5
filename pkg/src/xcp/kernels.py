"""Backend selection and array-level wrappers for the hot kernels.

The per-entry prediction and update-accumulation passes dominate training
time, so they exist twice: a compiled Cython module (`_kernels_cy`) and a
pure-numpy fallback (`_kernels_np`). The compiled one is used when it
imported successfully; set ``XCP_BACKEND=python`` or ``XCP_BACKEND=c`` to
force a choice (forcing ``c`` without the compiled module is an error).

Both backends accumulate in entry order, so each is deterministic; across
backends results agree to floating-point roundoff, not bitwise.
"""

import os
from dataclasses import dataclass, fields

import numpy as np

from . import _kernels_np

try:
    from . import _kernels_cy
except ImportError:  # extension not built; fall back silently
    _kernels_cy = None


def _select():
    forced = os.environ.get("XCP_BACKEND")
    if forced == "python":
        return _kernels_np
    if forced == "c":
        if _kernels_cy is None:
            raise ImportError(
                "XCP_BACKEND=c but the compiled kernel module is not available; "
                "build it with `pip install -e . --no-build-isolation`"
            )
        return _kernels_cy
    if forced not in (None, ""):
        raise ValueError(f"XCP_BACKEND must be 'c' or 'python', got {forced!r}")
    return _kernels_cy if _kernels_cy is not None else _kernels_np


_impl = _select()


def backend_name() -> str:
    """Name of the active backend: 'c' or 'python'."""
    return _impl.BACKEND


def available_backends() -> tuple:
    names = ["python"]
    if _kernels_cy is not None:
        names.insert(0, "c")
    return tuple(names)


def get_backend(name: str):
    """Raw backend module by name, for benchmarks and equivalence tests."""
    if name == "python":
        return _kernels_np
    if name == "c":
        if _kernels_cy is None:
            raise ImportError("compiled kernel module is not available")
        return _kernels_cy
    raise ValueError(f"unknown backend {name!r}")


@dataclass
class EpochAccumulators:
    """Update numerators/denominators for every parameter group."""

    num_a: np.ndarray
    den_a: np.ndarray
    num_b: np.ndarray
    den_b: np.ndarray
    num_c: np.ndarray
    den_c: np.ndarray
    num_d: np.ndarray
    den_d: np.ndarray
    num_e: np.ndarray
    den_e: np.ndarray
    num_f: np.ndarray
    den_f: np.ndarray

    def arrays(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


def predict_entries(A, B, C, d, e, f, ii, jj, kk, impl=None) -> np.ndarray:
    """Model values for the given coordinate arrays."""
    impl = impl or _impl
    out = np.empty(ii.shape[0], dtype=np.float64)
    impl.predict_entries(A, B, C, d, e, f, ii, jj, kk, out)
    return out


def epoch_accumulators(A, B, C, d, e, f, ii, jj, kk, y, lam, impl=None) -> EpochAccumulators:
    """Accumulate all update numerators/denominators in one pass."""
    impl = impl or _impl
    acc = EpochAccumulators(
        num_a=np.zeros_like(A), den_a=np.zeros_like(A),
        num_b=np.zeros_like(B), den_b=np.zeros_like(B),
        num_c=np.zeros_like(C), den_c=np.zeros_like(C),
        num_d=np.zeros_like(d), den_d=np.zeros_like(d),
        num_e=np.zeros_like(e), den_e=np.zeros_like(e),
        num_f=np.zeros_like(f), den_f=np.zeros_like(f),
    )
    impl.accumulate_epoch(A, B, C, d, e, f, ii, jj, kk, y, float(lam), *acc.arrays())
    return acc
