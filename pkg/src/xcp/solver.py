"""Regularized least-squares objective and multiplicative-update training.

Training minimizes, over the observed training entries,

    sum_entries [ (y - yhat)^2
                  + lam * ( sum_{m,r} (A[i,m,r]^2 + B[j,m,r]^2)
                            + sum_r C[k,r]^2 + d[i]^2 + e[j]^2 + f[k]^2 ) ]

subject to all parameters staying nonnegative. Note the penalty sits
inside the per-entry sum, so a parameter's effective penalty grows with
its observation count; the update denominators below depend on that.

Each epoch accumulates, for every parameter, a numerator N (data term)
and denominator D (model + penalty term) over the entries in its mode
slice, then applies theta <- theta * N / D simultaneously to all
parameters (Jacobi style, with predictions from the start-of-epoch
state). The per-parameter step size this ratio encodes cancels the
negative gradient term exactly, which is what keeps every parameter
nonnegative without clipping.
"""

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .errors import DimMismatchError, EmptyTrainSetError, NonFiniteAccumulatorError
from .model import ExpandedCPModel, ModelConfig, init_random
from .tensor import ObservedTensor


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    lam is the L2 regularization coefficient. Training stops when the
    objective changes by less than tol between consecutive epochs, or at
    max_epochs. Denominators below min_denominator freeze their parameter
    for that epoch (no observed evidence and no regularization pressure).
    """

    model_cfg: ModelConfig
    lam: float = 0.0
    max_epochs: int = 1000
    tol: float = 1e-5
    min_denominator: float = 1e-12

    def validate(self) -> None:
        self.model_cfg.validate()
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not self.min_denominator > 0:
            raise ValueError(f"min_denominator must be > 0, got {self.min_denominator}")


@dataclass
class TrainReport:
    """What happened during one training run."""

    epochs_run: int = 0
    loss_trace: List[float] = field(default_factory=list)
    converged: bool = False
    wall_time_per_epoch: float = 0.0


def _check_dims(model: ExpandedCPModel, t: ObservedTensor) -> None:
    if model.dims != t.dims:
        raise DimMismatchError(f"model dims {model.dims} != tensor dims {t.dims}")


def _objective_arrays(A, B, C, d, e, f, ii, jj, kk, y, lam, impl=None) -> float:
    yhat = kernels.predict_entries(A, B, C, d, e, f, ii, jj, kk, impl=impl)
    res = y - yhat
    obj = float(res @ res)
    if lam != 0.0:
        # per-entity squared norms, then gathered per entry
        sq_a = np.einsum("imr,imr->i", A, A)
        sq_b = np.einsum("jmr,jmr->j", B, B)
        sq_c = np.einsum("kr,kr->k", C, C)
        pen = sq_a[ii] + sq_b[jj] + sq_c[kk] + d[ii] ** 2 + e[jj] ** 2 + f[kk] ** 2
        obj += lam * float(pen.sum())
    return obj


def objective(model: ExpandedCPModel, t: ObservedTensor, positions, lam: float) -> float:
    """Training objective over the given entry positions."""
    _check_dims(model, t)
    ii, jj, kk, y = t.gather(positions)
    return _objective_arrays(
        model.A, model.B, model.C, model.d, model.e, model.f, ii, jj, kk, y, lam
    )


def update_accumulators(model: ExpandedCPModel, t: ObservedTensor, positions, lam: float):
    """Per-parameter update numerators/denominators for one epoch.

    Exposed for diagnostics and for checking the update direction against
    finite differences: the multiplicative ratio N/D moves a parameter
    down exactly when D - N > 0, i.e. when the objective gradient is
    positive (gradient = 2 * (D - N)).
    """
    _check_dims(model, t)
    ii, jj, kk, y = t.gather(positions)
    return kernels.epoch_accumulators(
        model.A, model.B, model.C, model.d, model.e, model.f, ii, jj, kk, y, lam
    )


def _apply(theta: np.ndarray, num: np.ndarray, den: np.ndarray, min_den: float) -> np.ndarray:
    ratio = np.ones_like(theta)
    movable = den >= min_den
    np.divide(num, den, out=ratio, where=movable)
    return theta * ratio


def _epoch_arrays(A, B, C, d, e, f, ii, jj, kk, y, lam, min_den, impl=None) -> tuple:
    acc = kernels.epoch_accumulators(A, B, C, d, e, f, ii, jj, kk, y, lam, impl=impl)
    if not acc.all_finite():
        raise NonFiniteAccumulatorError("update accumulators overflowed or went NaN")
    new = (
        _apply(A, acc.num_a, acc.den_a, min_den),
        _apply(B, acc.num_b, acc.den_b, min_den),
        _apply(C, acc.num_c, acc.den_c, min_den),
        _apply(d, acc.num_d, acc.den_d, min_den),
        _apply(e, acc.num_e, acc.den_e, min_den),
        _apply(f, acc.num_f, acc.den_f, min_den),
    )
    for arr in new:
        if not np.isfinite(arr).all():
            raise NonFiniteAccumulatorError("parameter overflow while applying updates")
    return new


def epoch_update(
    model: ExpandedCPModel,
    t: ObservedTensor,
    positions,
    lam: float,
    min_denominator: float = 1e-12,
) -> ExpandedCPModel:
    """One full multiplicative sweep; returns the updated model.

    All numerators/denominators use predictions from the incoming model;
    the ratios are applied simultaneously at the end. Parameters whose
    mode slice is empty are untouched (their sums are empty).
    """
    _check_dims(model, t)
    ii, jj, kk, y = t.gather(positions)
    new = _epoch_arrays(
        model.A, model.B, model.C, model.d, model.e, model.f,
        ii, jj, kk, y, lam, min_denominator,
    )
    return ExpandedCPModel(*new)


def gradient_fd(
    model: ExpandedCPModel,
    t: ObservedTensor,
    positions,
    lam: float,
    param: Tuple[str, tuple],
    h: float = 1e-5,
) -> float:
    """Central finite difference of the objective w.r.t. one parameter.

    `param` is (group, index), e.g. ("A", (i, m, r)) or ("d", (i,)).
    Validation oracle for the update rule; not used in training.
    """
    _check_dims(model, t)
    ii, jj, kk, y = t.gather(positions)
    group, idx = param
    arrays = {
        "A": model.A, "B": model.B, "C": model.C,
        "d": model.d, "e": model.e, "f": model.f,
    }
    perturbed = {name: arr.copy() for name, arr in arrays.items()}

    def obj_at(delta: float) -> float:
        perturbed[group][idx] = arrays[group][idx] + delta
        value = _objective_arrays(
            perturbed["A"], perturbed["B"], perturbed["C"],
            perturbed["d"], perturbed["e"], perturbed["f"],
            ii, jj, kk, y, lam,
        )
        perturbed[group][idx] = arrays[group][idx]
        return value

    return (obj_at(h) - obj_at(-h)) / (2.0 * h)


def train(t: ObservedTensor, split, cfg: TrainConfig) -> Tuple[ExpandedCPModel, TrainReport]:
    """Initialize randomly and run multiplicative sweeps to convergence.

    `split` may be a DatasetSplit (its train positions are used) or a raw
    array of entry positions. Stops at the first epoch whose objective
    differs from the previous one by less than cfg.tol, or at
    cfg.max_epochs; report.converged says which rule fired.
    """
    cfg.validate()
    positions = getattr(split, "train", split)
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size == 0:
        raise EmptyTrainSetError("training set is empty")

    ii, jj, kk, y = t.gather(positions)
    model = init_random(t.dims, cfg.model_cfg)
    arrays = (model.A, model.B, model.C, model.d, model.e, model.f)
    prev = _objective_arrays(*arrays, ii, jj, kk, y, cfg.lam)

    report = TrainReport()
    started = time.perf_counter()
    for _ in range(cfg.max_epochs):
        arrays = _epoch_arrays(*arrays, ii, jj, kk, y, cfg.lam, cfg.min_denominator)
        loss = _objective_arrays(*arrays, ii, jj, kk, y, cfg.lam)
        if not np.isfinite(loss):
            raise NonFiniteAccumulatorError(f"objective became {loss}")
        report.loss_trace.append(loss)
        report.epochs_run += 1
        if abs(loss - prev) < cfg.tol:
            report.converged = True
            break
        prev = loss
    report.wall_time_per_epoch = (time.perf_counter() - started) / report.epochs_run
    return ExpandedCPModel(*arrays), report


def time_epochs(
    t: ObservedTensor,
    positions,
    cfg: TrainConfig,
    epochs: int = 5,
    warmup: int = 1,
    trials: int = 3,
    impl: Optional[object] = None,
) -> float:
    """Mean wall seconds per epoch (update + objective), best of `trials`.

    Runs fixed-length epoch sweeps with no convergence checks; used by the
    scaling and backend benchmarks. Taking the best trial suppresses
    scheduler noise.
    """
    positions = np.asarray(positions, dtype=np.int64)
    ii, jj, kk, y = t.gather(positions)
    best = np.inf
    for _ in range(trials):
        model = init_random(t.dims, cfg.model_cfg)
        arrays = (model.A, model.B, model.C, model.d, model.e, model.f)
        for _ in range(warmup):
            arrays = _epoch_arrays(
                *arrays, ii, jj, kk, y, cfg.lam, cfg.min_denominator, impl=impl
            )
            _objective_arrays(*arrays, ii, jj, kk, y, cfg.lam, impl=impl)
        started = time.perf_counter()
        for _ in range(epochs):
            arrays = _epoch_arrays(
                *arrays, ii, jj, kk, y, cfg.lam, cfg.min_denominator, impl=impl
            )
            _objective_arrays(*arrays, ii, jj, kk, y, cfg.lam, impl=impl)
        elapsed = time.perf_counter() - started
        best = min(best, elapsed / epochs)
    return best
