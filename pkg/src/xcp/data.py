"""Data ingestion, train/validation/test splitting, synthetic generation.

The on-disk log format is plain text, one measurement per line:

    user_id service_id time_slice value

whitespace-separated, `#` starts a comment line, blank lines are ignored,
and a negative value marks "no measurement" (the record is skipped).
Split manifests are plain text too, so a run can be reproduced exactly
from the files it leaves behind.
"""

import math
from dataclasses import dataclass
from typing import IO, Iterable, List, Optional, Tuple

import numpy as np

from .errors import (
    BadRatiosError,
    DensityTooHighError,
    InvalidConfigError,
    MalformedLineError,
)
from .model import ExpandedCPModel, ModelConfig, init_random
from .tensor import Entry, ObservedTensor


@dataclass
class DatasetSplit:
    """Disjoint partition of a tensor's entry positions."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int
    ratios: Tuple[float, float, float]

    def sizes(self) -> Tuple[int, int, int]:
        return (len(self.train), len(self.validation), len(self.test))


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic dataset with a known generating model."""

    dims: Tuple[int, int, int]
    rank: int
    expansion: int
    density: float
    noise_sigma: float = 0.0
    bias_scale: float = 1.0
    seed: int = 0


def parse_qos_log(
    lines: Iterable[str], dims: Optional[Tuple[int, int, int]] = None
) -> Tuple[Tuple[int, int, int], List[Entry]]:
    """Parse a measurement log into entries and dimensions.

    Dimensions are taken from `dims` when given, otherwise inferred as
    max index + 1 per mode. Every line is either parsed, skipped (comment,
    blank, or negative-value sentinel), or rejected with its line number.
    """
    entries: List[Entry] = []
    max_i = max_j = max_k = -1
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 4:
            raise MalformedLineError(lineno, f"expected 4 fields, got {len(fields)}")
        try:
            i, j, k = int(fields[0]), int(fields[1]), int(fields[2])
            value = float(fields[3])
        except ValueError as exc:
            raise MalformedLineError(lineno, str(exc)) from None
        if i < 0 or j < 0 or k < 0:
            raise MalformedLineError(lineno, f"negative index in ({i}, {j}, {k})")
        if math.isnan(value) or math.isinf(value):
            raise MalformedLineError(lineno, f"non-finite value {value}")
        if value < 0:
            continue  # sentinel: no measurement
        entries.append(Entry(i, j, k, value))
        max_i, max_j, max_k = max(max_i, i), max(max_j, j), max(max_k, k)

    if dims is None:
        if not entries:
            raise InvalidConfigError("cannot infer dims from an empty log; pass dims")
        dims = (max_i + 1, max_j + 1, max_k + 1)
    return tuple(int(x) for x in dims), entries


def write_qos_log(entries: Iterable[Entry], sink: IO[str]) -> None:
    """Emit the four-field text format read by parse_qos_log."""
    for i, j, k, value in entries:
        sink.write(f"{i} {j} {k} {value!r}\n")


def load_tensor(path, dims: Optional[Tuple[int, int, int]] = None) -> ObservedTensor:
    """Parse a log file and build the tensor."""
    with open(path, "r", encoding="utf-8") as handle:
        dims, entries = parse_qos_log(handle, dims=dims)
    return ObservedTensor(dims, entries)


def _check_ratios(ratios) -> Tuple[float, float, float]:
    ratios = tuple(float(x) for x in ratios)
    if len(ratios) != 3 or any(x < 0 for x in ratios):
        raise BadRatiosError(f"ratios must be three nonnegative reals, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatiosError(f"ratios must sum to 1, got {sum(ratios)!r}")
    return ratios


def random_split(t: ObservedTensor, ratios, seed: int) -> DatasetSplit:
    """Uniformly random partition into train/validation/test positions.

    Train and validation take floor(ratio * n) positions each; test takes
    the remainder. Deterministic for a given seed.
    """
    ratios = _check_ratios(ratios)
    n = t.n_entries
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(ratios[0] * n)
    n_val = int(ratios[1] * n)
    return DatasetSplit(
        train=np.sort(perm[:n_train]),
        validation=np.sort(perm[n_train:n_train + n_val]),
        test=np.sort(perm[n_train + n_val:]),
        seed=seed,
        ratios=ratios,
    )


def repeated_splits(t: ObservedTensor, ratios, base_seed: int, n: int) -> List[DatasetSplit]:
    """n independent splits seeded base_seed .. base_seed + n - 1."""
    if n < 1:
        raise InvalidConfigError(f"need at least one split, got n={n}")
    return [random_split(t, ratios, base_seed + rep) for rep in range(n)]


def generate_synthetic(spec: SyntheticSpec) -> Tuple[ObservedTensor, ExpandedCPModel]:
    """Sample a dataset from a randomly drawn ground-truth model.

    Factors are uniform on (0, 1], biases uniform on (0, bias_scale].
    Observed cells are chosen uniformly without replacement at the given
    density; values are the truth model's predictions plus zero-truncated
    Gaussian noise. Returns the tensor and the generating model.
    """
    dims = tuple(int(x) for x in spec.dims)
    if spec.density > 1.0:
        raise DensityTooHighError(f"density {spec.density} exceeds 1")
    if not spec.density > 0:
        raise InvalidConfigError(f"density must be in (0, 1], got {spec.density}")
    if spec.noise_sigma < 0 or spec.bias_scale < 0:
        raise InvalidConfigError("noise_sigma and bias_scale must be >= 0")

    rng = np.random.default_rng(spec.seed)
    I, J, K = dims
    R, M = int(spec.rank), int(spec.expansion)
    if R < 1 or M < 1:
        raise InvalidConfigError(f"rank and expansion must be >= 1, got {R}, {M}")

    def draw(shape, scale):
        return (1.0 - rng.random(shape)) * scale

    truth = ExpandedCPModel(
        A=draw((I, M, R), 1.0), B=draw((J, M, R), 1.0), C=draw((K, R), 1.0),
        d=draw(I, spec.bias_scale), e=draw(J, spec.bias_scale), f=draw(K, spec.bias_scale),
    )

    total = I * J * K
    n = int(round(spec.density * total))
    if n > total:
        raise DensityTooHighError(f"{n} requested entries exceed tensor size {total}")
    coords = np.sort(rng.choice(total, size=n, replace=False))
    ii, jj, kk = np.unravel_index(coords, dims)
    values = truth.predict_entries(ii, jj, kk)
    if spec.noise_sigma > 0:
        values = np.maximum(values + rng.normal(0.0, spec.noise_sigma, n), 0.0)
    return ObservedTensor.from_arrays(dims, ii, jj, kk, values), truth


def write_split_manifest(split: DatasetSplit, sink: IO[str]) -> None:
    """One entry position per line, grouped by section."""
    sink.write(f"# seed: {split.seed}\n")
    sink.write(f"# ratios: {split.ratios[0]!r} {split.ratios[1]!r} {split.ratios[2]!r}\n")
    for name, positions in (
        ("train", split.train), ("validation", split.validation), ("test", split.test)
    ):
        sink.write(f"[{name}]\n")
        for p in positions:
            sink.write(f"{p}\n")


def read_split_manifest(source: IO[str]) -> DatasetSplit:
    """Inverse of write_split_manifest."""
    sections = {"train": [], "validation": [], "test": []}
    seed = 0
    ratios = None
    current = None
    for lineno, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.startswith("seed:"):
                seed = int(body.split(":", 1)[1])
            elif body.startswith("ratios:"):
                ratios = tuple(float(x) for x in body.split(":", 1)[1].split())
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1]
            if name not in sections:
                raise MalformedLineError(lineno, f"unknown section {name!r}")
            current = name
            continue
        if current is None:
            raise MalformedLineError(lineno, "entry position before any section header")
        try:
            sections[current].append(int(stripped))
        except ValueError:
            raise MalformedLineError(lineno, f"expected integer position, got {stripped!r}") from None

    parts = {k: np.asarray(v, dtype=np.int64) for k, v in sections.items()}
    if ratios is None:
        n = sum(len(v) for v in parts.values())
        ratios = tuple(len(parts[k]) / n if n else 0.0 for k in ("train", "validation", "test"))
    return DatasetSplit(parts["train"], parts["validation"], parts["test"], seed, ratios)


def validate_partition(split: DatasetSplit, n_entries: int) -> None:
    """Check disjointness and coverage of a split against a tensor size."""
    joined = np.concatenate([split.train, split.validation, split.test])
    if joined.size != n_entries or not np.array_equal(np.sort(joined), np.arange(n_entries)):
        raise InvalidConfigError(
            f"split sections do not partition 0..{n_entries - 1}"
        )
