"""Dataset interchange: on-disk format, splitting, and a synthetic generator.

A dataset row couples a class label with the classifier's unconstrained
score vector (length K) and an intermediate-layer feature vector (length p).
Rows labeled -1 are unlabeled (typically out-of-distribution test rows);
they still carry a full score vector because detection routes every sample
through the class with the largest score.

On disk a dataset is a plain CSV file

    label,f_0,...,f_{K-1},xi_0,...,xi_{p-1}

plus a JSON manifest next to it (same basename, ``.manifest.json``)
recording ``{"K", "p", "n", "class_counts", "n_unlabeled"}``, where ``n``
counts labeled rows and unlabeled rows are tallied separately.  Floats are
written with the shortest representation that round-trips a double, so
save -> load -> save is byte-identical.

All randomness (splitting, synthesis) goes through numpy's Philox
counter-based 64-bit generator keyed by explicit seeds, so results are
reproducible across platforms and runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DimensionError

MANIFEST_SUFFIX = ".manifest.json"


@dataclass(frozen=True)
class Sample:
    """One row: label (-1 for unlabeled), K scores, p features."""

    label: int
    scores: np.ndarray
    features: np.ndarray


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable column-store of samples.

    labels : (n,) int array, each in {-1} or [0, K)
    scores : (n, K) float array, finite
    features : (n, p) float array, finite
    """

    labels: np.ndarray
    scores: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))
        self.validate()

    def validate(self):
        if self.labels.ndim != 1 or self.scores.ndim != 2 or self.features.ndim != 2:
            raise DimensionError("labels must be 1-d; scores and features 2-d")
        n = self.labels.shape[0]
        if n < 1:
            raise DataFormatError("dataset must contain at least one row")
        if self.scores.shape[0] != n or self.features.shape[0] != n:
            raise DimensionError("labels, scores, features row counts differ")
        if self.K < 1 or self.p < 1:
            raise DataFormatError("dataset needs K >= 1 and p >= 1")
        if not np.all(np.isfinite(self.scores)) or not np.all(np.isfinite(self.features)):
            raise DataFormatError("dataset contains non-finite values")
        bad = (self.labels < -1) | (self.labels >= self.K)
        if np.any(bad):
            row = int(np.argmax(bad))
            raise DataFormatError(
                f"row {row}: label {self.labels[row]} outside {{-1}} U [0, {self.K})"
            )

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def K(self) -> int:
        return self.scores.shape[1]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def rows(self) -> list[Sample]:
        return [
            Sample(int(self.labels[i]), self.scores[i], self.features[i])
            for i in range(self.n)
        ]

    def class_counts(self) -> list[int]:
        return [int(np.sum(self.labels == k)) for k in range(self.K)]

    def n_unlabeled(self) -> int:
        return int(np.sum(self.labels == -1))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.labels.shape == other.labels.shape
            and self.scores.shape == other.scores.shape
            and self.features.shape == other.features.shape
            and bool(np.array_equal(self.labels, other.labels))
            and bool(np.array_equal(self.scores, other.scores))
            and bool(np.array_equal(self.features, other.features))
        )


@dataclass(frozen=True)
class SplitPair:
    """Per-class partition of a labeled dataset into GP-fit and validation rows.

    Both lists hold row-index arrays into the originating dataset, one entry
    per class.  For every class the two subsets are disjoint, their union is
    the class's rows, and sizes follow m_gp = max(2, floor(fraction * n_k))
    with the remainder going to validation.
    """

    gp_idx: list[np.ndarray]
    valid_idx: list[np.ndarray]


def _manifest_path(path) -> Path:
    path = Path(path)
    stem = path.with_suffix("") if path.suffix else path
    return stem.with_name(stem.name + MANIFEST_SUFFIX)


def _format_float(x: float) -> str:
    return repr(float(x))


def save_dataset(ds: Dataset, path) -> None:
    """Write a dataset and its manifest; the pair reloads to an equal Dataset."""
    ds.validate()
    path = Path(path)
    header = (
        ["label"]
        + [f"f_{j}" for j in range(ds.K)]
        + [f"xi_{j}" for j in range(ds.p)]
    )
    lines = [",".join(header)]
    for i in range(ds.n):
        fields = [str(int(ds.labels[i]))]
        fields += [_format_float(v) for v in ds.scores[i]]
        fields += [_format_float(v) for v in ds.features[i]]
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n")

    manifest = {
        "K": ds.K,
        "p": ds.p,
        "n": ds.n - ds.n_unlabeled(),
        "class_counts": ds.class_counts(),
        "n_unlabeled": ds.n_unlabeled(),
    }
    _manifest_path(path).write_text(json.dumps(manifest, sort_keys=True) + "\n")


def _parse_header(line: str) -> tuple[int, int]:
    tokens = line.strip().split(",")
    if not tokens or tokens[0] != "label":
        raise DataFormatError("line 1: header must start with 'label'")
    K = 0
    while 1 + K < len(tokens) and tokens[1 + K] == f"f_{K}":
        K += 1
    p = 0
    while 1 + K + p < len(tokens) and tokens[1 + K + p] == f"xi_{p}":
        p += 1
    if K < 1 or p < 1 or 1 + K + p != len(tokens):
        raise DataFormatError(
            "line 1: header must be label,f_0..f_{K-1},xi_0..xi_{p-1}"
        )
    return K, p


def load_dataset(path) -> Dataset:
    """Load a dataset file, checking structure, values, and its manifest."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"dataset file not found: {path}")
    mpath = _manifest_path(path)
    if not mpath.exists():
        raise DataFormatError(f"manifest not found: {mpath}")

    lines = path.read_text().splitlines()
    if not lines:
        raise DataFormatError("line 1: empty file, header expected")
    K, p = _parse_header(lines[0])

    labels, scores, features = [], [], []
    width = 1 + K + p
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        tokens = line.split(",")
        if len(tokens) != width:
            raise DataFormatError(
                f"line {lineno}: expected {width} fields, got {len(tokens)}"
            )
        try:
            label = int(tokens[0])
        except ValueError:
            raise DataFormatError(
                f"line {lineno}: label {tokens[0]!r} is not an integer"
            ) from None
        if label != -1 and not (0 <= label < K):
            raise DataFormatError(
                f"line {lineno}: label {label} outside {{-1}} U [0, {K})"
            )
        values = []
        for tok in tokens[1:]:
            try:
                v = float(tok)
            except ValueError:
                raise DataFormatError(
                    f"line {lineno}: {tok!r} is not a number"
                ) from None
            if not math.isfinite(v):
                raise DataFormatError(f"line {lineno}: non-finite value {tok!r}")
            values.append(v)
        labels.append(label)
        scores.append(values[:K])
        features.append(values[K:])
    if not labels:
        raise DataFormatError("dataset has a header but no rows")

    ds = Dataset(
        labels=np.array(labels, dtype=int),
        scores=np.array(scores, dtype=float),
        features=np.array(features, dtype=float),
    )

    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise DataFormatError(f"manifest {mpath}: invalid JSON ({e})") from None
    expected = {
        "K": ds.K,
        "p": ds.p,
        "n": ds.n - ds.n_unlabeled(),
        "class_counts": ds.class_counts(),
        "n_unlabeled": ds.n_unlabeled(),
    }
    for key, value in expected.items():
        got = manifest.get(key, 0 if key == "n_unlabeled" else None)
        if got != value:
            raise DataFormatError(
                f"manifest {mpath}: {key} is {got!r} but file contents give {value!r}"
            )
    return ds


def split_per_class(ds: Dataset, gp_fraction: float, seed: int) -> SplitPair:
    """Partition each class's rows into GP-fit and validation subsets.

    Sizes follow m_gp = max(2, floor(gp_fraction * n_k)); assignment is a
    seeded uniform shuffle, independent per class (class k uses the Philox
    stream keyed by (seed, k)), so it is deterministic and unaffected by the
    other classes' contents.
    """
    if not 0.0 < gp_fraction < 1.0:
        raise ValueError("gp_fraction must lie strictly between 0 and 1")
    gp_idx, valid_idx = [], []
    for k in range(ds.K):
        rows = np.flatnonzero(ds.labels == k)
        n_k = rows.size
        if n_k < 3:
            raise DataFormatError(
                f"class {k} has {n_k} samples; need at least 3 to split"
            )
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, k))))
        perm = rng.permutation(n_k)
        m_gp = max(2, int(math.floor(gp_fraction * n_k)))
        gp_idx.append(np.sort(rows[perm[:m_gp]]))
        valid_idx.append(np.sort(rows[perm[m_gp:]]))
    return SplitPair(gp_idx=gp_idx, valid_idx=valid_idx)


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic cluster generator."""

    K: int
    p: int
    n_per_class: int
    cluster_separation: float = 6.0
    ood_offset: float = 20.0
    score_scale: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.p < 1 or self.n_per_class < 1:
            raise ValueError("K, p, n_per_class must all be >= 1")
        if self.cluster_separation <= 0:
            raise ValueError("cluster_separation must be positive")
        if self.ood_offset < 0:
            raise ValueError("ood_offset must be non-negative")


def _analytic_scores(features: np.ndarray, centers: np.ndarray, scale: float) -> np.ndarray:
    """Score rule shared by in-distribution and OOD rows.

    f_l(x) = scale - ||x - c_l||^2: the true class scores highest (it is the
    nearest center), so argmax routing is well defined for every row.
    """
    d2 = ((features[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    return scale - d2


def synthesize(config: SynthConfig) -> tuple[Dataset, Dataset]:
    """Generate matched in-distribution and OOD datasets.

    Class centers sit on a common diagonal direction, consecutive centers
    ``cluster_separation`` apart; features are unit-variance Gaussian around
    their center.  The OOD cluster sits ``ood_offset`` beyond the farthest
    center along the same direction (offset 0 makes it coincide with the
    last in-distribution cluster, the worst case).  Scores for every row
    come from the shared analytic rule, and everything is deterministic
    given the seed.
    """
    K, p, n = config.K, config.p, config.n_per_class
    direction = np.ones(p) / math.sqrt(p)
    centers = config.cluster_separation * np.outer(np.arange(K), direction)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    ind_features = np.concatenate(
        [centers[k] + rng.standard_normal((n, p)) for k in range(K)], axis=0
    )
    ind_labels = np.repeat(np.arange(K), n)

    ood_center = centers[-1] + config.ood_offset * direction
    ood_features = ood_center + rng.standard_normal((K * n, p))
    ood_labels = np.full(K * n, -1, dtype=int)

    ind = Dataset(
        labels=ind_labels,
        scores=_analytic_scores(ind_features, centers, config.score_scale),
        features=ind_features,
    )
    ood = Dataset(
        labels=ood_labels,
        scores=_analytic_scores(ood_features, centers, config.score_scale),
        features=ood_features,
    )
    return ind, ood
