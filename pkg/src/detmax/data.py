"""Loading point sets from text files and generating synthetic instances."""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import PointSet

GENERATORS = {
    "gaussian": ("n", "d"),
    "clustered": ("n", "d", "clusters", "spread"),
    "adversarial-greedy": ("n", "d"),
}
GENERATOR_ALIASES = {"adversarial": "adversarial-greedy"}


class DataError(ValueError):
    """Unreadable or malformed input data."""


@dataclass
class DatasetSpec:
    """Where points come from: a file or a named synthetic generator."""

    path: Optional[str] = None
    format: str = "csv"
    header: bool = False
    generator: Optional[str] = None
    params: dict = field(default_factory=dict)
    normalize: bool = False

    @classmethod
    def parse_synthetic(cls, text: str, normalize: bool = False) -> "DatasetSpec":
        """Parse ``"name:v1,v2,..."``, e.g. ``"clustered:2000,20,10,3"``."""
        name, _, rest = text.partition(":")
        name = GENERATOR_ALIASES.get(name.strip(), name.strip())
        if name not in GENERATORS:
            raise DataError(f"unknown generator {name!r}; expected one of {sorted(GENERATORS)}")
        keys = GENERATORS[name]
        values = [v for v in rest.split(",") if v.strip()] if rest else []
        if len(values) != len(keys):
            raise DataError(f"generator {name!r} takes {len(keys)} values ({','.join(keys)}), "
                            f"got {len(values)}")
        params = {}
        for key, v in zip(keys, values):
            try:
                params[key] = float(v) if key == "spread" else int(v)
            except ValueError:
                raise DataError(f"bad value {v!r} for {key}") from None
        return cls(generator=name, params=params, normalize=normalize)

    def describe(self) -> dict:
        if self.generator:
            return {"generator": self.generator, "params": dict(self.params),
                    "normalize": self.normalize}
        return {"path": self.path, "format": self.format, "header": self.header,
                "normalize": self.normalize}


def _normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def _parse_fast(text, fmt, header):
    # numpy's C reader; any problem falls back to the line-by-line parser
    if not text.strip():
        return None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # "input contained no data"
            X = np.loadtxt(io.StringIO(text), delimiter="," if fmt == "csv" else None,
                           skiprows=1 if header else 0, comments=None, ndmin=2,
                           dtype=np.float64)
    except ValueError:
        return None
    if X.size == 0 or not np.isfinite(X).all():
        return None
    return X


def parse_points(text: str, fmt: str = "csv", header: bool = False) -> np.ndarray:
    if fmt not in ("csv", "whitespace"):
        raise DataError(f"unknown format {fmt!r}")
    X = _parse_fast(text, fmt, header)
    if X is not None:
        return X
    # slow path: locate and report the offending line
    rows, arity = [], None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if header and lineno == 1:
            continue
        line = line.strip()
        if not line:
            continue
        fields = line.split(",") if fmt == "csv" else line.split()
        try:
            row = [float(f) for f in fields]
        except ValueError:
            raise DataError(f"line {lineno}: cannot parse {line!r}") from None
        if not all(math.isfinite(v) for v in row):
            raise DataError(f"line {lineno}: non-finite value")
        if arity is None:
            arity = len(row)
        elif len(row) != arity:
            raise DataError(f"line {lineno}: expected {arity} values, got {len(row)}")
        rows.append(row)
    if not rows:
        raise DataError("no data rows")
    return np.array(rows, dtype=float)


def load_points(spec: DatasetSpec) -> PointSet:
    """Read an explicit-mode point set from ``spec.path`` (one point per row)."""
    if spec.path is None:
        raise DataError("dataset spec has no path")
    try:
        text = Path(spec.path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {spec.path}: {exc}") from None
    X = parse_points(text, spec.format, spec.header)
    if spec.normalize:
        X = _normalize_rows(X)
    return PointSet(X)


def write_points(ps_or_X, path, fmt: str = "csv"):
    """Write coordinates with shortest round-trip float formatting."""
    X = ps_or_X.coords if isinstance(ps_or_X, PointSet) else np.asarray(ps_or_X, float)
    sep = "," if fmt == "csv" else " "
    with open(path, "w") as fh:
        for row in X:
            fh.write(sep.join(repr(float(v)) for v in row) + "\n")


def make_clustered(n, d, clusters, spread, seed=None):
    """Gaussian blobs around centers at pairwise distance >= spread * sqrt(d).

    Returns ``(X, labels, centers)``. Every cluster receives at least one point
    when ``n >= clusters``.
    """
    if n < 1 or d < 1 or clusters < 1 or spread < 0:
        raise DataError("clustered generator needs n, d, clusters >= 1 and spread >= 0")
    rng = np.random.default_rng(seed)
    min_dist = spread * math.sqrt(d)
    scale = max(min_dist, 1.0)
    centers = np.empty((0, d))
    attempts = 0
    while centers.shape[0] < clusters:
        c = rng.standard_normal(d) * scale
        if centers.shape[0] == 0 or np.linalg.norm(centers - c, axis=1).min() >= min_dist:
            centers = np.vstack([centers, c])
        attempts += 1
        if attempts % 100 == 0:
            scale *= 1.5
    labels = rng.permutation(np.arange(n) % clusters)
    X = centers[labels] + rng.standard_normal((n, d))
    return X, labels, centers


def _adversarial_base(rng, d):
    # a long vector plus two shorter ones symmetric about it: greedy takes the
    # long one first and misses the wider pair
    jitter = rng.uniform(-0.002, 0.002, size=3)
    base = np.array([[1.01 + jitter[0], 0.0],
                     [0.9 + jitter[1], 0.436 + jitter[2]],
                     [0.9 + jitter[1], -0.436 - jitter[2]]])
    Q, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    return base @ Q.T


def make_adversarial_greedy(n, d, seed=None, max_tries=100):
    """Instance on which greedy with k=2 is strictly worse than the optimum."""
    from .algorithms import brute_force_maxdet, greedy

    if n < 3 or d < 2:
        raise DataError("adversarial generator needs n >= 3 and d >= 2")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        X = _adversarial_base(rng, d)
        if n > 3:
            filler = rng.standard_normal((n - 3, d))
            filler *= rng.uniform(0.0, 0.1, size=(n - 3, 1)) / np.linalg.norm(filler, axis=1,
                                                                                keepdims=True)
            X = np.vstack([X, filler])
        ps = PointSet(X)
        if n > 2000 or greedy(ps, 2).log_volume < brute_force_maxdet(ps, 2)[1] - 1e-9:
            return X
    raise DataError("could not build an adversarial instance")


def generate(spec: DatasetSpec, seed=None) -> PointSet:
    """Synthetic point set; a pure function of ``(spec, seed)``."""
    name = GENERATOR_ALIASES.get(spec.generator, spec.generator)
    p = spec.params
    try:
        if name == "gaussian":
            n, d = int(p["n"]), int(p["d"])
            if n < 1 or d < 1:
                raise DataError("gaussian generator needs n, d >= 1")
            X = np.random.default_rng(seed).standard_normal((n, d))
        elif name == "clustered":
            X, _, _ = make_clustered(int(p["n"]), int(p["d"]), int(p["clusters"]),
                                     float(p["spread"]), seed)
        elif name == "adversarial-greedy":
            X = make_adversarial_greedy(int(p["n"]), int(p["d"]), seed)
        else:
            raise DataError(f"unknown generator {spec.generator!r}")
    except KeyError as exc:
        raise DataError(f"missing generator parameter {exc}") from None
    if spec.normalize:
        X = _normalize_rows(X)
    return PointSet(X)


def resolve(spec: DatasetSpec, seed=None) -> PointSet:
    return generate(spec, seed) if spec.generator else load_points(spec)
