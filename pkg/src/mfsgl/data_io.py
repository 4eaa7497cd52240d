"""Multi-view datasets: validation, normalization and text/JSON storage.

In memory every view is ``d_v x n`` (features by samples).  On disk each
view is a delimiter-separated file with one sample per line, and a JSON
manifest lists the views in order.
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import (DimensionMismatch, FileMissing, InvalidLabels, ManifestError,
                     NonFiniteValue, ParseError)

FLOAT_FMT = "%.17g"


@dataclass(frozen=True, eq=False)
class MultiViewDataset:
    views: List[np.ndarray]
    labels: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if len(self.views) < 1:
            raise DimensionMismatch(0, "a dataset needs at least one view")
        views = [np.atleast_2d(np.asarray(X, dtype=float)) for X in self.views]
        n = views[0].shape[1]
        for v, X in enumerate(views, start=1):
            if X.ndim != 2 or X.shape[0] < 1:
                raise DimensionMismatch(v, f"expected a 2-D d x n matrix, got shape {X.shape}")
            if X.shape[1] != n:
                raise DimensionMismatch(v, f"has {X.shape[1]} samples, view 1 has {n}")
            bad = np.argwhere(~np.isfinite(X))
            if bad.size:
                f, i = bad[0]
                raise NonFiniteValue(v, int(i) + 1, int(f) + 1)
        if n < 2:
            raise DimensionMismatch(1, "need at least 2 samples")
        object.__setattr__(self, "views", views)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise InvalidLabels(f"expected {n} labels, got shape {labels.shape}")
            if not np.issubdtype(labels.dtype, np.integer):
                if not np.all(labels == np.round(labels)):
                    raise InvalidLabels("labels must be integers")
            labels = labels.astype(np.int64)
            if labels.min() < 0:
                raise InvalidLabels("labels must be non-negative")
            counts = np.bincount(labels)
            if np.any(counts == 0):
                raise InvalidLabels(f"class ids must be contiguous; empty classes "
                                    f"{np.flatnonzero(counts == 0).tolist()}")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.views[0].shape[1]

    @property
    def V(self):
        return len(self.views)

    @property
    def dims(self):
        return [X.shape[0] for X in self.views]

    @property
    def n_classes(self):
        return None if self.labels is None else int(self.labels.max()) + 1

    def replace(self, views=None, labels=None, name=None):
        return MultiViewDataset(self.views if views is None else views,
                                self.labels if labels is None else labels,
                                self.name if name is None else name)


@dataclass
class ViewEntry:
    path: str
    dim: int
    delimiter: str = ","
    header: bool = False


@dataclass
class DatasetManifest:
    views: List[ViewEntry]
    labels_path: Optional[str] = None
    name: str = ""
    base_dir: str = "."
    extra: dict = field(default_factory=dict)

    def resolve(self, p):
        return Path(p) if os.path.isabs(p) else Path(self.base_dir) / p

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        try:
            views = [ViewEntry(str(e["path"]), int(e["dim"]), e.get("delimiter", ","),
                               bool(e.get("header", False))) for e in doc["views"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"malformed view entry: {exc}") from exc
        if not views:
            raise ManifestError("manifest lists no views")
        known = {"views", "labels_path", "name"}
        return cls(views, doc.get("labels_path"), doc.get("name", ""), str(base_dir),
                   {k: v for k, v in doc.items() if k not in known})

    @classmethod
    def read(cls, path):
        path = Path(path)
        if not path.is_file():
            raise FileMissing(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self):
        doc = {"name": self.name,
               "views": [{"path": e.path, "dim": e.dim, "delimiter": e.delimiter,
                          "header": e.header} for e in self.views]}
        if self.labels_path is not None:
            doc["labels_path"] = self.labels_path
        doc.update(self.extra)
        return doc

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def read_matrix(path, delimiter=",", header=False):
    """Parse a numeric text file into a (rows x cols) array, samples as rows.

    Raises ``ParseError`` with the 1-based line and column of the first bad
    token.  Non-finite tokens such as ``nan`` parse; callers check them.
    """
    path = Path(path)
    if not path.is_file():
        raise FileMissing(path)
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            tokens = line.split(delimiter) if delimiter.strip() else line.split()
            try:
                values = [float(tok) for tok in tokens]
            except ValueError:
                for col, tok in enumerate(tokens, start=1):
                    try:
                        float(tok)
                    except ValueError:
                        raise ParseError(lineno, col, str(path), tok) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(lineno, min(width, len(values)) + 1, str(path),
                                 f"<{len(values)} fields, expected {width}>")
            rows.append(values)
    if not rows:
        raise ParseError(1, 1, str(path), "<empty file>")
    return np.array(rows, dtype=float)


def load_dataset(manifest):
    """Load the views (and labels) listed in a manifest or manifest path."""
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.read(manifest)
    views = []
    n = None
    for v, entry in enumerate(manifest.views, start=1):
        M = read_matrix(manifest.resolve(entry.path), entry.delimiter, entry.header)
        if M.shape[1] != entry.dim:
            raise DimensionMismatch(v, f"manifest declares dim {entry.dim}, file has "
                                       f"{M.shape[1]} columns")
        if n is None:
            n = M.shape[0]
        elif M.shape[0] != n:
            raise DimensionMismatch(v, f"has {M.shape[0]} samples, view 1 has {n}")
        bad = np.argwhere(~np.isfinite(M))
        if bad.size:
            i, f = bad[0]
            raise NonFiniteValue(v, int(i) + 1 + int(entry.header), int(f) + 1)
        views.append(M.T.copy())
    labels = None
    if manifest.labels_path is not None:
        labels = read_labels(manifest.resolve(manifest.labels_path))
        if labels.shape[0] != n:
            raise DimensionMismatch(0, f"labels file has {labels.shape[0]} entries, views have {n}")
    return MultiViewDataset(views, labels, name=manifest.name)


def read_labels(path):
    path = Path(path)
    if not path.is_file():
        raise FileMissing(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if lines and not _is_number(lines[0]):
        lines = lines[1:]
    out = []
    for lineno, tok in enumerate(lines, start=1):
        try:
            out.append(int(tok))
        except ValueError:
            raise ParseError(lineno, 1, str(path), tok) from None
    return np.array(out, dtype=np.int64)


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def write_matrix(path, M, delimiter=",", header=None):
    """Write rows of ``M`` with 17 significant digits (exact float round trip)."""
    with open(path, "w") as fh:
        if header is not None:
            fh.write(delimiter.join(header) + "\n")
        np.savetxt(fh, np.atleast_2d(M), fmt=FLOAT_FMT, delimiter=delimiter)


def save_dataset(ds, out_dir, delimiter=",", header=True, extra=None):
    """Write one file per view plus labels and ``manifest.json``; return the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for v, X in enumerate(ds.views):
        fname = f"view{v}.csv"
        cols = [f"f{i}" for i in range(X.shape[0])] if header else None
        write_matrix(out_dir / fname, X.T, delimiter, cols)
        entries.append(ViewEntry(fname, X.shape[0], delimiter, header))
    labels_path = None
    if ds.labels is not None:
        labels_path = "labels.csv"
        with open(out_dir / labels_path, "w") as fh:
            fh.write("label\n")
            fh.writelines(f"{int(y)}\n" for y in ds.labels)
    manifest = DatasetManifest(entries, labels_path, ds.name, str(out_dir), dict(extra or {}))
    path = out_dir / "manifest.json"
    manifest.write(path)
    return path


def normalize_views(ds, mode="minmax"):
    """Per-feature scaling; constant features map to all-zero rows."""
    if mode == "none":
        return ds
    views = []
    for X in ds.views:
        if mode == "minmax":
            lo = X.min(axis=1, keepdims=True)
            span = X.max(axis=1, keepdims=True) - lo
            Z = np.divide(X - lo, span, out=np.zeros_like(X), where=span > 0)
        elif mode == "zscore":
            mean = X.mean(axis=1, keepdims=True)
            sd = X.std(axis=1, keepdims=True)
            Z = np.divide(X - mean, sd, out=np.zeros_like(X), where=sd > 0)
        else:
            raise ValueError(f"unknown normalization mode {mode!r}")
        views.append(Z)
    return ds.replace(views=views)
