"""Dataset text format and on-disk model layout.

Datasets use the common sparse multi-label text format: a header line
``n d l`` (rows, feature count, label count) followed by one line per row,

    lab1,lab2 idx:val idx:val ...

with zero-based indices. A row with no labels starts with a space. Models
persist as a directory holding ``manifest.json`` plus one little-endian
binary blob per (learner, cluster) pair.
"""

from __future__ import annotations

import json
import struct
import warnings
from array import array
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import CorruptModel, InvalidInput, ParseError, VersionError
from .pipeline import ClusterModel, EnsembleModel, TrainConfig

FORMAT_VERSION = "1"
_BLOB_MAGIC = b"RXCLSTR1"


@dataclass(frozen=True, eq=False)
class SparseDataset:
    """Feature rows ``X`` (n, d) and binary label rows ``Y`` (n, l).

    ``name`` is a human-readable tag (usually the source file stem); it is
    ignored by equality, which compares the matrix contents exactly.
    """

    X: sp.csr_matrix
    Y: sp.csr_matrix
    name: str = ""

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise InvalidInput(
                f"X has {self.X.shape[0]} rows, Y has {self.Y.shape[0]}"
            )

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def l(self):
        return self.Y.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SparseDataset):
            return NotImplemented
        return _csr_equal(self.X, other.X) and _csr_equal(self.Y, other.Y)


def _csr_equal(a, b):
    a, b = a.tocsr(), b.tocsr()
    a.sort_indices()
    b.sort_indices()
    return (
        a.shape == b.shape
        and np.array_equal(a.indptr, b.indptr)
        and np.array_equal(a.indices, b.indices)
        and np.array_equal(a.data, b.data)
    )


def load_xmc_file(path, one_based=False, l2_normalize=False):
    """Parse a sparse multi-label text file into a SparseDataset.

    Duplicate feature indices within a row keep the last value; duplicate
    labels collapse; both are reported once per file through a warning.
    Malformed content raises ParseError carrying the 1-based line number.
    """
    path = Path(path)
    shift = 1 if one_based else 0
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise ParseError("empty file", line=1)
        parts = header.split()
        if len(parts) != 3:
            raise ParseError(f"header must be 'n d l', got {header.strip()!r}", line=1)
        try:
            n, d, l = (int(p) for p in parts)
        except ValueError:
            raise ParseError(f"header must hold three integers, got {header.strip()!r}", line=1)
        if n < 0 or d < 1 or l < 1:
            raise ParseError(f"header values out of range: n={n} d={d} l={l}", line=1)

        x_indptr = array("q", [0])
        x_indices = array("q")
        x_data = array("d")
        y_indptr = array("q", [0])
        y_indices = array("q")
        rows_read = 0
        dup_entries = 0

        for lineno, line in enumerate(fh, start=2):
            if line.strip() == "" and rows_read >= n:
                continue
            if rows_read >= n:
                raise ParseError(f"more than the {n} rows announced in the header", line=lineno)
            label_part, _, feat_part = line.rstrip("\n").partition(" ")
            labels = {}
            if label_part:
                for tok in label_part.split(","):
                    try:
                        lab = int(tok)
                    except ValueError:
                        raise ParseError(f"bad label {tok!r}", line=lineno)
                    lab -= shift
                    if not 0 <= lab < l:
                        raise ParseError(f"label {lab} outside [0, {l})", line=lineno)
                    if lab in labels:
                        dup_entries += 1
                    labels[lab] = True
            feats = {}
            for tok in feat_part.split():
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"feature token {tok!r} lacks ':'", line=lineno)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"bad feature token {tok!r}", line=lineno)
                idx -= shift
                if not 0 <= idx < d:
                    raise ParseError(f"feature index {idx} outside [0, {d})", line=lineno)
                if not np.isfinite(val):
                    raise ParseError(f"non-finite feature value in {tok!r}", line=lineno)
                if idx in feats:
                    dup_entries += 1
                feats[idx] = val
            for lab in sorted(labels):
                y_indices.append(lab)
            y_indptr.append(len(y_indices))
            for idx in sorted(feats):
                x_indices.append(idx)
                x_data.append(feats[idx])
            x_indptr.append(len(x_indices))
            rows_read += 1

    if rows_read != n:
        raise ParseError(
            f"header announced {n} rows but file holds {rows_read}", line=rows_read + 1
        )
    if dup_entries:
        warnings.warn(
            f"{path.name}: {dup_entries} duplicate row entries collapsed (last value kept)",
            stacklevel=2,
        )
    x = sp.csr_matrix(
        (
            np.frombuffer(x_data, dtype=np.float64),
            np.frombuffer(x_indices, dtype=np.int64),
            np.frombuffer(x_indptr, dtype=np.int64),
        ),
        shape=(n, d),
    )
    y = sp.csr_matrix(
        (
            np.ones(len(y_indices)),
            np.frombuffer(y_indices, dtype=np.int64),
            np.frombuffer(y_indptr, dtype=np.int64),
        ),
        shape=(n, l),
    )
    if l2_normalize:
        norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
        scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
        x = sp.diags(scale) @ x
        x = x.tocsr()
    return SparseDataset(X=x, Y=y, name=path.stem)


def save_xmc_file(path, dataset):
    """Write a SparseDataset in the text format; lossless for float64."""
    x, y = dataset.X, dataset.Y
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{dataset.n} {dataset.d} {dataset.l}\n")
        for i in range(dataset.n):
            labs = y.indices[y.indptr[i] : y.indptr[i + 1]]
            feats_lo, feats_hi = x.indptr[i], x.indptr[i + 1]
            feat_toks = (
                f"{x.indices[j]}:{x.data[j]:.17g}" for j in range(feats_lo, feats_hi)
            )
            fh.write(",".join(str(lab) for lab in np.sort(labs)))
            fh.write(" ")
            fh.write(" ".join(feat_toks))
            fh.write("\n")


def _pack_cluster(cm, l):
    d = cm.centroid.shape[0]
    nh, r = cm.Z.shape
    ml = cm.member_labels
    parts = [
        _BLOB_MAGIC,
        struct.pack("<4Q", d, r, nh, l),
        np.ascontiguousarray(cm.centroid, dtype="<f8").tobytes(),
        np.ascontiguousarray(cm.V, dtype="<f8").tobytes(),
        np.ascontiguousarray(cm.Z, dtype="<f8").tobytes(),
        struct.pack("<Q", ml.nnz),
        np.ascontiguousarray(ml.indptr, dtype="<u8").tobytes(),
        np.ascontiguousarray(ml.indices, dtype="<u8").tobytes(),
        np.ascontiguousarray(ml.data, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


class _BlobReader:
    def __init__(self, raw, name):
        self.raw = raw
        self.name = name
        self.pos = 0

    def take(self, count):
        if self.pos + count > len(self.raw):
            raise CorruptModel(f"{self.name}: truncated blob")
        out = self.raw[self.pos : self.pos + count]
        self.pos += count
        return out

    def array(self, dtype, count):
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype)

    def done(self):
        if self.pos != len(self.raw):
            raise CorruptModel(f"{self.name}: {len(self.raw) - self.pos} trailing bytes")


def _unpack_cluster(raw, name, expect_d, expect_l):
    rd = _BlobReader(raw, name)
    if rd.take(len(_BLOB_MAGIC)) != _BLOB_MAGIC:
        raise CorruptModel(f"{name}: bad magic")
    d, r, nh, l = struct.unpack("<4Q", rd.take(32))
    if d != expect_d or l != expect_l:
        raise CorruptModel(
            f"{name}: dims ({d}, {l}) disagree with manifest ({expect_d}, {expect_l})"
        )
    centroid = rd.array("<f8", d).astype(np.float64)
    v = rd.array("<f8", r * d).astype(np.float64).reshape(r, d)
    z = rd.array("<f8", nh * r).astype(np.float64).reshape(nh, r)
    (nnz,) = struct.unpack("<Q", rd.take(8))
    indptr = rd.array("<u8", nh + 1).astype(np.int64)
    indices = rd.array("<u8", nnz).astype(np.int64)
    data = rd.array("<f8", nnz).astype(np.float64)
    rd.done()
    if indptr[0] != 0 or indptr[-1] != nnz or np.any(np.diff(indptr) < 0):
        raise CorruptModel(f"{name}: inconsistent label index pointers")
    if nnz and indices.max() >= l:
        raise CorruptModel(f"{name}: label index outside [0, {l})")
    member_labels = sp.csr_matrix((data, indices, indptr), shape=(nh, l))
    return ClusterModel(centroid=centroid, V=v, Z=z, member_labels=member_labels)


def _blob_name(learner, cluster):
    return f"learner{learner:03d}_cluster{cluster:03d}.bin"


def save_model(model, dir_path):
    """Write an EnsembleModel as manifest.json plus per-cluster blobs.

    The output is byte-identical for equal models: the manifest is sorted
    and every blob is a fixed little-endian layout.
    """
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "d": model.d,
        "l": model.l,
        "config": model.config.to_dict(),
        "num_learners": len(model.learners),
        "clusters_per_learner": [len(cl) for cl in model.learners],
    }
    (dir_path / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    for li, clusters in enumerate(model.learners):
        for ci, cm in enumerate(clusters):
            (dir_path / _blob_name(li, ci)).write_bytes(_pack_cluster(cm, model.l))


def load_model(dir_path):
    """Read a model directory written by save_model."""
    dir_path = Path(dir_path)
    manifest_path = dir_path / "manifest.json"
    if not manifest_path.is_file():
        raise CorruptModel(f"{manifest_path} not found")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"manifest.json is not valid JSON: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(
            f"model format {version!r} is not supported (expected {FORMAT_VERSION!r})"
        )
    try:
        d = int(manifest["d"])
        l = int(manifest["l"])
        config = TrainConfig.from_dict(manifest["config"])
        counts = [int(c) for c in manifest["clusters_per_learner"]]
        if len(counts) != int(manifest["num_learners"]):
            raise CorruptModel("learner count disagrees with clusters_per_learner")
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"manifest.json is missing or malformed: {exc}") from exc
    learners = []
    for li, n_clusters in enumerate(counts):
        clusters = []
        for ci in range(n_clusters):
            blob_path = dir_path / _blob_name(li, ci)
            if not blob_path.is_file():
                raise CorruptModel(f"{blob_path.name} listed in manifest but missing")
            clusters.append(_unpack_cluster(blob_path.read_bytes(), blob_path.name, d, l))
        learners.append(clusters)
    return EnsembleModel(config=config, d=d, l=l, learners=learners)
