"""Dataset ingestion (IDX, CSV), experiment configuration, result emission."""

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, IdxError

__all__ = [
    "load_idx",
    "load_csv_dataset",
    "write_records",
    "ExperimentConfig",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
_MAX_ELEMENTS = 1 << 33


def load_idx(path):
    """Read an IDX file of unsigned bytes.

    Image files (magic 0x00000803) come back as an ``n x (rows*cols)`` float
    matrix scaled to [0, 1] by 1/255, row-major per image; label files (magic
    0x00000801) come back as the raw byte vector.
    """
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise IdxError("truncated", f"{path}: shorter than any IDX header")
    magic = struct.unpack(">I", data[:4])[0]
    if magic == IDX_IMAGES_MAGIC:
        n_dims = 3
    elif magic == IDX_LABELS_MAGIC:
        n_dims = 1
    else:
        raise IdxError("bad-magic", f"{path}: unrecognized magic 0x{magic:08x}")
    header = 4 + 4 * n_dims
    if len(data) < header:
        raise IdxError("truncated", f"{path}: header cut short")
    dims = struct.unpack(f">{n_dims}I", data[4:header])
    total = 1
    for d in dims:
        total *= d
    if total > _MAX_ELEMENTS:
        raise IdxError("dim-overflow", f"{path}: {dims} is implausibly large")
    if len(data) - header < total:
        raise IdxError(
            "truncated",
            f"{path}: payload holds {len(data) - header} bytes, header promises {total}",
        )
    raw = np.frombuffer(data, dtype=np.uint8, count=total, offset=header)
    if magic == IDX_LABELS_MAGIC:
        return raw.copy()
    n, rows, cols = dims
    return raw.reshape(n, rows * cols).astype(float) / 255.0


def write_idx_images(path, images):
    """Inverse of load_idx for image matrices with square pixel counts."""
    images = np.asarray(images)
    n, d = images.shape
    side = int(round(d**0.5))
    if side * side != d:
        raise ValueError("images must flatten square frames")
    payload = np.clip(np.round(images * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, side, side))
        fh.write(payload.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def load_csv_dataset(path):
    """CSV with a header row: feature columns plus an optional 'label' column.

    Empty label cells mean unlabeled.  Returns ``(features, labels)`` where
    labels is a vertex->class dict (None when the file has no label column).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        label_col = header.index("label") if "label" in header else None
        rows = []
        labels = {} if label_col is not None else None
        for idx, row in enumerate(reader):
            if len(row) != len(header):
                raise DataError(f"{path}: row {idx + 2} has {len(row)} cells, header has {len(header)}")
            feats = []
            for col, cell in enumerate(row):
                if col == label_col:
                    cell = cell.strip()
                    if cell:
                        try:
                            labels[idx] = int(cell)
                        except ValueError:
                            raise DataError(
                                f"{path}: row {idx + 2}: label {cell!r} is not an integer"
                            ) from None
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {idx + 2}: non-numeric cell {cell!r}"
                    ) from None
            rows.append(feats)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float), labels


def write_csv_dataset(path, features, labels=None):
    features = np.asarray(features)
    n, d = features.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"x{i}" for i in range(d)]
        if labels is not None:
            header.append("label")
        writer.writerow(header)
        for idx in range(n):
            row = [repr(float(v)) for v in features[idx]]
            if labels is not None:
                row.append(str(labels[idx]) if idx in labels else "")
            writer.writerow(row)


def write_records(records, out_dir):
    """Emit every record as both CSV and whitespace .dat; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, record in records.items():
        csv_path = out_dir / f"{name}.csv"
        dat_path = out_dir / f"{name}.dat"
        record.to_csv(csv_path)
        record.to_dat(dat_path)
        paths.extend([csv_path, dat_path])
    return paths


_EXPERIMENTS = ("regression-convergence", "ssl-accuracy", "tiny-oracle")
_SOLVERS = ("dirls", "newton")


@dataclass
class ExperimentConfig:
    """One experiment recipe; every solver default is overridable here."""

    experiment: str = "regression-convergence"
    p_values: list = field(default_factory=lambda: [10.0, 20.0, 40.0, 80.0])
    delta: tuple | None = (1e-9, 1e9)
    m: int = 500
    n: int = 450
    n_vertices: int = 400
    knn: int = 10
    seeds: list = field(default_factory=lambda: [1])
    solvers: list = field(default_factory=lambda: ["dirls"])
    gap_tol: float = 1e-8
    max_outer: int = 200
    inner_rel_tol: float = 1e-12
    newton_eps: float = 1e-8
    labels_per_class: int = 1
    subsample: int = 0
    pca_dims: int = 0
    threads: int = 1
    dataset: str | None = None  # CSV path, or "IMAGES.idx:LABELS.idx"
    out_dir: str = "out"

    def validate(self):
        if self.experiment not in _EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for s in self.solvers:
            if s not in _SOLVERS:
                raise ConfigError(f"unknown solver {s!r}")
        if self.delta is not None:
            lo, hi = self.delta
            if not 0 < lo <= hi:
                raise ConfigError(f"invalid relaxation interval {self.delta}")
        if "dirls" in self.solvers and self.delta is None:
            if any(p > 2.0 for p in self.p_values):
                raise ConfigError(
                    "dirls needs a relaxation interval for exponents p > 2"
                )
        if any(p < 2.0 for p in self.p_values):
            raise ConfigError("experiments cover exponents p >= 2 only")
        if self.gap_tol <= 0 or self.inner_rel_tol <= 0 or self.newton_eps <= 0:
            raise ConfigError("tolerances must be positive")
        if self.max_outer < 1 or self.threads < 1:
            raise ConfigError("max_outer and threads must be >= 1")
        if self.pca_dims < 0:
            raise ConfigError("pca_dims must be >= 0 (0 disables)")
        return self

    def to_json(self):
        doc = dict(self.__dict__)
        doc["delta"] = list(self.delta) if self.delta is not None else None
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if doc.get("delta") is not None:
            doc["delta"] = tuple(doc["delta"])
        return cls(**doc).validate()

    @classmethod
    def from_file(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text)

    def echo(self, out_dir=None):
        """Write the effective configuration next to the results."""
        target = Path(out_dir if out_dir is not None else self.out_dir)
        target.mkdir(parents=True, exist_ok=True)
        (target / "config.json").write_text(self.to_json() + "\n")
