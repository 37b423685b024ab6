"""Data files, synthetic teachers, run configs and checkpoints.

IDX files
    Big-endian: two zero bytes, a type byte (0x08 unsigned byte, 0x0D
    float32, 0x0E float64), a dimension-count byte, one uint32 per
    dimension, then the row-major payload. MNIST images use magic
    0x00000803 and labels 0x00000801.

Config files
    One ``key = value`` per line, ``#`` starts a comment. Keys are the
    :class:`RunConfig` field names; sequences are comma-separated and an
    empty value means "unset". Unknown keys are rejected.

Checkpoints
    Canonical JSON (sorted keys, no whitespace) holding the format tag,
    version, network config, every variational parameter as base64 of its
    little-endian float64 bytes, optional rng states and a sha256 over the
    payload. Writing the same model twice yields identical bytes.
"""

from __future__ import annotations

import base64
import csv
import dataclasses
import gzip
import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import autodiff as ad
from .layers import LOCAL_PARAM_NAMES
from .network import ACTIVATIONS, LIKELIHOODS, NetworkConfig, SpikeSlabMLP
from .planner import TopologySpec
from .priors import PriorSpec
from .sampling import RelaxationConfig, SeededRng
from .training import OPTIMIZERS, TrainConfig

# --------------------------------------------------------------------- IDX

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IDX_TYPES = {0x08: np.dtype(">u1"), 0x0D: np.dtype(">f4"), 0x0E: np.dtype(">f8")}
IDX_TYPE_CODES = {np.dtype("u1"): 0x08, np.dtype("f4"): 0x0D, np.dtype("f8"): 0x0E}


class IdxFormatError(ValueError):
    """Malformed IDX input; ``offset`` is the byte position of the problem."""

    def __init__(self, path, offset: int, message: str):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{path}: byte {offset}: {message}")


@dataclass
class IdxArray:
    """Decoded IDX contents: ``data`` has one row per item, flattened row-major."""

    magic: int
    dims: tuple[int, ...]
    data: np.ndarray

    @property
    def item_shape(self) -> tuple[int, ...]:
        return self.dims[1:]


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        raw = fh.read()
    if str(path).endswith(".gz"):
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise IdxFormatError(path, 0, f"bad gzip stream ({exc})") from None
    return raw


def parse_idx(raw: bytes, path="<bytes>", expect_magic: int | None = None) -> IdxArray:
    if len(raw) < 4:
        raise IdxFormatError(path, len(raw), "truncated header (need 4 magic bytes)")
    magic = struct.unpack(">I", raw[:4])[0]
    if expect_magic is not None and magic != expect_magic:
        raise IdxFormatError(path, 0, f"bad magic: expected 0x{expect_magic:08x}, got 0x{magic:08x}")
    if raw[0] != 0 or raw[1] != 0:
        raise IdxFormatError(path, 0, f"bad magic 0x{magic:08x}: first two bytes must be zero")
    if raw[2] not in IDX_TYPES:
        raise IdxFormatError(path, 2, f"unsupported element type 0x{raw[2]:02x}")
    ndim = raw[3]
    if ndim < 1:
        raise IdxFormatError(path, 3, "dimension count must be >= 1")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(path, len(raw), f"truncated header: {ndim} dimensions need {header} bytes")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    dtype = IDX_TYPES[raw[2]]
    expected = header + math.prod(dims) * dtype.itemsize
    if len(raw) < expected:
        raise IdxFormatError(path, len(raw), f"truncated payload: expected {expected} bytes in total")
    if len(raw) > expected:
        raise IdxFormatError(path, expected, f"{len(raw) - expected} trailing bytes after payload")
    flat = np.frombuffer(raw, dtype=dtype, offset=header, count=math.prod(dims))
    data = flat.astype(dtype.newbyteorder("="))
    data = data.reshape(dims[0], -1) if ndim > 1 else data
    return IdxArray(magic, tuple(dims), data)


def read_idx(path, expect_magic: int | None = None) -> IdxArray:
    return parse_idx(_read_bytes(path), path, expect_magic)


def encode_idx(arr: IdxArray) -> bytes:
    dtype = np.dtype(arr.data.dtype).newbyteorder("=")
    code = IDX_TYPE_CODES.get(np.dtype(dtype.str.lstrip("<>=|")))
    if code is None:
        raise ValueError(f"no IDX type code for dtype {arr.data.dtype}")
    if arr.data.size != math.prod(arr.dims):
        raise ValueError(f"data size {arr.data.size} does not match dims {arr.dims}")
    head = bytes([0, 0, code, len(arr.dims)]) + struct.pack(f">{len(arr.dims)}I", *arr.dims)
    return head + np.ascontiguousarray(arr.data).astype(IDX_TYPES[code]).tobytes()


def write_idx(arr: IdxArray, path) -> None:
    payload = encode_idx(arr)
    if str(path).endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    with open(path, "wb") as fh:
        fh.write(payload)


def idx_from_array(data: np.ndarray) -> IdxArray:
    data = np.asarray(data)
    code = IDX_TYPE_CODES.get(np.dtype(data.dtype.str.lstrip("<>=|")))
    if code is None:
        raise ValueError(f"no IDX type code for dtype {data.dtype}")
    magic = (code << 8) | data.ndim
    flat = data.reshape(data.shape[0], -1) if data.ndim > 1 else data
    return IdxArray(magic, tuple(data.shape), flat)


def read_idx_images(path) -> np.ndarray:
    return read_idx(path, IDX_IMAGES_MAGIC).data


def read_idx_labels(path) -> np.ndarray:
    return read_idx(path, IDX_LABELS_MAGIC).data


# ----------------------------------------------------------------- datasets


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    split: str = "train"

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs)
        self.targets = np.asarray(self.targets)
        if self.inputs.ndim != 2:
            raise ValueError(f"inputs must be a matrix, got shape {self.inputs.shape}")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(f"{self.inputs.shape[0]} input rows but {self.targets.shape[0]} targets")
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("inputs contain non-finite values")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def head(self, n: int) -> "Dataset":
        return Dataset(self.inputs[:n], self.targets[:n], self.split)


MNIST_PIXEL_SCALE = 126.0
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def preprocess_mnist(raw: Dataset, pixel_scale: float = MNIST_PIXEL_SCALE) -> Dataset:
    """Divide raw pixel bytes by ``pixel_scale`` (126 by default, so bright pixels exceed 1)."""
    if not pixel_scale > 0:
        raise ValueError("pixel_scale must be positive")
    return Dataset(raw.inputs.astype(np.float64) / pixel_scale, raw.targets, raw.split)


def load_idx_dataset(images_path, labels_path, split: str = "train", limit: int = 0) -> Dataset:
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images_path} has {images.shape[0]} images but "
                         f"{labels_path} has {labels.shape[0]} labels")
    ds = Dataset(images, labels.astype(np.int64), split)
    return ds.head(limit) if limit else ds


def find_mnist_file(directory, stem: str) -> Path | None:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        path = Path(directory) / name
        if path.exists():
            return path
    return None


def load_mnist(directory, split: str = "train", limit: int = 0,
               pixel_scale: float = MNIST_PIXEL_SCALE) -> Dataset:
    img_stem, lbl_stem = MNIST_FILES[split]
    img, lbl = find_mnist_file(directory, img_stem), find_mnist_file(directory, lbl_stem)
    if img is None or lbl is None:
        raise FileNotFoundError(f"MNIST {split} files not found in {directory}")
    return preprocess_mnist(load_idx_dataset(img, lbl, split, limit), pixel_scale)


def write_csv_dataset(ds: Dataset, path) -> None:
    """Columns ``x0..x{p-1}`` then ``y`` (regression) or ``label`` (class ids)."""
    targets = ds.targets.reshape(len(ds), -1)
    integer = np.issubdtype(ds.targets.dtype, np.integer)
    ycols = ["label"] if integer else (["y"] if targets.shape[1] == 1
                                       else [f"y{j}" for j in range(targets.shape[1])])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(ds.inputs.shape[1])] + ycols)
        for xi, yi in zip(ds.inputs, targets):
            w.writerow([repr(float(v)) for v in xi]
                       + [str(int(v)) if integer else repr(float(v)) for v in yi])


def read_csv_dataset(path, split: str = "train") -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV file")
    header, body = rows[0], rows[1:]
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    ycols = [i for i, h in enumerate(header) if not h.startswith("x")]
    if not xcols or not ycols:
        raise ValueError(f"{path}: header needs x* input columns and a target column")
    try:
        table = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    y = table[:, ycols]
    if header[ycols[0]] == "label":
        y = y[:, 0].astype(np.int64)
    elif y.shape[1] == 1:
        y = y[:, 0]
    return Dataset(table[:, xcols], y, split)


# -------------------------------------------------------- synthetic teachers

TEACHERS = ("sin", "product", "constant", "sparse-mlp")


@dataclass(frozen=True)
class TeacherSpec:
    """Regression truth ``eta_0`` on ``[0, 1]^p``.

    ``sin``: ``sin(2 pi x_0)``; ``product``: ``prod_j x_j``; ``constant``:
    ``c``; ``sparse-mlp``: a random swish MLP with ``hidden`` widths in which
    only ``s`` nodes per hidden layer are nonzero and each node's incoming
    weights (bias included) have Euclidean norm ``B``.
    """

    kind: str = "sin"
    p: int = 1
    c: float = 0.0
    hidden: tuple[int, ...] = (8,)
    s: int = 2
    B: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TEACHERS:
            raise ValueError(f"unknown teacher {self.kind!r}; expected one of {TEACHERS}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.kind == "sparse-mlp" and not 1 <= self.s <= min(self.hidden):
            raise ValueError("s must lie in [1, min(hidden)]")


def _swish(x):
    return x / (1.0 + np.exp(-x))


def make_teacher(spec: TeacherSpec) -> Callable[[np.ndarray], np.ndarray]:
    if spec.kind == "sin":
        return lambda x: np.sin(2 * np.pi * np.asarray(x)[:, 0])
    if spec.kind == "product":
        return lambda x: np.prod(np.asarray(x), axis=1)
    if spec.kind == "constant":
        return lambda x: np.full(np.asarray(x).shape[0], float(spec.c))
    rng = SeededRng(spec.seed, 0)
    widths = (spec.p,) + tuple(spec.hidden) + (1,)
    blocks = []
    for l in range(len(widths) - 1):
        W = rng.normal((widths[l + 1], widths[l] + 1))
        W *= spec.B / np.linalg.norm(W, axis=1, keepdims=True)
        if l < len(widths) - 2:
            W[spec.s:] = 0.0
        blocks.append(W)

    def eta0(x):
        h = np.asarray(x, dtype=np.float64)
        for l, W in enumerate(blocks):
            h = h @ W[:, 1:].T + W[:, 0]
            if l < len(blocks) - 1:
                h = _swish(h)
        return h[:, 0]

    return eta0


def gen_synthetic(teacher: TeacherSpec, n: int, noise_sigma: float, seed: int,
                  n_test: int | None = None) -> tuple[Dataset, Dataset]:
    """Draw ``x ~ U[0,1]^p`` and ``y = eta_0(x) + N(0, noise_sigma^2)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    n_test = n if n_test is None else n_test
    eta0 = make_teacher(teacher)
    out = []
    for split, count, stream in (("train", n, 0), ("test", n_test, 1)):
        rng = SeededRng(seed, (10, stream))
        x = rng.uniform((count, teacher.p))
        y = eta0(x) + noise_sigma * rng.normal(count)
        out.append(Dataset(x, y, split))
    return out[0], out[1]


# ---------------------------------------------------------------- RunConfig


@dataclass
class RunConfig:
    # network
    widths: tuple[int, ...] = ()
    activation: str = "swish"
    likelihood: str = "categorical"
    parameterization: str = "centered"
    temperature: float = 0.5
    # prior
    prior: str = "ss-gl"
    sigma0_sq: float = 1.0
    a0: float = 4.0
    b0: float = 2.0
    d0_sq: float = 1.0
    creg_sq: float = 1.0
    lambdas: tuple[float, ...] = ()
    # training
    epochs: int = 10
    batch_size: int = 1024
    samples: int = 1
    lr: float = 1e-3
    seed: int | None = None
    optimizer: str = "adam"
    momentum: float = 0.9
    elbo_tolerance: float = 0.0
    eval_every: int = 1
    eval_samples: int = 10
    # planner topology (n = 0 means "use the training-set size")
    n: int = 0
    s: tuple[float, ...] = ()
    B: tuple[float, ...] = ()
    xi: float = 0.0
    t0: float = 1.0
    t0_prime: float = 1.0
    t0_dprime: float = 1.0
    C: tuple[float, ...] = ()
    # data
    data_format: str = "idx"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    train_csv: str = ""
    test_csv: str = ""
    train_limit: int = 0
    test_limit: int = 0
    pixel_scale: float = MNIST_PIXEL_SCALE
    out_dir: str = "runs"

    def validate(self, require_seed: bool = False) -> "RunConfig":
        if require_seed and self.seed is None:
            raise ValueError("seed is required")
        checks = [
            (self.activation in ACTIVATIONS, f"activation must be one of {tuple(ACTIVATIONS)}"),
            (self.likelihood in LIKELIHOODS, f"likelihood must be one of {LIKELIHOODS}"),
            (self.optimizer in OPTIMIZERS, f"optimizer must be one of {OPTIMIZERS}"),
            (self.prior in LOCAL_PARAM_NAMES, f"prior must be one of {tuple(LOCAL_PARAM_NAMES)}"),
            (self.data_format in ("idx", "csv"), "data_format must be 'idx' or 'csv'"),
            (self.epochs >= 1, f"epochs must be >= 1, got {self.epochs}"),
            (self.batch_size >= 1, f"batch_size must be >= 1, got {self.batch_size}"),
            (self.samples >= 1, f"samples must be >= 1, got {self.samples}"),
            (self.train_limit >= 0 and self.test_limit >= 0, "limits must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        if self.widths and len(self.widths) < 3:
            raise ValueError("widths needs at least k0, one hidden width and the output width")
        if self.lambdas and self.widths and len(self.lambdas) != len(self.widths) - 2:
            raise ValueError(f"lambdas needs {len(self.widths) - 2} entries (one per hidden layer)")
        return self

    def prior_spec(self, lambdas: tuple[float, ...] | None = None) -> PriorSpec:
        return PriorSpec(self.prior, self.sigma0_sq, self.a0, self.b0, self.d0_sq, self.creg_sq,
                         tuple(lambdas if lambdas is not None else self.lambdas))

    def network_config(self, lambdas: tuple[float, ...] | None = None) -> NetworkConfig:
        return NetworkConfig(self.widths, self.activation, self.likelihood, self.parameterization,
                             self.prior_spec(lambdas), RelaxationConfig(self.temperature))

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.samples, self.lr,
                           0 if self.seed is None else self.seed, self.optimizer, self.momentum,
                           self.elbo_tolerance, self.eval_every, self.eval_samples)

    def topology(self, n: int | None = None) -> TopologySpec:
        n_eff = self.n or n
        if not n_eff:
            raise ValueError("topology needs n (sample size)")
        return TopologySpec(n=n_eff, k=self.widths, s=self.s, B=self.B, xi=self.xi, t0=self.t0,
                            t0_prime=self.t0_prime, t0_dprime=self.t0_dprime,
                            creg_sq=self.creg_sq, C=self.C)


def _field_kind(f: dataclasses.Field) -> tuple[str, type]:
    t = str(f.type)
    base = int if "int" in t else float if "float" in t else str
    return ("tuple" if t.startswith("tuple") else "optional" if "None" in t else "scalar"), base


def _parse_value(f: dataclasses.Field, text: str):
    kind, base = _field_kind(f)
    text = text.strip()
    if kind == "tuple":
        return tuple(base(v) for v in text.split(",") if v.strip()) if text else ()
    if kind == "optional" and text == "":
        return None
    if base is int:
        return int(text)
    if base is float:
        return float(text)
    return text


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


RUN_FIELDS = {f.name: f for f in fields(RunConfig)}


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in RUN_FIELDS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(RUN_FIELDS[key], value)
        except ValueError:
            raise ValueError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return dataclasses.replace(base or RunConfig(), **values)


def serialize_config(cfg: RunConfig) -> str:
    return "".join(f"{name} = {_format_value(getattr(cfg, name))}\n" for name in RUN_FIELDS)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ValueError(f"{path}: config is not valid UTF-8 text") from None
    return parse_config_text(text, base)


def override_config(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply string-valued overrides as if they were config-file lines."""
    text = "".join(f"{k} = {v}\n" for k, v in overrides.items())
    return parse_config_text(text, cfg)


# --------------------------------------------------------------- checkpoints

CHECKPOINT_FORMAT = "ssbnn-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _encode_array(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"], validate=True)
    shape = tuple(int(s) for s in d["shape"])
    if len(raw) != 8 * math.prod(shape):
        raise CheckpointError(f"array payload has {len(raw)} bytes, shape {shape} needs {8 * math.prod(shape)}")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def _jsonable_state(state):
    if isinstance(state, dict):
        return {k: _jsonable_state(v) for k, v in state.items()}
    if isinstance(state, (list, tuple)):
        return [_jsonable_state(v) for v in state]
    if isinstance(state, np.ndarray):
        return {"__ndarray__": state.dtype.str, "values": state.tolist()}
    if isinstance(state, np.integer):
        return int(state)
    return state


def _restore_state(state):
    if isinstance(state, dict):
        if "__ndarray__" in state:
            return np.array(state["values"], dtype=np.dtype(state["__ndarray__"]))
        return {k: _restore_state(v) for k, v in state.items()}
    if isinstance(state, list):
        return [_restore_state(v) for v in state]
    return state


def config_to_dict(cfg: NetworkConfig) -> dict:
    return {
        "widths": list(cfg.widths), "activation": cfg.activation, "likelihood": cfg.likelihood,
        "parameterization": cfg.parameterization,
        "prior": dataclasses.asdict(cfg.prior) | {"lambdas": list(cfg.prior.lambdas)},
        "relaxation": dataclasses.asdict(cfg.relaxation),
    }


def config_from_dict(d: dict) -> NetworkConfig:
    return NetworkConfig(tuple(d["widths"]), d["activation"], d["likelihood"], d["parameterization"],
                         PriorSpec(**d["prior"]), RelaxationConfig(**d["relaxation"]))


def checkpoint_bytes(model: SpikeSlabMLP, rngs: dict[str, SeededRng] | None = None,
                     extra: dict | None = None) -> bytes:
    payload = {
        "config": config_to_dict(model.config),
        "params": {k: _encode_array(v.value) for k, v in model.named_parameters().items()},
        "rng": {k: _jsonable_state(r.state) for k, r in (rngs or {}).items()},
        "extra": extra or {},
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
           "sha256": hashlib.sha256(body.encode()).hexdigest(), "payload": payload}
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def checkpoint_save(model: SpikeSlabMLP, path, rngs: dict[str, SeededRng] | None = None,
                    extra: dict | None = None) -> None:
    data = checkpoint_bytes(model, rngs, extra)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


@dataclass
class Checkpoint:
    model: SpikeSlabMLP
    rngs: dict[str, SeededRng]
    extra: dict


def parse_checkpoint(data: bytes, path="<bytes>") -> Checkpoint:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not an {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('version')!r}, "
                              f"expected {CHECKPOINT_VERSION}")
    payload = doc.get("payload")
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if hashlib.sha256(body.encode()).hexdigest() != doc.get("sha256"):
        raise CheckpointError(f"{path}: checksum mismatch")
    try:
        config = config_from_dict(payload["config"])
        model = SpikeSlabMLP(config, SeededRng(0, 0))
        stored = payload["params"]
        expected = model.named_parameters()
        if set(stored) != set(expected):
            raise CheckpointError(f"{path}: parameter names do not match the stored config")
        for name, node in expected.items():
            value = _decode_array(stored[name])
            if value.shape != node.value.shape:
                raise CheckpointError(f"{path}: {name} has shape {value.shape}, expected {node.value.shape}")
            node.value = value
        rngs = {k: SeededRng.from_state(_restore_state(v)) for k, v in payload["rng"].items()}
        return Checkpoint(model, rngs, payload["extra"])
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None


def checkpoint_load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read(), path)
