"""Two-branch recurrent network for next-day direction.

Per step ``i`` with return ``r_i`` and news histogram ``f_i``::

    hr_i = ReLU(W_r r_i + b_hr)
    hf_i = ReLU(W_f f_i + V_hf hf_{i-1} + b_hf),    hf_0 = 0
    h_i  = ReLU(W_hr hr_i + W_hf hf_i + b_h)
    y_i  = Softmax(W_h h_i)

``y_i[1]`` is the probability that the day after step ``i`` closes up.
Gradients are derived by hand (reverse mode through the recurrence); only
the news branch carries state, so everything else is vectorised over time.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-12
PARAM_NAMES = ("W_r", "b_hr", "W_f", "V_hf", "b_hf", "W_hr", "W_hf", "b_h", "W_h")
WEIGHT_NAMES = ("W_r", "W_f", "V_hf", "W_hr", "W_hf", "W_h")
BIAS_NAMES = ("b_hr", "b_hf", "b_h")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class RnnDims:
    L: int
    H_r: int = 8
    H_f: int = 16
    H: int = 16

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{f.name} must be a positive integer, got {v!r}")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "W_r": (self.H_r, 1),
            "b_hr": (self.H_r,),
            "W_f": (self.H_f, self.L),
            "V_hf": (self.H_f, self.H_f),
            "b_hf": (self.H_f,),
            "W_hr": (self.H, self.H_r),
            "W_hf": (self.H, self.H_f),
            "b_h": (self.H,),
            "W_h": (2, self.H),
        }


@dataclass
class RnnParams:
    W_r: np.ndarray
    b_hr: np.ndarray
    W_f: np.ndarray
    V_hf: np.ndarray
    b_hf: np.ndarray
    W_hr: np.ndarray
    W_hf: np.ndarray
    b_h: np.ndarray
    W_h: np.ndarray

    @property
    def dims(self) -> RnnDims:
        return RnnDims(L=self.W_f.shape[1], H_r=self.W_r.shape[0], H_f=self.W_f.shape[0], H=self.b_h.shape[0])

    def validate(self) -> None:
        expected = self.dims.shapes()
        for name in PARAM_NAMES:
            arr = getattr(self, name)
            if arr.shape != expected[name]:
                raise ValueError(f"{name} has shape {arr.shape}, expected {expected[name]}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")

    def items(self):
        return [(n, getattr(self, n)) for n in PARAM_NAMES]

    def copy(self) -> "RnnParams":
        return RnnParams(**{n: a.copy() for n, a in self.items()})

    @classmethod
    def zeros(cls, dims: RnnDims) -> "RnnParams":
        return cls(**{n: np.zeros(s) for n, s in dims.shapes().items()})

    def sq_norm(self, include_biases: bool = False) -> float:
        names = PARAM_NAMES if include_biases else WEIGHT_NAMES
        return float(sum(np.sum(getattr(self, n) ** 2) for n in names))


def init_params(dims: RnnDims, seed: int = 0) -> RnnParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    out = {}
    for name, shape in dims.shapes().items():
        if name in BIAS_NAMES:
            out[name] = np.zeros(shape)
        else:
            fan_out, fan_in = shape
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            out[name] = rng.uniform(-bound, bound, size=shape)
    return RnnParams(**out)


def relu(x):
    return np.maximum(x, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ForwardTrace:
    r: np.ndarray  # (T,)
    f: np.ndarray  # (T, L)
    hf0: np.ndarray  # (H_f,)
    a_r: np.ndarray
    hr: np.ndarray
    a_f: np.ndarray
    hf: np.ndarray
    a_h: np.ndarray
    h: np.ndarray
    logits: np.ndarray
    y: np.ndarray  # (T, 2)

    def __len__(self):
        return len(self.r)

    @property
    def up_prob(self) -> np.ndarray:
        return self.y[:, 1]


def _as_inputs(params: RnnParams, r_seq, f_seq):
    r = np.asarray(r_seq, dtype=np.float64).reshape(-1)
    f = np.asarray(f_seq, dtype=np.float64)
    if f.ndim == 1:
        f = f.reshape(len(r), -1) if len(r) else f.reshape(0, params.W_f.shape[1])
    if f.ndim != 2 or f.shape[0] != r.shape[0]:
        raise ValueError(f"r_seq length {r.shape[0]} does not match f_seq shape {f.shape}")
    if r.shape[0] < 1:
        raise ValueError("empty input sequence")
    if f.shape[1] != params.W_f.shape[1]:
        raise ValueError(f"news feature width {f.shape[1]} != model L {params.W_f.shape[1]}")
    return r, f


def forward(params: RnnParams, r_seq, f_seq, hf0: np.ndarray | None = None) -> ForwardTrace:
    r, f = _as_inputs(params, r_seq, f_seq)
    T = r.shape[0]
    H_f = params.V_hf.shape[0]
    hf_prev = np.zeros(H_f) if hf0 is None else np.asarray(hf0, dtype=np.float64)

    a_r = r[:, None] * params.W_r[:, 0][None, :] + params.b_hr
    hr = relu(a_r)

    in_f = f @ params.W_f.T + params.b_hf
    a_f = np.empty((T, H_f))
    hf = np.empty((T, H_f))
    V = params.V_hf
    h_prev = hf_prev
    for i in range(T):
        a_f[i] = in_f[i] + V @ h_prev
        h_prev = hf[i] = relu(a_f[i])

    a_h = hr @ params.W_hr.T + hf @ params.W_hf.T + params.b_h
    h = relu(a_h)
    logits = h @ params.W_h.T
    return ForwardTrace(r, f, hf_prev.copy(), a_r, hr, a_f, hf, a_h, h, logits, softmax(logits))


def cross_entropy(trace: ForwardTrace, labels) -> float:
    c = np.asarray(labels, dtype=np.float64)
    if c.shape != (len(trace),):
        raise ValueError(f"need {len(trace)} labels, got {c.shape}")
    up = np.log(np.maximum(trace.y[:, 1], LOG_CLAMP))
    down = np.log(np.maximum(trace.y[:, 0], LOG_CLAMP))
    return float(-np.sum(c * up + (1.0 - c) * down))


def loss(params: RnnParams, trace: ForwardTrace, labels, lam: float, include_biases: bool = False) -> float:
    """Summed cross-entropy plus ``lam`` times the squared Frobenius norm of the weights."""
    return cross_entropy(trace, labels) + lam * params.sq_norm(include_biases)


def backward(
    params: RnnParams,
    trace: ForwardTrace,
    labels,
    lam: float,
    include_biases: bool = False,
) -> RnnParams:
    """Exact gradient of :func:`loss` with respect to every parameter.

    The ReLU derivative at exactly zero is taken as zero, as is the
    derivative of the log clamp.
    """
    c = np.asarray(labels, dtype=np.float64)
    y = trace.y
    # dL/dy, zero where the log argument was clamped
    dy = np.zeros_like(y)
    ok1 = y[:, 1] > LOG_CLAMP
    ok0 = y[:, 0] > LOG_CLAMP
    dy[ok1, 1] = -c[ok1] / y[ok1, 1]
    dy[ok0, 0] = -(1.0 - c[ok0]) / y[ok0, 0]
    dz = y * (dy - np.sum(y * dy, axis=1, keepdims=True))

    g = {}
    g["W_h"] = dz.T @ trace.h
    da_h = (dz @ params.W_h) * (trace.a_h > 0)
    g["b_h"] = da_h.sum(axis=0)
    g["W_hr"] = da_h.T @ trace.hr
    g["W_hf"] = da_h.T @ trace.hf

    da_r = (da_h @ params.W_hr) * (trace.a_r > 0)
    g["W_r"] = (da_r.T @ trace.r)[:, None]
    g["b_hr"] = da_r.sum(axis=0)

    dhf_direct = da_h @ params.W_hf
    T, H_f = trace.hf.shape
    da_f = np.empty((T, H_f))
    carry = np.zeros(H_f)
    VT = params.V_hf.T
    mask = trace.a_f > 0
    for i in range(T - 1, -1, -1):
        da_f[i] = (dhf_direct[i] + carry) * mask[i]
        carry = VT @ da_f[i]
    hf_prev = np.vstack([trace.hf0[None, :], trace.hf[:-1]])
    g["W_f"] = da_f.T @ trace.f
    g["V_hf"] = da_f.T @ hf_prev
    g["b_hf"] = da_f.sum(axis=0)

    reg_names = PARAM_NAMES if include_biases else WEIGHT_NAMES
    for name in reg_names:
        g[name] = g[name] + 2.0 * lam * getattr(params, name)
    return RnnParams(**g)


def predict(params: RnnParams, r_seq, f_seq) -> tuple[int, float]:
    """Class and up-probability for the day after the last input step."""
    y = forward(params, r_seq, f_seq).y[-1]
    up = float(y[1])
    return (1, up) if y[1] > y[0] else (0, up)


@dataclass
class TrainConfig:
    lr: float = 0.01
    lr_decay: float = 0.95
    l2: float = 1e-4
    epochs: int = 50
    seed: int = 0
    clip: float | None = 5.0
    bptt: int | None = 32
    l2_biases: bool = False

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("learning rate must be non-negative")
        if not self.l2 >= 0:
            raise ValueError("l2 weight must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.bptt is not None and self.bptt < 1:
            raise ValueError("bptt must be >= 1")


def _windows(T: int, size: int | None) -> list[tuple[int, int]]:
    if size is None or size >= T:
        return [(0, T)]
    return [(s, min(s + size, T)) for s in range(0, T, size)]


def train(
    sequences: Sequence[tuple],
    config: TrainConfig,
    dims: RnnDims | None = None,
    params: RnnParams | None = None,
) -> tuple[RnnParams, list[float]]:
    """Plain SGD, one update per sequence (or per truncation window).

    Sequence order is reshuffled every epoch with the seeded generator.
    Within a sequence the news-branch state is carried from one window to
    the next. The returned history holds, per epoch, the mean loss of the
    updates made in that epoch.
    """
    if not sequences:
        raise ValueError("no training sequences")
    seqs = []
    for r, f, c in sequences:
        r = np.asarray(r, dtype=np.float64)
        f = np.asarray(f, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        if not (len(r) == len(f) == len(c)) or len(r) == 0:
            raise ValueError("each sequence needs equal, non-zero lengths of r, f and labels")
        seqs.append((r, f, c))
    if params is None:
        if dims is None:
            dims = RnnDims(L=seqs[0][1].shape[1])
        params = init_params(dims, config.seed)
    else:
        params = params.copy()
    rng = np.random.default_rng(config.seed)
    lr = config.lr
    history = []
    for epoch in range(config.epochs):
        losses = []
        for k in rng.permutation(len(seqs)):
            r, f, c = seqs[k]
            hf = None
            for a, b in _windows(len(r), config.bptt):
                trace = forward(params, r[a:b], f[a:b], hf)
                value = loss(params, trace, c[a:b], config.l2, config.l2_biases)
                if not math.isfinite(value):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}, window {a}:{b}")
                grads = backward(params, trace, c[a:b], config.l2, config.l2_biases)
                if config.clip is not None:
                    norm = math.sqrt(sum(float(np.sum(gv ** 2)) for _, gv in grads.items()))
                    if norm > config.clip:
                        scale = config.clip / norm
                        for _, gv in grads.items():
                            gv *= scale
                for name, gv in grads.items():
                    getattr(params, name)[...] -= lr * gv
                hf = trace.hf[-1]
                losses.append(value)
        mean_loss = math.fsum(losses) / len(losses)
        history.append(mean_loss)
        log.debug("epoch %d lr %.5g loss %.6f", epoch, lr, mean_loss)
        lr *= config.lr_decay
    if not all(np.all(np.isfinite(a)) for _, a in params.items()):
        raise TrainingDiverged("parameters became non-finite")
    return params, history


# Checkpoint layout (all integers little-endian):
#   8 bytes   magic b"SNRNNCKP"
#   u32       format version (1)
#   u32       header byte length n, then n bytes of UTF-8 JSON
#             {"dims": {...}, "config": {...}, "seed": int}, keys sorted
#   u32       tensor count
#   per tensor, in PARAM_NAMES order:
#     u16 name length, name (UTF-8), u8 ndim, ndim x u32 shape,
#     prod(shape) x f64 values, row-major
CKPT_MAGIC = b"SNRNNCKP"
CKPT_VERSION = 1


def save_checkpoint(path: str | Path, params: RnnParams, config: dict | TrainConfig | None = None, seed: int | None = None) -> None:
    if isinstance(config, TrainConfig):
        config = asdict(config)
    header = {
        "dims": asdict(params.dims),
        "config": config or {},
        "seed": seed,
    }
    hb = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    chunks = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(hb)), hb, struct.pack("<I", len(PARAM_NAMES))]
    for name, arr in params.items():
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(nb)) + nb)
        chunks.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> tuple[RnnParams, dict]:
    data = Path(path).read_bytes()
    if data[:8] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(np.float64).reshape(shape)
        pos += 8 * n
    missing = set(PARAM_NAMES) - set(tensors)
    if missing:
        raise ValueError(f"{path}: missing tensors {sorted(missing)}")
    params = RnnParams(**{n: tensors[n] for n in PARAM_NAMES})
    params.validate()
    return params, header
