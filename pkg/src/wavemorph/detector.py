"""Small two-class morph detector with exact input gradients.

Architecture (fixed)::

    64x64x1 -> conv 3x3x8 (zero pad 1) -> ReLU -> maxpool 2x2
            -> conv 3x3x16 (zero pad 1) -> ReLU -> maxpool 2x2
            -> flatten (16*16*16) -> dense -> 2 logits -> softmax

Preprocessing converts to luma, resizes to 64x64 with bilinear sampling at
pixel centers (``src = (dst + 0.5) * in / 64 - 0.5``, clamped), and divides
by 255. Every step is linear, so the input gradient is propagated back to
the original resolution exactly. Class 0 is bona fide and class 1 is morph.

Model file layout (all integers little-endian)::

    b"WMDT"                       magic
    uint32   version (= 1)
    uint32   n, then n bytes      UTF-8 JSON descriptor (architecture, preprocessing)
    uint32   tensor count
    per tensor:
        uint16 k, then k bytes    UTF-8 name
        uint32 ndim, ndim*uint32  shape
        float64[prod(shape)]      row-major values ('<f8')
    uint32   CRC-32 of every preceding byte
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, ModelFormatError, ModelVersionError
from .image import as_image, to_gray

BONA_FIDE = 0
MORPH = 1

INPUT_SIZE = 64
MAGIC = b"WMDT"
VERSION = 1

ARCHITECTURE = {
    "input": [INPUT_SIZE, INPUT_SIZE, 1],
    "layers": [
        {"type": "conv", "filters": 8, "kernel": 3, "pad": 1}, {"type": "relu"}, {"type": "maxpool", "size": 2},
        {"type": "conv", "filters": 16, "kernel": 3, "pad": 1}, {"type": "relu"}, {"type": "maxpool", "size": 2},
        {"type": "dense", "units": 2}, {"type": "softmax"},
    ],
}
PREPROCESSING = {"color": "luma-bt601", "resize": "bilinear-pixel-center", "size": INPUT_SIZE, "scale": 1 / 255}

_SHAPES = {
    "conv1_w": (8, 1, 3, 3), "conv1_b": (8,),
    "conv2_w": (16, 8, 3, 3), "conv2_b": (16,),
    "fc_w": (2, 16 * 16 * 16), "fc_b": (2,),
}


@dataclass
class DetectorModel:
    params: dict
    history: list = field(default_factory=list, compare=False)

    @classmethod
    def zeros(cls) -> "DetectorModel":
        return cls({k: np.zeros(s) for k, s in _SHAPES.items()})

    @classmethod
    def random(cls, seed: int = 0) -> "DetectorModel":
        """He-normal weights and zero biases, adjusted for this task.

        First-layer filters are made zero-mean and amplified (x3) so they
        start as high-pass probes; morph evidence lives in fine texture,
        not in brightness. The dense layer starts small (x0.1) so early
        logits stay near zero.
        """
        rng = np.random.default_rng(seed)
        params = {}
        for k, s in _SHAPES.items():
            if k.endswith("_b"):
                params[k] = np.zeros(s)
            else:
                fan_in = int(np.prod(s[1:]))
                params[k] = rng.normal(scale=np.sqrt(2.0 / fan_in), size=s)
        w = params["conv1_w"]
        params["conv1_w"] = (w - w.mean(axis=(1, 2, 3), keepdims=True)) * 3.0
        params["fc_w"] *= 0.1
        return cls(params)

    def copy(self) -> "DetectorModel":
        return DetectorModel({k: v.copy() for k, v in self.params.items()}, list(self.history))

    # gradient-oracle interface used by the attack
    def loss_and_gradient(self, img, label: int):
        loss, grad, probs = _loss_grad(self, img, label)
        return loss, grad, float(probs[MORPH])

    def probabilities(self, img):
        return forward(self, img)


def _resize_matrix(n_in: int, n_out: int = INPUT_SIZE) -> np.ndarray:
    src = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    src = np.clip(src, 0, n_in - 1)
    i0 = np.clip(np.floor(src).astype(np.intp), 0, max(n_in - 2, 0))
    frac = src - i0
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1 - frac)
    np.add.at(m, (rows, np.minimum(i0 + 1, n_in - 1)), frac)
    return m


def preprocess(img) -> np.ndarray:
    """Luma, bilinear resize to 64x64, scale to ``[0, 1]``."""
    gray = to_gray(img)
    ry = _resize_matrix(gray.shape[0])
    rx = _resize_matrix(gray.shape[1])
    return ry @ gray @ rx.T / 255.0


def _preprocess_backward(img, d_input: np.ndarray) -> np.ndarray:
    img = as_image(img)
    ry = _resize_matrix(img.shape[0])
    rx = _resize_matrix(img.shape[1])
    d_gray = ry.T @ d_input @ rx / 255.0
    if img.shape[2] == 1:
        return d_gray[:, :, None]
    return d_gray[:, :, None] * np.array([0.299, 0.587, 0.114])


def _conv_forward(x, w, b):
    n, c, hgt, wid = x.shape
    f = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))  # n, c, h, w, 3, 3
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * hgt * wid, c * 9)
    out = cols @ w.reshape(f, -1).T + b
    return out.reshape(n, hgt, wid, f).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, x_shape, w):
    n, c, hgt, wid = x_shape
    f = w.shape[0]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(f, -1)).reshape(n, hgt, wid, c, 3, 3)
    dxp = np.zeros((n, c, hgt + 2, wid + 2))
    for i in range(3):
        for j in range(3):
            dxp[:, :, i:i + hgt, j:j + wid] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def _pool_forward(x):
    n, c, hgt, wid = x.shape
    blocks = x.reshape(n, c, hgt // 2, 2, wid // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, hgt // 2, wid // 2, 4)
    arg = np.argmax(blocks, axis=-1)  # first maximum in row-major order wins
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


def _pool_backward(dout, arg, x_shape):
    n, c, hgt, wid = x_shape
    d = np.zeros(dout.shape + (4,))
    np.put_along_axis(d, arg[..., None], dout[..., None], axis=-1)
    return d.reshape(n, c, hgt // 2, wid // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(x_shape)


def _forward_batch(params, x):
    """``x`` has shape ``(N, 64, 64)``; returns logits and a backward cache."""
    x = x[:, None]
    z1, cols1 = _conv_forward(x, params["conv1_w"], params["conv1_b"])
    a1 = np.maximum(z1, 0)
    p1, arg1 = _pool_forward(a1)
    z2, cols2 = _conv_forward(p1, params["conv2_w"], params["conv2_b"])
    a2 = np.maximum(z2, 0)
    p2, arg2 = _pool_forward(a2)
    flat = p2.reshape(len(x), -1)
    logits = flat @ params["fc_w"].T + params["fc_b"]
    cache = (x.shape, cols1, z1, arg1, p1.shape, cols2, z2, arg2, p2.shape, flat)
    return logits, cache


def _backward_batch(params, cache, dlogits):
    x_shape, cols1, z1, arg1, p1_shape, cols2, z2, arg2, p2_shape, flat = cache
    grads = {"fc_w": dlogits.T @ flat, "fc_b": dlogits.sum(axis=0)}
    dp2 = (dlogits @ params["fc_w"]).reshape(p2_shape)
    da2 = _pool_backward(dp2, arg2, z2.shape)
    dz2 = da2 * (z2 > 0)
    dp1, grads["conv2_w"], grads["conv2_b"] = _conv_backward(dz2, cols2, p1_shape, params["conv2_w"])
    da1 = _pool_backward(dp1, arg1, z1.shape)
    dz1 = da1 * (z1 > 0)
    dx, grads["conv1_w"], grads["conv1_b"] = _conv_backward(dz1, cols1, x_shape, params["conv1_w"])
    return grads, dx[:, 0]


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _cross_entropy(logits, labels):
    z = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    return lse - z[np.arange(len(labels)), labels]


def forward(model: DetectorModel, img):
    """``(p_bona_fide, p_morph)`` for one image."""
    logits, _ = _forward_batch(model.params, preprocess(img)[None])
    p = _softmax(logits)[0]
    return float(p[BONA_FIDE]), float(p[MORPH])


def predict_batch(model: DetectorModel, images, batch_size: int = 64) -> np.ndarray:
    """Class probabilities, shape ``(N, 2)``."""
    x = np.stack([preprocess(im) for im in images])
    out = []
    for s in range(0, len(x), batch_size):
        logits, _ = _forward_batch(model.params, x[s:s + batch_size])
        out.append(_softmax(logits))
    return np.concatenate(out)


def _loss_grad(model, img, label):
    logits, cache = _forward_batch(model.params, preprocess(img)[None])
    probs = _softmax(logits)[0]
    loss = float(_cross_entropy(logits, np.array([label]))[0])
    dlogits = probs.copy()
    dlogits[label] -= 1.0
    _, dx = _backward_batch(model.params, cache, dlogits[None])
    grad = _preprocess_backward(img, dx[0])
    return loss, grad.reshape(np.shape(img)), probs


def loss_and_input_gradient(model: DetectorModel, img, label: int):
    """Cross-entropy ``-log p[label]`` and its gradient w.r.t. the input pixels."""
    loss, grad, _ = _loss_grad(model, img, label)
    return loss, grad


def batch_loss_and_param_gradients(model: DetectorModel, x: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over preprocessed inputs ``x`` and its parameter gradients."""
    logits, cache = _forward_batch(model.params, x)
    n = len(labels)
    loss = float(_cross_entropy(logits, labels).mean())
    dlogits = _softmax(logits)
    dlogits[np.arange(n), labels] -= 1.0
    grads, _ = _backward_batch(model.params, cache, dlogits / n)
    return loss, grads


def train(bona_fide, morphs, lr: float = 0.05, epochs: int = 30, batch_size: int = 16, seed: int = 0,
          init: DetectorModel | None = None) -> DetectorModel:
    """Mini-batch SGD on cross-entropy; deterministic for a fixed seed.

    The mean training loss of every epoch is kept in ``model.history``.
    """
    if len(bona_fide) == 0 or len(morphs) == 0:
        raise DataError("both the bona fide and the morph set must be non-empty")
    x = np.stack([preprocess(im) for im in list(bona_fide) + list(morphs)])
    y = np.array([BONA_FIDE] * len(bona_fide) + [MORPH] * len(morphs))
    rng = np.random.default_rng(seed)
    model = init.copy() if init is not None else DetectorModel.random(int(rng.integers(2 ** 31)))
    params = model.params
    for _ in range(epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for s in range(0, len(y), batch_size):
            idx = order[s:s + batch_size]
            loss, grads = batch_loss_and_param_gradients(model, x[idx], y[idx])
            total += loss * len(idx)
            for k in params:
                params[k] -= lr * grads[k]
        model.history.append(total / len(y))
    return model


def accuracy(model: DetectorModel, bona_fide, morphs) -> float:
    probs = predict_batch(model, list(bona_fide) + list(morphs))
    y = np.array([BONA_FIDE] * len(bona_fide) + [MORPH] * len(morphs))
    return float(np.mean(np.argmax(probs, axis=1) == y))


def save_model(model: DetectorModel, path) -> None:
    descriptor = json.dumps({"architecture": ARCHITECTURE, "preprocessing": PREPROCESSING},
                            sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(descriptor)), descriptor,
             struct.pack("<I", len(_SHAPES))]
    for name in _SHAPES:
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        key = name.encode("utf-8")
        parts += [struct.pack("<H", len(key)), key, struct.pack("<I", arr.ndim),
                  struct.pack(f"<{arr.ndim}I", *arr.shape), arr.tobytes()]
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body + struct.pack("<I", zlib.crc32(body)))


def load_model(path) -> DetectorModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != MAGIC:
        raise ModelFormatError(f"{path}: not a detector model file (bad magic or truncated)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise ModelVersionError(VERSION, version)
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ModelFormatError(f"{path}: checksum mismatch; file is truncated or corrupt")
    try:
        pos = 8
        (n,) = struct.unpack_from("<I", body, pos)
        pos += 4
        descriptor = json.loads(body[pos:pos + n].decode("utf-8"))
        pos += n
        if descriptor.get("architecture") != ARCHITECTURE:
            raise ModelFormatError(f"{path}: architecture descriptor does not match this detector")
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        params = {}
        for _ in range(count):
            (k,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos:pos + k].decode("utf-8")
            pos += k
            (ndim,) = struct.unpack_from("<I", body, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}I", body, pos)
            pos += 4 * ndim
            size = int(np.prod(shape)) * 8
            params[name] = np.frombuffer(body[pos:pos + size], dtype="<f8").reshape(shape).astype(np.float64)
            pos += size
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupt model file: {exc}") from exc
    if pos != len(body) or set(params) != set(_SHAPES) or any(params[k].shape != s for k, s in _SHAPES.items()):
        raise ModelFormatError(f"{path}: tensor table does not match the detector architecture")
    return DetectorModel(params)
