"""Minimal reverse-mode autodiff over dense numpy arrays (up to 3 axes).

Each operation records its parents and an adjoint closure on the output
tensor; `backward` walks the graph once in reverse topological order and
accumulates into `.grad` (calling it twice without resetting doubles the
gradients).  Every op output is checked for NaN/Inf and fails fast,
naming the op.  The one sparse operation, `spmatmul`, multiplies a
constant scipy sparse matrix with a dense tensor; its adjoint touches
only the sparsity pattern.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import digamma, expit, gammaln

from .errors import IoFailure, NonFiniteValue, NotScalar, ShapeMismatch

_CLAMP_FLOOR = 1e-12
_LN_EPS = 1e-5


def _check_finite(value: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(f"non-finite value produced by op '{op}'")


class Tensor:
    """A node in the computation record."""

    __slots__ = ("value", "grad", "parents", "backward_fn", "needs_grad", "op")
    _counter = 0

    def __init__(self, value, parents=(), backward_fn=None, needs_grad=False, op="leaf"):
        value = np.asarray(value, dtype=float)
        if value.ndim > 3:
            raise ShapeMismatch(f"tensors are limited to 3 axes, got {value.ndim}")
        _check_finite(value, op)
        self.value = value
        self.grad = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.needs_grad = needs_grad or any(p.needs_grad for p in parents)
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, grad) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += grad

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.shape})"


def constant(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, op="const")


def parameter(x) -> Tensor:
    return Tensor(np.array(x, dtype=float), needs_grad=True, op="param")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce `grad` back to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary(a, b, fwd, bwd_a, bwd_b, op):
    a, b = constant(a), constant(b)
    try:
        value = fwd(a.value, b.value)
    except ValueError as exc:
        raise ShapeMismatch(f"{op}: {exc}") from exc

    def backward(grad, out):
        if a.needs_grad:
            a.accumulate(_unbroadcast(bwd_a(grad, a.value, b.value, out), a.shape))
        if b.needs_grad:
            b.accumulate(_unbroadcast(bwd_b(grad, a.value, b.value, out), b.shape))

    return Tensor(value, (a, b), backward, op=op)


def add(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x + y, lambda g, x, y, o: g, lambda g, x, y, o: g, "add")


def sub(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x - y, lambda g, x, y, o: g, lambda g, x, y, o: -g, "sub")


def mul(a, b) -> Tensor:
    return _binary(
        a, b, lambda x, y: x * y, lambda g, x, y, o: g * y, lambda g, x, y, o: g * x, "mul"
    )


def div(a, b) -> Tensor:
    return _binary(
        a,
        b,
        lambda x, y: x / y,
        lambda g, x, y, o: g / y,
        lambda g, x, y, o: -g * x / (y * y),
        "div",
    )


def neg(a) -> Tensor:
    a = constant(a)

    def backward(grad, out):
        if a.needs_grad:
            a.accumulate(-grad)

    return Tensor(-a.value, (a,), backward, op="neg")


def matmul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul needs (m,k)@(k,n), got {a.shape} @ {b.shape}")

    def backward(grad, out):
        if a.needs_grad:
            a.accumulate(grad @ b.value.T)
        if b.needs_grad:
            b.accumulate(a.value.T @ grad)

    return Tensor(a.value @ b.value, (a, b), backward, op="matmul")


def spmatmul(matrix: sp.spmatrix, x, matrix_t: sp.spmatrix | None = None) -> Tensor:
    """Constant sparse matrix times dense 2-D tensor.

    Pass a precomputed `matrix_t` to skip the per-call transpose when the
    same matrix is reused many times.
    """
    x = constant(x)
    if x.value.ndim != 2 or matrix.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"spmatmul needs ({matrix.shape}) @ {x.shape}")

    def backward(grad, out):
        if x.needs_grad:
            transpose = matrix.T.tocsr() if matrix_t is None else matrix_t
            x.accumulate(transpose @ grad)

    return Tensor(matrix @ x.value, (x,), backward, op="spmatmul")


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [constant(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(grad, out):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.needs_grad:
                index = [slice(None)] * grad.ndim
                index[axis] = slice(start, stop)
                t.accumulate(grad[tuple(index)])

    try:
        value = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(f"concat: {exc}") from exc
    return Tensor(value, tuple(tensors), backward, op="concat")


def reshape(a, shape) -> Tensor:
    a = constant(a)

    def backward(grad, out):
        if a.needs_grad:
            a.accumulate(grad.reshape(a.shape))

    try:
        value = a.value.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(f"reshape: {exc}") from exc
    return Tensor(value, (a,), backward, op="reshape")


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    a = constant(a)
    index = [slice(None)] * a.value.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(grad, out):
        if a.needs_grad:
            full = np.zeros_like(a.value)
            full[index] = grad
            a.accumulate(full)

    return Tensor(a.value[index], (a,), backward, op="slice")


def take_rows(a, indices) -> Tensor:
    """Gather rows by an integer index array (axis 0)."""
    a = constant(a)
    indices = np.asarray(indices, dtype=int)

    def backward(grad, out):
        if a.needs_grad:
            full = np.zeros_like(a.value)
            np.add.at(full, indices, grad)
            a.accumulate(full)

    return Tensor(a.value[indices], (a,), backward, op="take_rows")


def _reduce(a, axis, keepdims, op):
    a = constant(a)
    value = getattr(a.value, op)(axis=axis, keepdims=keepdims)
    denom = 1.0
    if op == "mean":
        denom = a.value.size if axis is None else a.value.shape[axis]

    def backward(grad, out):
        if not a.needs_grad:
            return
        g = np.asarray(grad)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate(np.broadcast_to(g, a.shape) / denom)

    return Tensor(value, (a,), backward, op=op)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    return _reduce(a, axis, keepdims, "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    return _reduce(a, axis, keepdims, "mean")


def _unary(a, fwd, bwd, op):
    a = constant(a)
    value = fwd(a.value)

    def backward(grad, out):
        if a.needs_grad:
            a.accumulate(bwd(grad, a.value, out))

    return Tensor(value, (a,), backward, op=op)


def sigmoid(a) -> Tensor:
    return _unary(a, expit, lambda g, x, o: g * o * (1.0 - o), "sigmoid")


def tanh(a) -> Tensor:
    return _unary(a, np.tanh, lambda g, x, o: g * (1.0 - o * o), "tanh")


def relu(a) -> Tensor:
    return _unary(a, lambda x: np.maximum(x, 0.0), lambda g, x, o: g * (x > 0.0), "relu")


def softplus(a) -> Tensor:
    return _unary(a, lambda x: np.logaddexp(0.0, x), lambda g, x, o: g * expit(x), "softplus")


def log(a) -> Tensor:
    # arguments are clamped at 1e-12; the clamped region gets zero gradient
    return _unary(
        a,
        lambda x: np.log(np.maximum(x, _CLAMP_FLOOR)),
        lambda g, x, o: g * (x > _CLAMP_FLOOR) / np.maximum(x, _CLAMP_FLOOR),
        "log",
    )


def exp(a) -> Tensor:
    def fwd(x):
        with np.errstate(over="ignore"):
            return np.exp(x)  # overflow becomes inf and fails the finite check

    return _unary(a, fwd, lambda g, x, o: g * o, "exp")


def sqrt(a) -> Tensor:
    return _unary(
        a,
        lambda x: np.sqrt(np.maximum(x, _CLAMP_FLOOR)),
        lambda g, x, o: g * (x > _CLAMP_FLOOR) * 0.5 / np.sqrt(np.maximum(x, _CLAMP_FLOOR)),
        "sqrt",
    )


def clamp(a, lo=None, hi=None) -> Tensor:
    def bwd(g, x, o):
        inside = np.ones_like(x, dtype=bool)
        if lo is not None:
            inside &= x >= lo
        if hi is not None:
            inside &= x <= hi
        return g * inside

    return _unary(a, lambda x: np.clip(x, lo, hi), bwd, "clamp")


def lgamma(a) -> Tensor:
    return _unary(a, gammaln, lambda g, x, o: g * digamma(x), "lgamma")


def layer_norm(x, gain, bias, eps: float = _LN_EPS) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gain, bias = constant(x), constant(gain), constant(bias)
    mu = x.value.mean(axis=-1, keepdims=True)
    centered = x.value - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    value = xhat * gain.value + bias.value
    n = x.value.shape[-1]

    def backward(grad, out):
        if gain.needs_grad:
            gain.accumulate(_unbroadcast(grad * xhat, gain.shape))
        if bias.needs_grad:
            bias.accumulate(_unbroadcast(grad, bias.shape))
        if x.needs_grad:
            t = grad * gain.value
            term = t - t.mean(axis=-1, keepdims=True) - xhat * (t * xhat).mean(
                axis=-1, keepdims=True
            )
            x.accumulate(term * inv)

    return Tensor(value, (x, gain, bias), backward, op="layer_norm")


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into .grad for every reachable tensor."""
    if loss.value.size != 1:
        raise NotScalar(f"backward needs a scalar, got shape {loss.shape}")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited and parent.needs_grad:
                stack.append((parent, False))
    loss.accumulate(np.ones_like(loss.value))
    for node in reversed(topo):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad, node.value)


class ParameterStore:
    """Named trainable tensors plus Adam moment slots."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.moment1: dict[str, np.ndarray] = {}
        self.moment2: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        tensor = parameter(value)
        self.params[name] = tensor
        self.moment1[name] = np.zeros_like(tensor.value)
        self.moment2[name] = np.zeros_like(tensor.value)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def names(self):
        return list(self.params)

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None

    def gradients(self) -> dict[str, np.ndarray]:
        return {
            name: (np.zeros_like(t.value) if t.grad is None else t.grad)
            for name, t in self.params.items()
        }

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {name: t.value.copy() for name, t in self.params.items()}
        for name in self.params:
            out[f"__m1__/{name}"] = self.moment1[name].copy()
            out[f"__m2__/{name}"] = self.moment2[name].copy()
        out["__step__"] = np.array([float(self.step)])
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, tensor in self.params.items():
            if name not in state:
                raise KeyError(f"checkpoint is missing parameter {name!r}")
            if state[name].shape != tensor.value.shape:
                raise ShapeMismatch(f"checkpoint shape mismatch for {name!r}")
            tensor.value = state[name].copy()
            self.moment1[name] = state.get(f"__m1__/{name}", np.zeros_like(tensor.value)).copy()
            self.moment2[name] = state.get(f"__m2__/{name}", np.zeros_like(tensor.value)).copy()
        self.step = int(state.get("__step__", np.zeros(1))[0])


def adam_step(
    store: ParameterStore,
    gradients: dict[str, np.ndarray] | None = None,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 1e-5,
    clip_norm: float = 10.0,
) -> float:
    """One Adam update with global-norm clipping and decoupled weight decay.

    Returns the pre-clip global gradient norm.
    """
    if gradients is None:
        gradients = store.gradients()
    total = np.sqrt(sum(float((g**2).sum()) for g in gradients.values()))
    scale = 1.0 if (clip_norm is None or total <= clip_norm or total == 0.0) else clip_norm / total
    store.step += 1
    t = store.step
    bias1 = 1.0 - beta1**t
    bias2 = 1.0 - beta2**t
    for name, tensor in store.params.items():
        g = gradients[name] * scale
        m = store.moment1[name]
        v = store.moment2[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        update = (m / bias1) / (np.sqrt(v / bias2) + eps)
        tensor.value = tensor.value - lr * update - lr * weight_decay * tensor.value
    return total


_MAGIC = b"PFT1"


def save_checkpoint(path, arrays: dict[str, np.ndarray]) -> None:
    """Named-tensor archive: magic, version, count, then per tensor the
    utf-8 name, shape, and raw little-endian float64 payload."""
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", 1, len(arrays)))
            for name, arr in arrays.items():
                arr = np.asarray(arr, dtype="<f8")
                encoded = name.encode("utf-8")
                fh.write(struct.pack("<H", len(encoded)))
                fh.write(encoded)
                fh.write(struct.pack("<B", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> dict[str, np.ndarray]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    if blob[:4] != _MAGIC:
        raise IoFailure("not a checkpoint archive")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != 1:
        raise IoFailure(f"unsupported checkpoint version {version}")
    offset = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).reshape(shape)
        offset += 8 * size
        out[name] = arr.astype(float)
    return out


def gradient_check(loss_fn, store: ParameterStore, h: float = 1e-5) -> float:
    """Max relative error between backward() gradients and central
    finite differences of `loss_fn()` over every parameter entry."""
    store.zero_grads()
    loss = loss_fn()
    backward(loss)
    analytic = store.gradients()
    worst = 0.0
    for name, tensor in store.params.items():
        flat = tensor.value.reshape(-1)
        grad = analytic[name].reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = float(loss_fn().value)
            flat[i] = keep - h
            down = float(loss_fn().value)
            flat[i] = keep
            numeric = (up - down) / (2.0 * h)
            err = abs(grad[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
