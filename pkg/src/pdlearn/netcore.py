"""Small dense networks with exact, auditable reverse-mode gradients.

The layer vocabulary is deliberately tiny: dense blocks with tanh, relu
or softplus activations, optional identity skip connections, a block
repeat count, and a final bias-free linear map to the logits.  Because
the last layer has no bias, a zero parameter vector produces zero
logits for every input, which several downstream probes rely on.

Gradients are computed by hand-rolled backprop so every quantity is a
plain ndarray and can be cross-checked coordinate-by-coordinate against
the central finite-difference oracle in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .generators import Generator, fy_loss, one_hot

ACTIVATIONS = ("tanh", "relu", "softplus")


def _softplus(z):
    # log(1 + e^z) without overflow for large |z|
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "softplus":
        return _softplus(z)
    raise InputError(f"unknown activation {name!r}")


def _activate_deriv(name, z):
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if name == "relu":
        # subgradient at 0 fixed to 0 for reproducibility
        return (z > 0.0).astype(float)
    if name == "softplus":
        return _sigmoid(z)
    raise InputError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class BlockSpec:
    """One dense block: width, activation name, optional identity skip."""

    dense_width: int
    activation: str
    skip: bool = False

    def __post_init__(self):
        if int(self.dense_width) < 1:
            raise InputError("block dense_width must be positive")
        if self.activation not in ACTIVATIONS:
            raise InputError(
                f"activation {self.activation!r} not in {ACTIVATIONS}"
            )

    def to_dict(self):
        return {
            "denseWidth": self.dense_width,
            "activation": self.activation,
            "skip": self.skip,
        }

    @staticmethod
    def from_dict(d):
        return BlockSpec(
            dense_width=int(d["denseWidth"]),
            activation=str(d["activation"]),
            skip=bool(d.get("skip", False)),
        )


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description: blocks are cascaded ``repeat`` times and
    followed by a bias-free linear map to ``output_dim`` logits."""

    input_dim: int
    output_dim: int
    blocks: tuple = ()
    repeat: int = 1

    def __post_init__(self):
        if int(self.input_dim) < 1 or int(self.output_dim) < 1:
            raise InputError("input_dim and output_dim must be positive")
        if int(self.repeat) < 1:
            raise InputError("repeat must be a positive integer")
        object.__setattr__(self, "blocks", tuple(self.blocks))
        # skip connections need matching widths along the expanded chain
        width = self.input_dim
        for i, blk in enumerate(self.expanded_blocks()):
            if blk.skip and blk.dense_width != width:
                raise InputError(
                    f"expanded block {i} uses a skip connection but maps "
                    f"width {width} -> {blk.dense_width}"
                )
            width = blk.dense_width

    def expanded_blocks(self):
        return list(self.blocks) * int(self.repeat)

    def to_dict(self):
        return {
            "inputDim": self.input_dim,
            "outputDim": self.output_dim,
            "blocks": [b.to_dict() for b in self.blocks],
            "repeat": self.repeat,
        }

    @staticmethod
    def from_dict(d):
        return NetworkSpec(
            input_dim=int(d["inputDim"]),
            output_dim=int(d["outputDim"]),
            blocks=tuple(BlockSpec.from_dict(b) for b in d.get("blocks", [])),
            repeat=int(d.get("repeat", 1)),
        )


@dataclass(frozen=True)
class ParamLayout:
    """Flat index ranges for every parameter tensor of a spec.

    Keys are ("block", i, "W"), ("block", i, "b") for expanded block i,
    and ("out", "W") for the final linear map.  Ranges partition
    [0, size) with no overlap.
    """

    entries: tuple  # of (key, start, stop, shape)
    size: int

    def slice_of(self, key):
        for k, start, stop, _shape in self.entries:
            if k == key:
                return slice(start, stop)
        raise KeyError(key)

    def shape_of(self, key):
        for k, _start, _stop, shape in self.entries:
            if k == key:
                return shape
        raise KeyError(key)


def param_layout(spec: NetworkSpec) -> ParamLayout:
    entries = []
    pos = 0
    width = spec.input_dim
    for i, blk in enumerate(spec.expanded_blocks()):
        w_shape = (blk.dense_width, width)
        entries.append((("block", i, "W"), pos, pos + w_shape[0] * w_shape[1], w_shape))
        pos += w_shape[0] * w_shape[1]
        entries.append((("block", i, "b"), pos, pos + blk.dense_width, (blk.dense_width,)))
        pos += blk.dense_width
        width = blk.dense_width
    out_shape = (spec.output_dim, width)
    entries.append((("out", "W"), pos, pos + out_shape[0] * out_shape[1], out_shape))
    pos += out_shape[0] * out_shape[1]
    return ParamLayout(entries=tuple(entries), size=pos)


@dataclass(frozen=True)
class ParamVector:
    """Immutable flat parameter vector plus its layout map."""

    values: np.ndarray
    layout: ParamLayout

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size != self.layout.size:
            raise InputError(
                f"parameter vector has {arr.size} entries, layout expects "
                f"{self.layout.size}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def size(self):
        return self.layout.size

    def tensor(self, key):
        sl = self.layout.slice_of(key)
        return self.values[sl].reshape(self.layout.shape_of(key))

    def replace(self, values) -> "ParamVector":
        return ParamVector(values=np.asarray(values, dtype=float), layout=self.layout)


def zero_params(spec: NetworkSpec) -> ParamVector:
    layout = param_layout(spec)
    return ParamVector(values=np.zeros(layout.size), layout=layout)


def init_params(spec: NetworkSpec, seed: int, scale: float = 1.0) -> ParamVector:
    """Seeded fan-based uniform initialization.

    Weights are uniform in +-scale * sqrt(6 / (fan_in + fan_out)),
    biases zero.  Deterministic given (spec, seed, scale).
    """
    if not scale > 0.0:
        raise InputError("init scale must be > 0")
    layout = param_layout(spec)
    rng = np.random.default_rng(int(seed))
    values = np.zeros(layout.size)
    for key, start, stop, shape in layout.entries:
        if key[-1] != "W":
            continue
        fan_out, fan_in = shape
        lim = scale * np.sqrt(6.0 / (fan_in + fan_out))
        values[start:stop] = rng.uniform(-lim, lim, size=stop - start)
    return ParamVector(values=values, layout=layout)


class _Trace:
    """Forward-pass intermediates needed by backprop (single sample or batch)."""

    __slots__ = ("inputs", "pre", "post", "logits")

    def __init__(self):
        self.inputs = []   # h fed to each block (and finally to the out map)
        self.pre = []      # pre-activations z per block
        self.post = []     # act(z) per block, before the skip add
        self.logits = None


def forward_trace(spec: NetworkSpec, theta: ParamVector, x):
    """Forward pass returning (logits, trace).

    ``x`` may be a single input vector or an (n, input_dim) batch; the
    logits match (vector or (n, output_dim) matrix).
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if batch.ndim != 2 or batch.shape[1] != spec.input_dim:
        raise InputError(
            f"input has shape {arr.shape}, expected last dimension {spec.input_dim}"
        )
    trace = _Trace()
    h = batch
    for i, blk in enumerate(spec.expanded_blocks()):
        w = theta.tensor(("block", i, "W"))
        b = theta.tensor(("block", i, "b"))
        z = h @ w.T + b
        a = _activate(blk.activation, z)
        trace.inputs.append(h)
        trace.pre.append(z)
        trace.post.append(a)
        h = a + trace.inputs[-1] if blk.skip else a
    w_out = theta.tensor(("out", "W"))
    logits = h @ w_out.T
    trace.inputs.append(h)
    trace.logits = logits
    return (logits[0] if single else logits), trace


def forward(spec: NetworkSpec, theta: ParamVector, x):
    """Logits f(x); finite for finite inputs, exactly zero when theta = 0."""
    logits, _ = forward_trace(spec, theta, x)
    return logits


def _backward_rows(spec: NetworkSpec, theta: ParamVector, trace: _Trace, rows):
    """Backpropagate k seed rows (k x output_dim) for one sample.

    Returns a (k, m) matrix whose row j is the parameter gradient of
    <rows[j], logits>.
    """
    layout = theta.layout
    k = rows.shape[0]
    grads = np.zeros((k, layout.size))
    blocks = spec.expanded_blocks()

    h_last = trace.inputs[-1][0]
    w_out = theta.tensor(("out", "W"))
    sl = layout.slice_of(("out", "W"))
    grads[:, sl] = np.einsum("ko,h->koh", rows, h_last).reshape(k, -1)
    d_h = rows @ w_out  # (k, last_width)

    for i in range(len(blocks) - 1, -1, -1):
        blk = blocks[i]
        z = trace.pre[i][0]
        h_in = trace.inputs[i][0]
        d_z = d_h * _activate_deriv(blk.activation, z)  # (k, width)
        grads[:, layout.slice_of(("block", i, "W"))] = np.einsum(
            "kw,j->kwj", d_z, h_in
        ).reshape(k, -1)
        grads[:, layout.slice_of(("block", i, "b"))] = d_z
        w = theta.tensor(("block", i, "W"))
        d_h = d_z @ w + (d_h if blk.skip else 0.0)
    return grads


def link_error(gen: Generator, logits, y):
    """e = grad phi*(logits) - one_hot(y): the logit-space loss gradient."""
    return gen.grad_conjugate(np.asarray(logits, dtype=float)) - one_hot(y, len(logits))


def loss_value(spec: NetworkSpec, theta: ParamVector, gen: Generator, x, y) -> float:
    """fy_loss(one_hot(y), f(x)) for a single sample."""
    logits = forward(spec, theta, np.asarray(x, dtype=float))
    return fy_loss(gen, one_hot(y, spec.output_dim), logits)


def loss_grad(spec: NetworkSpec, theta: ParamVector, gen: Generator, x, y):
    """Parameter gradient of the per-sample loss, one reverse sweep.

    Equals jacobian(x)^T e with e the link error at the logits.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError("loss_grad expects a single input vector")
    if not 0 <= int(y) < spec.output_dim:
        raise InputError(f"label {y} out of range for {spec.output_dim} outputs")
    logits, trace = forward_trace(spec, theta, arr)
    e = link_error(gen, logits, int(y))
    return _backward_rows(spec, theta, trace, e[None, :])[0]


def jacobian(spec: NetworkSpec, theta: ParamVector, x):
    """(output_dim, m) matrix of per-output parameter gradients at x."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError("jacobian expects a single input vector")
    _logits, trace = forward_trace(spec, theta, arr)
    return _backward_rows(spec, theta, trace, np.eye(spec.output_dim))


def fd_grad_oracle(spec: NetworkSpec, theta: ParamVector, gen: Generator, x, y,
                   step: float = 1e-6):
    """Central finite-difference gradient, coordinate by coordinate.

    Deliberately independent of the reverse-mode path: it only calls the
    forward pass.  For relu networks, callers should avoid parameter
    points with a pre-activation within ~1e-4 of zero.
    """
    if not step > 0.0:
        raise InputError("finite-difference step must be > 0")
    base = theta.values.copy()
    grad = np.zeros_like(base)
    for i in range(base.size):
        bumped = base.copy()
        bumped[i] = base[i] + step
        up = loss_value(spec, theta.replace(bumped), gen, x, y)
        bumped[i] = base[i] - step
        down = loss_value(spec, theta.replace(bumped), gen, x, y)
        grad[i] = (up - down) / (2.0 * step)
    return grad


def min_preactivation_margin(spec: NetworkSpec, theta: ParamVector, x) -> float:
    """Smallest |pre-activation| over all relu units (inf if none).

    Used to filter finite-difference checks away from relu kinks.
    """
    _logits, trace = forward_trace(spec, theta, np.asarray(x, dtype=float))
    margin = np.inf
    for blk, z in zip(spec.expanded_blocks(), trace.pre):
        if blk.activation == "relu":
            margin = min(margin, float(np.min(np.abs(z))))
    return margin


#: Four representative desk-scale presets: a plain tanh stack, the same
#: with identity skips, a deeper relu stack, and a skip relu stack.  The
#: skip variants keep the block width equal to the input width so the
#: identity shortcut is well formed for any repeat count.
def model_preset(name: str, input_dim: int, output_dim: int, k: int = 1) -> NetworkSpec:
    if name == "dense_tanh":
        blocks = (BlockSpec(2 * input_dim, "tanh"),)
    elif name == "dense_tanh_skip":
        blocks = (BlockSpec(input_dim, "tanh", skip=True),)
    elif name == "dense_relu_deep":
        blocks = (BlockSpec(2 * input_dim, "relu"), BlockSpec(2 * input_dim, "relu"))
    elif name == "dense_relu_skip":
        blocks = (BlockSpec(input_dim, "relu", skip=True),
                  BlockSpec(input_dim, "relu", skip=True))
    else:
        raise InputError(f"unknown model preset {name!r}")
    return NetworkSpec(input_dim=input_dim, output_dim=output_dim,
                       blocks=blocks, repeat=k)


MODEL_PRESETS = ("dense_tanh", "dense_tanh_skip", "dense_relu_deep", "dense_relu_skip")
