"""Differentiable operations used by the detection and ReID networks."""
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.tensor.core import DimensionError, Function, Tensor, as_tensor


class Softmax(Function):
    def forward(self, a: np.ndarray, axis: int = -1) -> np.ndarray:
        shifted = np.exp(a - a.max(axis=axis, keepdims=True))
        self.out = shifted / shifted.sum(axis=axis, keepdims=True)
        self.axis = axis
        return self.out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        inner = (grad * self.out).sum(axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


class Relu(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.mask = a > 0
        return np.where(self.mask, a, 0).astype(a.dtype)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        e = np.exp(-np.abs(a))
        self.out = np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(a.dtype)
        return self.out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.out * (1.0 - self.out),)


class Clamp(Function):
    def forward(self, a: np.ndarray, low: float, high: float) -> np.ndarray:
        self.mask = (a >= low) & (a <= high)
        return np.clip(a, low, high)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.mask,)


class Abs(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.sign = np.sign(a)
        return np.abs(a)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.sign,)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int = -1) -> np.ndarray:
        self.axis = axis
        self.bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(np.split(grad, self.bounds, axis=self.axis))


class Gather(Function):
    """Index into the flattened input; repeated indices accumulate on backward."""

    def forward(self, a: np.ndarray, indices: np.ndarray) -> np.ndarray:
        self.shape, self.dtype, self.indices = a.shape, a.dtype, indices
        return a.reshape(-1)[indices]

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        flat = np.zeros(int(np.prod(self.shape)), dtype=self.dtype)
        np.add.at(flat, self.indices.reshape(-1), grad.reshape(-1))
        return (flat.reshape(self.shape),)


class Pad2d(Function):
    """Zero padding of the two spatial axes of a (B, H, W, C) map."""

    def forward(self, a: np.ndarray, pad: int) -> np.ndarray:
        self.pad = pad
        return np.pad(a, ((0, 0), (pad, pad), (pad, pad), (0, 0)))

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        p = self.pad
        return (grad[:, p:grad.shape[1] - p, p:grad.shape[2] - p, :],)


class BilinearSample(Function):
    """
    Four-neighbour bilinear interpolation of an (H, W, C) map at real (y, x) points.

    Corners outside [0, H-1] x [0, W-1] read as zero. Gradients flow to the map and to
    the sampling coordinates.
    """

    def forward(self, fmap: np.ndarray, points: np.ndarray) -> np.ndarray:
        height, width, channels = fmap.shape
        flat = points.reshape(-1, 2)
        y, x = flat[:, 0], flat[:, 1]
        y0, x0 = np.floor(y), np.floor(x)
        dy, dx = y - y0, x - x0
        y0, x0 = y0.astype(np.int64), x0.astype(np.int64)

        self.map_shape, self.dtype = fmap.shape, fmap.dtype
        self.out_shape = points.shape[:-1] + (channels,)
        self.dy, self.dx = dy, dx
        self.corners = []
        out = np.zeros((flat.shape[0], channels), dtype=fmap.dtype)
        for oy, ox in ((0, 0), (0, 1), (1, 0), (1, 1)):
            yi, xi = y0 + oy, x0 + ox
            valid = (yi >= 0) & (yi <= height - 1) & (xi >= 0) & (xi <= width - 1)
            yc, xc = np.clip(yi, 0, height - 1), np.clip(xi, 0, width - 1)
            weight = (dy if oy else 1.0 - dy) * (dx if ox else 1.0 - dx) * valid
            values = fmap[yc, xc] * valid[:, None]
            out += weight[:, None] * values
            self.corners.append((oy, ox, yc, xc, valid, weight, values))
        return out.reshape(self.out_shape)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        grad = grad.reshape(-1, self.map_shape[2])
        grad_map = np.zeros(self.map_shape, dtype=self.dtype)
        grad_y = np.zeros(grad.shape[0], dtype=self.dtype)
        grad_x = np.zeros(grad.shape[0], dtype=self.dtype)
        for oy, ox, yc, xc, valid, weight, values in self.corners:
            np.add.at(grad_map, (yc[valid], xc[valid]), (weight[:, None] * grad)[valid])
            projected = (grad * values).sum(axis=1)
            wy = (1.0 if oy else -1.0) * (self.dx if ox else 1.0 - self.dx)
            wx = (1.0 if ox else -1.0) * (self.dy if oy else 1.0 - self.dy)
            grad_y += wy * projected
            grad_x += wx * projected
        grad_points = np.stack([grad_y, grad_x], axis=1)
        return grad_map, grad_points.reshape(self.out_shape[:-1] + (2,))


# ---------------------------------------------------------------- functional


def linear_map(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Per-row linear projection ``x @ W (+ b)``; a 1x1 convolution on flattened positions.

    Raises:
        DimensionError: If the inner dimensions disagree.
    """
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise DimensionError(f"linear_map of {x.shape} with weight {weight.shape}")
    out = x @ weight
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise DimensionError(f"bias {bias.shape} does not fit weight {weight.shape}")
        out = out + bias
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax; outputs are positive and sum to one along ``axis``."""
    if not -x.ndim <= axis < max(x.ndim, 1):
        raise DimensionError(f"axis {axis} out of range for shape {x.shape}")
    return Softmax.apply(x, axis=axis)


def relu(x: Tensor) -> Tensor:
    """max(0, x); the subgradient at 0 is 0."""
    return Relu.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def clamp(x: Tensor, low: float, high: float) -> Tensor:
    return Clamp.apply(x, low=low, high=high)


def abs_(x: Tensor) -> Tensor:
    return Abs.apply(x)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if len(tensors) == 1:
        return tensors[0]
    return Concat.apply(*tensors, axis=axis)


def gather(x: Tensor, flat_indices: np.ndarray) -> Tensor:
    """Pick elements of ``x`` by flat index; the output takes the index array's shape."""
    return Gather.apply(x, indices=np.asarray(flat_indices, dtype=np.int64))


def pad2d(x: Tensor, pad: int) -> Tensor:
    if x.ndim != 4:
        raise DimensionError(f"pad2d expects (B, H, W, C), got {x.shape}")
    return Pad2d.apply(x, pad=pad) if pad > 0 else x


def bilinear_sample(
    fmap: Tensor,
    points: Union[Tensor, np.ndarray, Tuple[float, float], List[Tuple[float, float]]],
) -> Tensor:
    """
    Sample an (H, W, C) map at real-valued (y, x) coordinates.

    ``points`` of shape (..., 2) gives an output of shape (..., C); a single (y, x)
    pair gives a (C,) vector. Out-of-range corners contribute zeros.
    """
    if fmap.ndim != 3:
        raise DimensionError(f"bilinear_sample expects an (H, W, C) map, got {fmap.shape}")
    pts = as_tensor(points, fmap.dtype)
    if pts.shape[-1] != 2:
        raise DimensionError(f"sampling points need a trailing (y, x) axis, got {pts.shape}")
    return BilinearSample.apply(fmap, pts)
