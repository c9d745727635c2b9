#  Copyright 2022, roi-reacher authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.

"""
Differentiable operations.
Convolution follows the deep learning convention (cross-correlation) and is computed
with im2col: patches are gathered with a strided view, then a single matrix multiply.
"""

from typing import Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import as_strided

from roi_reacher.autodiff.tensor import Tensor


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    assert a.shape == b.shape, f"{op}: shape mismatch {a.shape} vs {b.shape}"


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    return Tensor(a.data + b.data, parents=(a, b), backward_fn=lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """
    Element-wise multiply.
    """
    _check_same_shape(a, b, "mul")
    return Tensor(a.data * b.data, parents=(a, b), backward_fn=lambda g: (g * b.data, g * a.data))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor(np.where(mask, x.data, 0), parents=(x,), backward_fn=lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x.data)
    positive = x.data >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x.data[positive]))
    exp_x = np.exp(x.data[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return Tensor(out, parents=(x,), backward_fn=lambda g: (g * out * (1.0 - out),))


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    original = x.shape
    return Tensor(x.data.reshape(shape), parents=(x,), backward_fn=lambda g: (g.reshape(original),))


def flatten(x: Tensor) -> Tensor:
    """
    Keep the batch axis, flatten the others.
    """
    return reshape(x, (x.shape[0], -1))


def sum_all(x: Tensor) -> Tensor:
    return Tensor(x.data.sum(), parents=(x,), backward_fn=lambda g: (np.broadcast_to(g, x.shape).copy(),))


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    :param x: N x in_features
    :param weight: out_features x in_features
    :param bias: out_features
    :return: N x out_features
    """
    assert x.data.ndim == 2 and x.shape[1] == weight.shape[1], f"linear: shape mismatch {x.shape} vs {weight.shape}"
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward_fn(g: np.ndarray):
        grad_x = g @ weight.data
        grad_w = g.T @ x.data
        grad_b = g.sum(axis=0) if bias is not None else None
        return grad_x, grad_w, grad_b

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor(out, parents=parents, backward_fn=backward_fn)


def gather(x: Tensor, indices: np.ndarray) -> Tensor:
    """
    Pick one value per row: out[i] = x[i, indices[i]].
    """
    rows = np.arange(x.shape[0])
    indices = np.asarray(indices, dtype=np.int64)

    def backward_fn(g: np.ndarray):
        grad = np.zeros_like(x.data)
        np.add.at(grad, (rows, indices), g)
        return (grad,)

    return Tensor(x.data[rows, indices], parents=(x,), backward_fn=backward_fn)


def huber_loss(prediction: Tensor, target: Union[np.ndarray, Tensor], delta: float = 1.0) -> Tensor:
    """
    Mean Huber loss, target is a constant.
    """
    target = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=prediction.dtype)
    diff = prediction.data - target
    abs_diff = np.abs(diff)
    quadratic = abs_diff <= delta
    values = np.where(quadratic, 0.5 * diff**2, delta * (abs_diff - 0.5 * delta))
    n = diff.size

    def backward_fn(g: np.ndarray):
        return (g * np.where(quadratic, diff, delta * np.sign(diff)) / n,)

    return Tensor(np.asarray(values.mean(), dtype=prediction.dtype), parents=(prediction,), backward_fn=backward_fn)


def mse_loss(prediction: Tensor, target: Union[np.ndarray, Tensor]) -> Tensor:
    """
    Mean squared error, target is a constant.
    """
    target = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=prediction.dtype)
    diff = prediction.data - target
    n = diff.size
    return Tensor(
        np.asarray((diff**2).mean(), dtype=prediction.dtype),
        parents=(prediction,),
        backward_fn=lambda g: (g * 2.0 * diff / n,),
    )


def conv_output_size(size: int, kernel: int, stride: int, dilation: int, padding: int) -> int:
    out = (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1
    assert out >= 1, f"convolution output is empty: size={size}, kernel={kernel}, dilation={dilation}"
    return out


def im2col(x: np.ndarray, kernel: int, stride: int, dilation: int, padding: int) -> np.ndarray:
    """
    Gather convolution patches.
    :param x: N x C x H x W
    :return: N x (C * k * k) x (H_out * W_out)
    """
    n, c, h, w = x.shape
    h_out = conv_output_size(h, kernel, stride, dilation, padding)
    w_out = conv_output_size(w, kernel, stride, dilation, padding)
    if padding > 0:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    s_n, s_c, s_h, s_w = x.strides
    patches = as_strided(
        x,
        shape=(n, c, kernel, kernel, h_out, w_out),
        strides=(s_n, s_c, dilation * s_h, dilation * s_w, stride * s_h, stride * s_w),
        writeable=False,
    )
    return patches.reshape(n, c * kernel * kernel, h_out * w_out)


def col2im(
    cols: np.ndarray, x_shape: Tuple[int, ...], kernel: int, stride: int, dilation: int, padding: int
) -> np.ndarray:
    """
    Adjoint of im2col: scatter-add patches back to an image.
    """
    n, c, h, w = x_shape
    h_out = conv_output_size(h, kernel, stride, dilation, padding)
    w_out = conv_output_size(w, kernel, stride, dilation, padding)
    padded = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    cols = cols.reshape(n, c, kernel, kernel, h_out, w_out)
    for i in range(kernel):
        row = i * dilation
        for j in range(kernel):
            col = j * dilation
            padded[
                :, :, row : row + stride * (h_out - 1) + 1 : stride, col : col + stride * (w_out - 1) + 1 : stride
            ] += cols[:, :, i, j]
    if padding == 0:
        return padded
    return padded[:, :, padding:-padding, padding:-padding]


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> Tensor:
    """
    2D cross-correlation with stride, dilation and zero padding.
    :param x: N x C_in x H x W
    :param weight: C_out x C_in x k x k
    :param bias: C_out
    :return: N x C_out x H_out x W_out
    """
    assert x.data.ndim == 4, f"conv2d: expected N x C x H x W input, got {x.shape}"
    c_out, c_in, kernel, kernel_w = weight.shape
    assert kernel == kernel_w, f"conv2d: square kernels only, got {weight.shape}"
    assert x.shape[1] == c_in, f"conv2d: input has {x.shape[1]} channels, weight expects {c_in}"
    n, _, h, w = x.shape
    h_out = conv_output_size(h, kernel, stride, dilation, padding)
    w_out = conv_output_size(w, kernel, stride, dilation, padding)
    cols = im2col(x.data, kernel=kernel, stride=stride, dilation=dilation, padding=padding)
    w_mat = weight.data.reshape(c_out, -1)
    out = np.matmul(w_mat, cols)
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = out.reshape(n, c_out, h_out, w_out)

    def backward_fn(g: np.ndarray):
        g_mat = g.reshape(n, c_out, h_out * w_out)
        grad_w = np.einsum("nol,nkl->ok", g_mat, cols, optimize=True).reshape(weight.shape)
        grad_cols = np.matmul(w_mat.T, g_mat)
        grad_x = col2im(grad_cols, x.shape, kernel=kernel, stride=stride, dilation=dilation, padding=padding)
        grad_b = g_mat.sum(axis=(0, 2)) if bias is not None else None
        return grad_x, grad_w, grad_b

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor(out, parents=parents, backward_fn=backward_fn)
