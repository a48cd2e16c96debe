"""Structured autodiff operations: 1-d convolutions, STFT magnitudes, losses.

These are the few ops that need hand-written forward/backward pairs for
speed; everything composable lives on Tensor itself. Convolutions run over
(batch, channels, length) arrays and are lowered to one BLAS matmul per
kernel tap, which keeps all heavy lifting out of Python loops over samples.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError
from .tensor import Tensor


def _conv_cols(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """(B, C, L) -> window view (B, C, L_out, kernel) without copying."""
    windows = sliding_window_view(x, kernel, axis=-1)
    return windows[:, :, ::stride, :]


def _col_grad_to_input(g_cols: np.ndarray, x_shape: tuple, kernel: int, stride: int) -> np.ndarray:
    """Scatter window gradients (B, C, L_out, kernel) back onto (B, C, L)."""
    gx = np.zeros(x_shape)
    l_out = g_cols.shape[2]
    for j in range(kernel):
        gx[:, :, j : j + stride * l_out : stride] += g_cols[:, :, :, j]
    return gx


def _conv_phases(xp: np.ndarray, stride: int) -> tuple:
    """Split (B, C, Lp) into stride-many contiguous subsampled copies.

    Output position i at tap t reads xp[..., i*stride + t], which lands in
    phase t % stride at offset i + t // stride. With phases materialized
    once, every per-tap slice below is contiguous and goes straight to BLAS.
    """
    if stride == 1:
        return (xp,)
    return tuple(np.ascontiguousarray(xp[:, :, r::stride]) for r in range(stride))


def _conv_data(phases: tuple, weight: np.ndarray, stride: int, l_out: int) -> np.ndarray:
    """Plain-numpy correlation core: one matmul per kernel tap.

    weight is (C_out, C_in, K); returns (B, C_out, L_out). Avoids the im2col
    gather copy, which costs more than the matmuls themselves at this scale.
    Taps are re-laid-out to (K, C_out, C_in) first: a tap sliced from the
    last axis is non-contiguous and would push matmul off its BLAS path.
    """
    kernel = weight.shape[2]
    taps = np.ascontiguousarray(weight.transpose(2, 0, 1))
    out = None
    for t in range(kernel):
        sl = phases[t % stride][:, :, t // stride : t // stride + l_out]
        term = np.matmul(taps[t], sl)  # (C_out,C_in) @ (B,C_in,L_out)
        if out is None:
            out = term
        else:
            out += term
    return out


def _conv_input_grad(g: np.ndarray, weight: np.ndarray, stride: int, padding: int, l_in: int) -> np.ndarray:
    """Gradient of conv1d w.r.t. its (unpadded) input, as a BLAS matmul.

    The adjoint of a strided correlation is a transposed convolution:
    dilate the output gradient by the stride, pad by K-1, and correlate with
    the kernel flipped along taps and transposed across channels. This stays
    inside matmuls instead of per-tap scatter loops.
    """
    c_out, c_in, kernel = weight.shape
    b, _, l_out = g.shape
    dilated_len = (l_out - 1) * stride + 1
    edge = kernel - 1 - padding
    buf = np.zeros((b, c_out, dilated_len + 2 * edge))
    buf[:, :, edge : edge + dilated_len : stride] = g
    w_adj = np.ascontiguousarray(weight[:, :, ::-1].transpose(1, 0, 2))  # (C_in, C_out, K)
    full = _conv_data((buf,), w_adj, 1, dilated_len + 2 * edge - kernel + 1)
    return full[:, :, :l_in]


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation over the last axis.

    x: (B, C_in, L); weight: (C_out, C_in, K); output (B, C_out, L_out) with
    L_out = (L + 2*padding - K) // stride + 1.
    """
    b, c_in, _ = x.shape
    c_out, c_in_w, kernel = weight.shape
    if c_in_w != c_in:
        raise DimensionError(f"conv1d: input has {c_in} channels, weight expects {c_in_w}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    l_out = (xp.shape[-1] - kernel) // stride + 1
    phases = _conv_phases(xp, stride)
    data = _conv_data(phases, weight.data, stride, l_out)
    if bias is not None:
        data += bias.data[None, :, None]

    def backward(g):
        if weight.requires_grad:
            gw = np.empty(weight.shape)
            for t in range(kernel):
                sl = phases[t % stride][:, :, t // stride : t // stride + l_out]
                gw[:, :, t] = np.matmul(g, sl.transpose(0, 2, 1)).sum(axis=0)
            weight._accumulate(gw)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))
        if x.requires_grad:
            if kernel - 1 - padding >= 0:
                x._accumulate(_conv_input_grad(g, weight.data, stride, padding, x.shape[-1]))
            else:  # oversized padding: fall back to the per-tap scatter
                w2 = weight.data.reshape(c_out, c_in * kernel)
                g2 = g.transpose(0, 2, 1).reshape(b * l_out, c_out)
                g_cols = (g2 @ w2).reshape(b, l_out, c_in, kernel).transpose(0, 2, 1, 3)
                gxp = _col_grad_to_input(g_cols, xp.shape, kernel, stride)
                x._accumulate(gxp[:, :, padding : padding + x.shape[-1]] if padding else gxp)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(data, parents, backward)


def depthwise_conv1d(x: Tensor, weight: Tensor, bias: Tensor | None, padding: int = 0) -> Tensor:
    """Per-channel convolution: x (B, C, L), weight (C, K), stride 1."""
    _, c, _ = x.shape
    c_w, kernel = weight.shape
    if c_w != c:
        raise DimensionError(f"depthwise_conv1d: {c} channels vs weight for {c_w}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    cols = _conv_cols(xp, kernel, 1)  # (B, C, L_out, K)
    data = np.einsum("bclk,ck->bcl", cols, weight.data, optimize=True)
    if bias is not None:
        data = data + bias.data[None, :, None]

    def backward(g):
        if weight.requires_grad:
            weight._accumulate(np.einsum("bcl,bclk->ck", g, cols, optimize=True))
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2)))
        if x.requires_grad:
            g_cols = g[:, :, :, None] * weight.data[None, :, None, :]
            gxp = _col_grad_to_input(g_cols, xp.shape, kernel, 1)
            x._accumulate(gxp[:, :, padding : padding + x.shape[-1]] if padding else gxp)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(data, parents, backward)


def _dilate(x: Tensor, stride: int) -> Tensor:
    """Insert stride-1 zeros between samples along the last axis."""
    if stride == 1:
        return x
    b, c, l = x.shape
    data = np.zeros((b, c, (l - 1) * stride + 1))
    data[:, :, ::stride] = x.data

    def backward(g):
        x._accumulate(g[:, :, ::stride])

    return Tensor._result(data, (x,), backward)


def conv_transpose1d(x: Tensor, weight: Tensor, bias: Tensor | None, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution (fractionally strided).

    x: (B, C_in, L); weight: (C_in, C_out, K); output length
    (L - 1) * stride - 2*padding + K. Implemented as zero-insertion followed
    by a stride-1 convolution with the kernel flipped.
    """
    c_in, c_out, kernel = weight.shape
    if x.shape[1] != c_in:
        raise DimensionError(f"conv_transpose1d: input has {x.shape[1]} channels, weight expects {c_in}")
    flipped = weight.data[:, :, ::-1].transpose(1, 0, 2)  # (C_out, C_in, K)

    w_flip = Tensor(flipped)
    w_flip.requires_grad = weight.requires_grad
    if weight.requires_grad:

        def w_backward(g):
            weight._accumulate(g.transpose(1, 0, 2)[:, :, ::-1])

        w_flip._parents = (weight,)
        w_flip._backward = w_backward

    dilated = _dilate(x, stride)
    return conv1d(dilated, w_flip, bias, stride=1, padding=kernel - 1 - padding)


def stft_magnitude(x: Tensor, frame_length: int, hop: int, window: np.ndarray) -> Tensor:
    """Magnitude spectrogram of (B, L) signals: (B, frames, frame_length//2+1).

    Frames tile the signal with the given hop (the tail that does not fill a
    full frame is dropped); each frame is windowed and transformed with a
    real FFT. The backward pass uses the exact FFT adjoint. hop must divide
    frame_length so the frame gradient can be scattered with reshapes.
    """
    if frame_length % hop != 0:
        raise DimensionError("stft_magnitude: hop must divide frame_length")
    b, length = x.shape
    n_frames = (length - frame_length) // hop + 1
    if n_frames < 1:
        raise DimensionError("stft_magnitude: signal shorter than one frame")

    raw = sliding_window_view(x.data, frame_length, axis=-1)[:, ::hop, :]  # (B, F, W)
    frames = raw * window
    spec = np.fft.rfft(frames, axis=-1)
    mag = np.sqrt(spec.real**2 + spec.imag**2 + 1e-12)

    def backward(g):
        # d|X|/dX = X/|X| componentwise on (re, im), so the complex
        # cotangent on the half spectrum is spec * g / mag.
        cotangent = spec * (g / mag)
        # Adjoint of rfft with re/im treated as independent reals:
        # grad_f = Re(n * ifft(cotangent zero-padded to n)).
        full = np.zeros(frames.shape[:-1] + (frame_length,), dtype=np.complex128)
        full[..., : spec.shape[-1]] = cotangent
        g_frames = np.fft.ifft(full, axis=-1).real * frame_length
        g_frames *= window
        gx = np.zeros_like(x.data)
        for q in range(frame_length // hop):
            seg = g_frames[:, :, q * hop : (q + 1) * hop].reshape(b, n_frames * hop)
            gx[:, q * hop : q * hop + n_frames * hop] += seg
        x._accumulate(gx)

    return Tensor._result(mag, (x,), backward)


def cross_entropy_from_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Summed cross entropy: -sum(log softmax(logits)[target]).

    logits: (..., C); targets: integer array of shape logits.shape[:-1].
    Returns a scalar Tensor (sum over every target position), computed via
    the log-sum-exp shift.
    """
    z = logits.data
    targets = np.asarray(targets)
    if targets.shape != z.shape[:-1]:
        raise DimensionError(f"cross entropy: targets {targets.shape} vs logits {z.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= z.shape[-1]):
        raise DimensionError(f"cross entropy: target index outside [0, {z.shape[-1]})")
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - lse
    picked = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
    data = -picked.sum()

    def backward(g):
        soft = np.exp(log_probs)
        onehot = np.zeros_like(soft)
        np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
        logits._accumulate(g * (soft - onehot))

    return Tensor._result(np.asarray(data), (logits,), backward)
