"""Reference numerics: grouped/dilated convolution and the distillation losses.

Everything runs in float64 numpy.  Gradients are analytic and are provided
only with respect to the quantities the losses consume (student logits and
student activations).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class DistillConfig:
    """Distillation hyperparameters.

    ``beta`` defaults to 1000 for three attention layers; :meth:`for_layers`
    rescales it so that ``beta * at_layer_count`` stays at 3000.
    """

    alpha: float = 0.9
    temperature: float = 4.0
    beta: float = 1000.0
    at_layer_count: int = 3

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.at_layer_count < 1:
            raise ValueError(f"at_layer_count must be >= 1, got {self.at_layer_count}")

    @classmethod
    def for_layers(cls, at_layer_count: int, **kwargs) -> "DistillConfig":
        return cls(beta=3000.0 / at_layer_count, at_layer_count=at_layer_count, **kwargs)


# ---------------------------------------------------------------------------
# convolution


def conv2d_forward(x: np.ndarray, weight: np.ndarray, stride: int = 1,
                   dilation: int = 1, groups: int = 1) -> np.ndarray:
    """Grouped, dilated 2-D cross-correlation with "same"-style zero padding.

    ``x`` is ``[n, c, h, w]`` and ``weight`` is ``[o, c // groups, kh, kw]``.
    Padding is ``dilation * (k - 1) // 2`` on each side, so output sizes agree
    with :func:`cheapconv.cost.conv_output_size`.
    """
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"expected 4-D input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    o, cg, kh, kw = weight.shape
    if groups < 1 or c % groups or o % groups:
        raise ValueError(f"groups={groups} must divide input channels {c} and output channels {o}")
    if cg != c // groups:
        raise ValueError(f"weight expects {cg} channels per group, input gives {c // groups}")
    if stride < 1 or dilation < 1:
        raise ValueError("stride and dilation must be >= 1")

    ph, pw = dilation * (kh - 1) // 2, dilation * (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    oh = (h + 2 * ph - dilation * (kh - 1) - 1) // stride + 1
    ow = (w + 2 * pw - dilation * (kw - 1) - 1) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError(f"input {h}x{w} too small for kernel {kh}x{kw} with dilation {dilation}")

    og = o // groups
    xg = xp.reshape(n, groups, cg, *xp.shape[2:])
    wg = weight.reshape(groups, og, cg, kh, kw)
    out = np.zeros((n, groups, og, oh, ow))
    for i in range(kh):
        for j in range(kw):
            r, s = i * dilation, j * dilation
            patch = xg[:, :, :, r:r + stride * (oh - 1) + 1:stride, s:s + stride * (ow - 1) + 1:stride]
            out += np.einsum("ngchw,goc->ngohw", patch, wg[:, :, :, i, j])
    return out.reshape(n, o, oh, ow)


# ---------------------------------------------------------------------------
# losses


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def one_hot(labels, classes: int) -> np.ndarray:
    """Accept class indices ``[n]`` or one-hot rows ``[n, classes]``."""
    labels = np.asarray(labels)
    if labels.ndim == 2:
        if labels.shape[1] != classes:
            raise ValueError(f"one-hot labels have {labels.shape[1]} columns, logits have {classes}")
        return labels.astype(np.float64)
    idx = labels.astype(np.int64)
    if idx.min(initial=0) < 0 or idx.max(initial=0) >= classes:
        raise ValueError(f"label indices must lie in [0, {classes})")
    y = np.zeros((idx.shape[0], classes))
    y[np.arange(idx.shape[0]), idx] = 1.0
    return y


def cross_entropy(logits: np.ndarray, labels) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy of labels against softmax(logits), with gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    y = one_hot(labels, logits.shape[1])
    n = logits.shape[0]
    loss = -(y * log_softmax(logits)).sum() / n
    return float(loss), (softmax(logits) - y) / n


def kd_loss(student_logits, teacher_logits, labels, alpha: float = 0.9,
            temperature: float = 4.0) -> Tuple[float, np.ndarray]:
    """Knowledge distillation loss and its gradient w.r.t. the student logits.

    ``(1 - alpha) * CE(y, softmax(s)) + 2 alpha T^2 CE(softmax(t/T), softmax(s/T))``,
    averaged over the batch.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    s = np.asarray(student_logits, dtype=np.float64)
    t = np.asarray(teacher_logits, dtype=np.float64)
    if s.shape != t.shape or s.ndim != 2:
        raise ValueError(f"student and teacher logits must share a 2-D shape, got {s.shape} and {t.shape}")
    n = s.shape[0]
    T = float(temperature)

    hard, g_hard = cross_entropy(s, labels)
    q = softmax(t / T)
    soft = -(q * log_softmax(s / T)).sum() / n
    g_soft = (softmax(s / T) - q) / (T * n)

    w = 2.0 * alpha * T * T
    return (1.0 - alpha) * hard + w * soft, (1.0 - alpha) * g_hard + w * g_soft


def attention_map(activations: np.ndarray) -> np.ndarray:
    """Channel mean of squared activations, flattened to ``[n, h * w]``."""
    a = np.asarray(activations, dtype=np.float64)
    if a.ndim != 4 or a.shape[1] < 1:
        raise ValueError(f"expected activations [n, c, h, w] with c >= 1, got {a.shape}")
    return (a * a).sum(axis=1).reshape(a.shape[0], -1) / a.shape[1]


def _normalized(f: np.ndarray, which: str, layer: int) -> Tuple[np.ndarray, np.ndarray]:
    norm = np.sqrt((f * f).sum(axis=1, keepdims=True))
    if np.any(norm == 0):
        raise ValueError(f"{which} attention map at layer {layer} has zero norm; "
                         "normalization is undefined")
    return f / norm, norm


def at_term(student_acts: Sequence[np.ndarray], teacher_acts: Sequence[np.ndarray],
            squared: bool = False) -> Tuple[float, List[np.ndarray]]:
    """Sum over layers of the batch-mean distance between normalized maps.

    Returns the (unweighted) term and its gradient w.r.t. each student
    activation tensor.  ``squared`` switches to the squared distance.
    """
    if len(student_acts) != len(teacher_acts):
        raise ValueError(f"{len(student_acts)} student layers vs {len(teacher_acts)} teacher layers")
    total = 0.0
    grads = []
    for i, (a_s, a_t) in enumerate(zip(student_acts, teacher_acts)):
        a_s = np.asarray(a_s, dtype=np.float64)
        a_t = np.asarray(a_t, dtype=np.float64)
        if a_s.ndim != 4 or a_t.ndim != 4:
            raise ValueError(f"layer {i}: activations must be 4-D")
        if a_s.shape[0] != a_t.shape[0] or a_s.shape[2:] != a_t.shape[2:]:
            raise ValueError(f"layer {i}: student {a_s.shape} and teacher {a_t.shape} "
                             "differ in batch or spatial size")
        n, c = a_s.shape[:2]
        q_s, norm_s = _normalized(attention_map(a_s), "student", i)
        q_t, _ = _normalized(attention_map(a_t), "teacher", i)
        diff = q_t - q_s
        dist = np.sqrt((diff * diff).sum(axis=1, keepdims=True))
        if squared:
            total += float((dist ** 2).sum()) / n
            g_q = -2.0 * diff / n
        else:
            total += float(dist.sum()) / n
            # subgradient 0 where the maps coincide
            safe = np.where(dist > 0, dist, 1.0)
            g_q = np.where(dist > 0, -diff / safe, 0.0) / n
        # through q = f / |f|
        g_f = (g_q - q_s * (q_s * g_q).sum(axis=1, keepdims=True)) / norm_s
        # through f = mean_c a^2
        g_f = g_f.reshape(n, 1, *a_s.shape[2:])
        grads.append(2.0 * a_s * g_f / c)
    return total, grads


def at_loss(student_logits, labels, student_acts, teacher_acts, beta: float = 1000.0,
            squared: bool = False):
    """Attention transfer loss ``CE(y, softmax(s)) + beta * at_term``.

    Returns ``(loss, grad_logits, grad_acts)``.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    ce, g_logits = cross_entropy(student_logits, labels)
    term, g_acts = at_term(student_acts, teacher_acts, squared=squared)
    return ce + beta * term, g_logits, [beta * g for g in g_acts]


# ---------------------------------------------------------------------------
# gradient checking


def finite_diff_check(loss_fn: Callable[[np.ndarray], Tuple[float, np.ndarray]],
                      point: np.ndarray, epsilon: float = 1e-4,
                      floor: float = 1e-8) -> float:
    """Worst relative error between ``loss_fn``'s gradient and central differences.

    ``loss_fn(x)`` must return ``(value, gradient)`` with the gradient shaped
    like ``x``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x = np.array(point, dtype=np.float64)
    _, analytic = loss_fn(x.copy())
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    flat = x.reshape(-1)
    worst = 0.0
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + epsilon
        f_plus = loss_fn(x.copy())[0]
        flat[k] = orig - epsilon
        f_minus = loss_fn(x.copy())[0]
        flat[k] = orig
        numeric = (f_plus - f_minus) / (2 * epsilon)
        denom = max(abs(analytic[k]), abs(numeric), floor)
        worst = max(worst, abs(analytic[k] - numeric) / denom)
    return worst
