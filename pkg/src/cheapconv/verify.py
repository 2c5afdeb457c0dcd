"""Self-checks for the numeric kernel.

Each check draws random instances from a seeded generator and compares the
kernel against an independent route: central finite differences for the loss
gradients, a naive loop convolution for the grouped forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from . import kernel


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    instances: int

    @property
    def passed(self) -> bool:
        return bool(self.value < self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<40s} worst={self.value:.3e}  tol={self.tolerance:.0e}  n={self.instances}"


def naive_conv2d(x, weight, stride=1, dilation=1):
    """Dense (ungrouped) convolution by explicit loops over outputs and taps."""
    n, c, h, w = x.shape
    o, c2, kh, kw = weight.shape
    assert c2 == c
    ph, pw = dilation * (kh - 1) // 2, dilation * (kw - 1) // 2
    oh = (h + 2 * ph - dilation * (kh - 1) - 1) // stride + 1
    ow = (w + 2 * pw - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((n, o, oh, ow))
    for y in range(oh):
        for z in range(ow):
            for i in range(kh):
                for j in range(kw):
                    r = y * stride + i * dilation - ph
                    s = z * stride + j * dilation - pw
                    if 0 <= r < h and 0 <= s < w:
                        for oc in range(o):
                            for ic in range(c):
                                out[:, oc, y, z] += weight[oc, ic, i, j] * x[:, ic, r, s]
    return out


def grouped_oracle(x, weight, stride=1, dilation=1, groups=1):
    """Concatenate ``groups`` independent dense convolutions over channel blocks."""
    c = x.shape[1]
    o = weight.shape[0]
    cg, og = c // groups, o // groups
    parts = [naive_conv2d(x[:, k * cg:(k + 1) * cg], weight[k * og:(k + 1) * og],
                          stride, dilation)
             for k in range(groups)]
    return np.concatenate(parts, axis=1)


def random_conv_case(rng: np.random.Generator, groups_choice: str):
    g_small = {"1": 1, "2": 2, "4": 4}.get(groups_choice)
    c = int(rng.choice([4, 8]))
    g = c if g_small is None else g_small
    o = g * int(rng.integers(1, 3)) * (1 if g >= 4 else 2)
    k = int(rng.choice([1, 2, 3]))
    kh, kw = (k, k) if rng.random() < 0.7 else (int(rng.integers(1, 4)), int(rng.integers(1, 4)))
    dilation = int(rng.choice([1, 2]))
    stride = int(rng.choice([1, 2]))
    h = int(rng.integers(dilation * (max(kh, kw) - 1) + 1, 8))
    w = int(rng.integers(dilation * (max(kh, kw) - 1) + 1, 8))
    n = int(rng.integers(1, 3))
    x = rng.standard_normal((n, c, h, w))
    wt = rng.standard_normal((o, c // g, kh, kw))
    return x, wt, stride, dilation, g


def check_grouped_forward(seed: int = 0, instances: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    choices = ["1", "2", "4", "c"]
    for i in range(instances):
        x, wt, stride, dilation, g = random_conv_case(rng, choices[i % 4])
        got = kernel.conv2d_forward(x, wt, stride=stride, dilation=dilation, groups=g)
        want = grouped_oracle(x, wt, stride, dilation, g)
        if got.shape != want.shape:
            return CheckResult("grouped conv forward == dense oracle", np.inf, 1e-12, i + 1)
        worst = max(worst, float(np.abs(got - want).max()))
    return CheckResult("grouped conv forward == dense oracle", worst, 1e-12, instances)


def random_logits(rng, n=None, k=None):
    n = n or int(rng.integers(1, 9))
    k = k or int(rng.integers(2, 11))
    return rng.standard_normal((n, k)) * 2.0, rng.integers(0, k, size=n)


def check_kd_gradient(seed: int = 1, instances: int = 100, epsilon: float = 1e-4) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        s, y = random_logits(rng)
        t = rng.standard_normal(s.shape) * 3.0
        alpha = float(rng.uniform(0, 1))
        T = float(rng.uniform(0.5, 8.0))
        fn = lambda z: kernel.kd_loss(z, t, y, alpha, T)
        worst = max(worst, kernel.finite_diff_check(fn, s, epsilon))
    return CheckResult("kd_loss gradient vs central differences", worst, 1e-5, instances)


def random_at_case(rng):
    n = int(rng.integers(1, 5))
    k = int(rng.integers(2, 11))
    layers = int(rng.integers(1, 4))
    s_logits, y = random_logits(rng, n, k)
    s_acts, t_acts = [], []
    for _ in range(layers):
        h, w = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        cs, ct = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        s_acts.append(rng.standard_normal((n, cs, h, w)))
        t_acts.append(rng.standard_normal((n, ct, h, w)))
    return s_logits, y, s_acts, t_acts


def _pack(arrays):
    return np.concatenate([a.reshape(-1) for a in arrays])


def _unpack(vec, shapes):
    out, pos = [], 0
    for shp in shapes:
        size = int(np.prod(shp))
        out.append(vec[pos:pos + size].reshape(shp))
        pos += size
    return out


def check_at_gradient(seed: int = 2, instances: int = 100, epsilon: float = 1e-4,
                      beta: float = 1000.0, squared: bool = False) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        s_logits, y, s_acts, t_acts = random_at_case(rng)
        shapes = [s_logits.shape] + [a.shape for a in s_acts]

        def fn(vec):
            logits, *acts = _unpack(vec, shapes)
            loss, g_logits, g_acts = kernel.at_loss(logits, y, acts, t_acts, beta, squared)
            return loss, _pack([g_logits] + g_acts)

        worst = max(worst, kernel.finite_diff_check(fn, _pack([s_logits] + s_acts), epsilon))
    name = "at_loss gradient vs central differences" + (" (squared)" if squared else "")
    return CheckResult(name, worst, 1e-5, instances)


def check_kd_alpha_zero(seed: int = 3, instances: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        s, y = random_logits(rng)
        t = rng.standard_normal(s.shape)
        kd, _ = kernel.kd_loss(s, t, y, alpha=0.0, temperature=float(rng.uniform(0.5, 8)))
        # plain CE computed directly from log-sum-exp
        m = s.max(axis=1)
        ce = np.mean(m + np.log(np.exp(s - m[:, None]).sum(axis=1)) - s[np.arange(len(y)), y])
        worst = max(worst, abs(kd - ce))
    return CheckResult("kd_loss(alpha=0) == cross-entropy", worst, 1e-12, instances)


def check_at_scale_invariance(seed: int = 4, instances: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        _, _, _, t_acts = random_at_case(rng)
        scales = [float(rng.choice([-1, 1]) * rng.uniform(0.1, 10)) for _ in t_acts]
        term, _ = kernel.at_term([c * a for c, a in zip(scales, t_acts)], t_acts)
        worst = max(worst, abs(term))
    return CheckResult("AT term == 0 under per-layer scaling", worst, 1e-12, instances)


def run_all(seed: int = 0) -> List[CheckResult]:
    return [
        check_kd_gradient(seed + 1),
        check_at_gradient(seed + 2),
        check_at_gradient(seed + 5, squared=True),
        check_kd_alpha_zero(seed + 3),
        check_at_scale_invariance(seed + 4),
        check_grouped_forward(seed),
    ]
