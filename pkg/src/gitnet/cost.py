"""Analytic evaluation-cost (flop) formulas for the implemented operator,
the coefficient-MLP baseline, and scaling models for two unimplemented
architectures used only for cost-vs-error comparisons.

Convention: one flop per real multiply or add (a multiply-add pair
counts 2). The analytic counts here equal the instrumented counter of
:mod:`gitnet.tensor` exactly on live forward passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .tensor import ACTIVATIONS


@dataclass
class CostReport:
    architecture: str
    parameters: dict
    flops: int
    breakdown: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.breakdown and self.flops != sum(self.breakdown.values()):
            raise ValueError("flops must equal the sum of the breakdown entries")


def flops_gitnet_exact(N_p, d_in, d_out, P_u, P_v, C, K, L, activation="gelu"):
    """Exact forward-pass flop count of the integral-transform operator.

    The activation term applies to the first L-1 layers only; the last
    layer is linear by construction. ``N_p`` counts input and output mesh
    points alike (encode uses d_in*P_u*N_p multiply-adds, decode
    d_out*P_v*N_p).
    """
    act_flops = ACTIVATIONS[activation][2]
    encode = 2 * d_in * P_u * N_p
    lift_ = 2 * (C * d_in * P_u + C * P_u * K)
    per_layer = 2 * (C * K * K + C * C * K + C * K * K + C * C * K) + C * K
    layers = L * per_layer + max(L - 1, 0) * act_flops * C * K
    project_ = 2 * (d_out * C * K + d_out * K * P_v)
    decode = 2 * d_out * P_v * N_p
    breakdown = {
        "encode": encode, "lift": lift_, "layers": layers,
        "project": project_, "decode": decode,
    }
    return CostReport(
        architecture="gitnet",
        parameters={
            "N_p": N_p, "d_in": d_in, "d_out": d_out, "P_u": P_u, "P_v": P_v,
            "C": C, "K": K, "L": L, "activation": activation,
        },
        flops=sum(breakdown.values()),
        breakdown=breakdown,
    )


def flops_pcanet_exact(N_p, d_in, d_out, P_u, P_v, widths, activation="relu"):
    """Exact forward-pass flop count of the coefficient MLP.

    ``widths`` is the full layer chain starting at d_in*P_u and ending at
    d_out*P_v. Each linear layer costs 2*w_i*w_{i+1} for the matrix
    product plus w_{i+1} bias adds; hidden layers add the activation
    budget per element.
    """
    if widths[0] != d_in * P_u or widths[-1] != d_out * P_v:
        raise ValueError(
            f"widths chain {widths} must run from {d_in * P_u} to {d_out * P_v}"
        )
    act_flops = ACTIVATIONS[activation][2]
    encode = 2 * d_in * P_u * N_p
    mlp = 0
    n_linear = len(widths) - 1
    for i in range(n_linear):
        mlp += 2 * widths[i] * widths[i + 1] + widths[i + 1]
        if i < n_linear - 1:
            mlp += act_flops * widths[i + 1]
    decode = 2 * d_out * P_v * N_p
    breakdown = {"encode": encode, "mlp": mlp, "decode": decode}
    return CostReport(
        architecture="pcanet",
        parameters={
            "N_p": N_p, "d_in": d_in, "d_out": d_out, "P_u": P_u, "P_v": P_v,
            "widths": list(widths), "activation": activation,
        },
        flops=sum(breakdown.values()),
        breakdown=breakdown,
    )


FFT_FLOP_CONSTANT = 5  # standard radix-2 budget per element per log2 level


def flops_fno_scaling(N_p, C, L, modes=12):
    """Analytic cost model for a spectral-convolution operator (not
    implemented as a model): L * (5 * C * N_p * log2(N_p) * 2 + 2 * N_p * C^2)."""
    fft = FFT_FLOP_CONSTANT * C * N_p * math.log2(N_p) * 2 if N_p > 1 else 0.0
    pointwise = 2 * N_p * C * C
    return int(round(L * (fft + pointwise)))


def flops_pod_deeponet_scaling(N_p, C, K):
    """Analytic cost model for a branch-net/POD operator (not implemented):
    2 * (N_p C^2 + C K N_p) + N_p."""
    return 2 * (N_p * C * C + C * K * N_p) + N_p
