"""Binary on-disk formats: OPDS1 datasets and GITN1/PCAN1 checkpoints.

OPDS1 layout (little-endian throughout):
    magic "OPDS", u8 version=1,
    u32 N, d_in, n_pts_u, d_out, n_pts_v, u64 seed   (33 bytes),
    zero padding to a 40-byte header,
    inputs  as f64 in [sample][channel][point] order,
    outputs likewise.

GITN1 layout:
    magic "GITN", u8 version=1,
    u32 d_in, d_out, P_u, P_v, C, K, L,
    u8 variant (0=standard, 1=pre_residual), u8 activation (0=gelu, 1=identity),
    input basis, output basis (each: u32 n_points, u32 P, u8 flags
    bit0=centered bit1=degenerate, then mean, singular values, components
    row-major as f64),
    parameter arrays as f64 in the fixed order L_up, R_up,
    per-layer (T, P, D, Q), L_down, R_down.

PCAN1 (same container style, for the coefficient-MLP baseline):
    magic "PCAN", u8 version=1,
    u32 d_in, d_out, P_u, P_v, u8 activation (0=relu, 1=gelu),
    u32 n_widths, u32 widths[...],
    input basis, output basis, then all weight matrices, then all biases.
"""

from __future__ import annotations

import struct

import numpy as np

from .model import GitLayerParams, GitNetParams, PcaNetParams
from .pca import PcaBasis
from .pdedata import Dataset

OPDS_HEADER_SIZE = 40

_GIT_ACTIVATIONS = ["gelu", "identity"]
_PCANET_ACTIVATIONS = ["relu", "gelu"]
_VARIANTS = ["standard", "pre_residual"]


class FormatError(ValueError):
    """Raised on malformed dataset or checkpoint files."""


def _f64_bytes(arr):
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _read_f64(buf, offset, count, shape):
    end = offset + 8 * count
    if end > len(buf):
        raise FormatError("file truncated while reading float payload")
    arr = np.frombuffer(buf[offset:end], dtype="<f8").reshape(shape).copy()
    return arr, end


def write_dataset(path, dataset):
    inputs = np.ascontiguousarray(dataset.inputs, dtype="<f8")
    outputs = np.ascontiguousarray(dataset.outputs, dtype="<f8")
    n, d_in, n_pts_u = inputs.shape
    n2, d_out, n_pts_v = outputs.shape
    header = b"OPDS" + struct.pack("<B5IQ", 1, n, d_in, n_pts_u, d_out, n_pts_v,
                                   dataset.seed & 0xFFFFFFFFFFFFFFFF)
    header = header.ljust(OPDS_HEADER_SIZE, b"\x00")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(inputs.tobytes())
        fh.write(outputs.tobytes())


def read_dataset(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < OPDS_HEADER_SIZE or buf[:4] != b"OPDS":
        raise FormatError(f"{path}: not an OPDS dataset file")
    version, n, d_in, n_pts_u, d_out, n_pts_v, seed = struct.unpack_from("<B5IQ", buf, 4)
    if version != 1:
        raise FormatError(f"{path}: unsupported OPDS version {version}")
    offset = OPDS_HEADER_SIZE
    inputs, offset = _read_f64(buf, offset, n * d_in * n_pts_u, (n, d_in, n_pts_u))
    outputs, offset = _read_f64(buf, offset, n * d_out * n_pts_v, (n, d_out, n_pts_v))
    if offset != len(buf):
        raise FormatError(f"{path}: {len(buf) - offset} trailing bytes")
    return Dataset(inputs=inputs, outputs=outputs, generator="file", seed=seed)


def _basis_bytes(basis):
    flags = (1 if basis.centered else 0) | (2 if basis.degenerate else 0)
    parts = [struct.pack("<2IB", basis.n_points, basis.n_components, flags)]
    parts.append(_f64_bytes(basis.mean))
    parts.append(_f64_bytes(basis.singular_values))
    parts.append(_f64_bytes(basis.components))
    return b"".join(parts)


def _read_basis(buf, offset):
    n_points, p, flags = struct.unpack_from("<2IB", buf, offset)
    offset += 9
    mean, offset = _read_f64(buf, offset, n_points, (n_points,))
    singular, offset = _read_f64(buf, offset, p, (p,))
    components, offset = _read_f64(buf, offset, p * n_points, (p, n_points))
    basis = PcaBasis(
        n_points=n_points, mean=mean, components=components,
        singular_values=singular, centered=bool(flags & 1),
        degenerate=bool(flags & 2),
    )
    return basis, offset


def write_gitnet_checkpoint(path, model, basis_u, basis_v):
    # the hidden-layer activation; the last layer is identity by construction
    activation = "identity" if all(
        layer.activation == "identity" for layer in model.layers
    ) else model.layers[0].activation
    parts = [b"GITN", struct.pack(
        "<B7I2B", 1, model.d_in, model.d_out, model.P_u, model.P_v,
        model.C, model.K, model.n_layers,
        _VARIANTS.index(model.variant), _GIT_ACTIVATIONS.index(activation),
    )]
    parts.append(_basis_bytes(basis_u))
    parts.append(_basis_bytes(basis_v))
    parts.append(_f64_bytes(model.L_up))
    parts.append(_f64_bytes(model.R_up))
    for layer in model.layers:
        parts.append(_f64_bytes(layer.T))
        parts.append(_f64_bytes(layer.P))
        parts.append(_f64_bytes(layer.D))
        parts.append(_f64_bytes(layer.Q))
    parts.append(_f64_bytes(model.L_down))
    parts.append(_f64_bytes(model.R_down))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_checkpoint(path):
    """Load either checkpoint flavor; returns (model, basis_u, basis_v)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] == b"GITN":
        return _read_gitnet(buf, path)
    if buf[:4] == b"PCAN":
        return _read_pcanet(buf, path)
    raise FormatError(f"{path}: not a recognized checkpoint file")


def _read_gitnet(buf, path):
    version, d_in, d_out, p_u, p_v, c, k, n_layers, variant_i, act_i = \
        struct.unpack_from("<B7I2B", buf, 4)
    if version != 1:
        raise FormatError(f"{path}: unsupported GITN version {version}")
    offset = 4 + struct.calcsize("<B7I2B")
    basis_u, offset = _read_basis(buf, offset)
    basis_v, offset = _read_basis(buf, offset)
    activation = _GIT_ACTIVATIONS[act_i]
    l_up, offset = _read_f64(buf, offset, c * d_in, (c, d_in))
    r_up, offset = _read_f64(buf, offset, p_u * k, (p_u, k))
    layers = []
    for index in range(n_layers):
        t, offset = _read_f64(buf, offset, c * c, (c, c))
        p, offset = _read_f64(buf, offset, k * k, (k, k))
        d, offset = _read_f64(buf, offset, c * c * k, (c, c, k))
        q, offset = _read_f64(buf, offset, k * k, (k, k))
        act = "identity" if index == n_layers - 1 else activation
        layers.append(GitLayerParams(T=t, P=p, D=d, Q=q, activation=act))
    l_down, offset = _read_f64(buf, offset, d_out * c, (d_out, c))
    r_down, offset = _read_f64(buf, offset, k * p_v, (k, p_v))
    if offset != len(buf):
        raise FormatError(f"{path}: {len(buf) - offset} trailing bytes")
    model = GitNetParams(
        d_in=d_in, d_out=d_out, P_u=p_u, P_v=p_v, C=c, K=k,
        L_up=l_up, R_up=r_up, layers=layers, L_down=l_down, R_down=r_down,
        variant=_VARIANTS[variant_i],
    )
    return model, basis_u, basis_v


def write_pcanet_checkpoint(path, model, basis_u, basis_v):
    parts = [b"PCAN", struct.pack(
        "<B4IB", 1, model.d_in, model.d_out, model.P_u, model.P_v,
        _PCANET_ACTIVATIONS.index(model.activation),
    )]
    parts.append(struct.pack("<I", len(model.widths)))
    parts.append(struct.pack(f"<{len(model.widths)}I", *model.widths))
    parts.append(_basis_bytes(basis_u))
    parts.append(_basis_bytes(basis_v))
    for w in model.weights:
        parts.append(_f64_bytes(w))
    for b in model.biases:
        parts.append(_f64_bytes(b))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def _read_pcanet(buf, path):
    version, d_in, d_out, p_u, p_v, act_i = struct.unpack_from("<B4IB", buf, 4)
    if version != 1:
        raise FormatError(f"{path}: unsupported PCAN version {version}")
    offset = 4 + struct.calcsize("<B4IB")
    (n_widths,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    widths = list(struct.unpack_from(f"<{n_widths}I", buf, offset))
    offset += 4 * n_widths
    basis_u, offset = _read_basis(buf, offset)
    basis_v, offset = _read_basis(buf, offset)
    weights, biases = [], []
    for i in range(n_widths - 1):
        w, offset = _read_f64(buf, offset, widths[i] * widths[i + 1],
                              (widths[i], widths[i + 1]))
        weights.append(w)
    for i in range(n_widths - 1):
        b, offset = _read_f64(buf, offset, widths[i + 1], (widths[i + 1],))
        biases.append(b)
    if offset != len(buf):
        raise FormatError(f"{path}: {len(buf) - offset} trailing bytes")
    model = PcaNetParams(
        d_in=d_in, d_out=d_out, P_u=p_u, P_v=p_v, widths=widths,
        weights=weights, biases=biases, activation=_PCANET_ACTIVATIONS[act_i],
    )
    return model, basis_u, basis_v
