"""Pack -> network -> residual -> IFFT -> RSS, in differentiable and plain forms."""

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor
from ..data import make_neighborhood
from ..kspace import ComplexVolume, ifft2c, pack_channels, rss_combine
from ..validation import ShapeError, check_same_shape


def zero_filled(kspace):
    """RSS image of undersampled k-space with the missing samples left at zero."""
    data = kspace.data if isinstance(kspace, ComplexVolume) else np.asarray(kspace)
    return rss_combine(ifft2c(data), coil_axis=-3)


def volume_scale(kspace):
    """Intensity normaliser: the peak of the zero-filled RSS image of the volume."""
    peak = float(zero_filled(kspace).max())
    return peak if peak > 0 else 1.0


def network_inputs(cfg, kspace, scale=1.0):
    """Per-slice network inputs for a whole volume, shape ``(n_slices, in_channels, H, W)``.

    k-space kinds stack the ``2s + 1`` neighborhood of undersampled k-space;
    the image-domain baseline takes each slice's zero-filled coil images.
    """
    data = kspace.data if isinstance(kspace, ComplexVolume) else np.asarray(kspace)
    if data.ndim != 4:
        raise ShapeError(f"expected (slices, coils, H, W) k-space, got {data.shape}")
    if data.shape[1] != cfg.n_coils:
        raise ShapeError(f"model expects {cfg.n_coils} coils, volume has {data.shape[1]}")
    data = data / scale
    if cfg.kind == "image_unet":
        imgs = ifft2c(data)
        return np.stack([pack_channels([imgs[i]]) for i in range(data.shape[0])])
    return np.stack(
        [pack_channels(make_neighborhood(data, i, cfg.s)) for i in range(data.shape[0])]
    )


def output_images(cfg, out):
    """Differentiable map from network output channels to RSS magnitude images."""
    if cfg.kind == "image_unet":
        return F.rss(out)
    return F.rss(F.ifft2c_channels(out))


def loss_mse(recon, truth):
    """Mean squared pixel error between reconstruction and reference images."""
    if isinstance(recon, Tensor) or isinstance(truth, Tensor):
        return F.mse_loss(recon, truth)
    recon, truth = check_same_shape(recon, truth, ("recon", "truth"))
    return float(np.mean((np.asarray(recon, float) - np.asarray(truth, float)) ** 2))


def predict_batches(model, inputs, batch_size=16):
    """Eval-mode RSS images for a stack of network inputs."""
    was_training = model.training
    model.eval()
    try:
        outs = []
        for i in range(0, len(inputs), batch_size):
            out = model(Tensor(inputs[i : i + batch_size]))
            outs.append(output_images(model.cfg, out).data)
        return np.concatenate(outs)
    finally:
        model.train(was_training)


def reconstruct(model, undersampled, normalize=True, batch_size=16):
    """Reconstruct every slice of an undersampled k-space volume.

    Returns real RSS images of shape ``(n_slices, H, W)`` in the intensity units
    of the input.
    """
    scale = volume_scale(undersampled) if normalize else 1.0
    inputs = network_inputs(model.cfg, undersampled, scale)
    return predict_batches(model, inputs, batch_size) * scale


def input_channel_response(model, inputs, truth, normalize=True):
    """L1 norm of the loss gradient with respect to each input channel.

    ``inputs`` is ``(B, C, H, W)`` and ``truth`` the matching ``(B, H, W)``
    reference. With ``normalize`` the responses are divided by the maximum
    within each slice group (``2 * n_coils`` consecutive channels).
    """
    was_training = model.training
    model.eval()
    try:
        x = Tensor(np.asarray(inputs), requires_grad=True)
        loss = F.mse_loss(output_images(model.cfg, model(x)), Tensor(np.asarray(truth, x.dtype)))
        loss.backward()
    finally:
        model.train(was_training)
    resp = np.abs(x.grad).sum(axis=(0, 2, 3)).astype(np.float64)
    if normalize:
        resp = normalize_per_group(resp, model.cfg.out_channels)
    return resp


def normalize_per_group(resp, group):
    resp = np.asarray(resp, dtype=float).copy()
    for g in range(0, len(resp), group):
        peak = resp[g : g + group].max()
        if peak > 0:
            resp[g : g + group] /= peak
    return resp
