"""Shared desk-scale fixtures: toy networks, gradient checks and training runs."""

import time

import numpy as np

from acnn_kspace.autodiff import functional as F
from acnn_kspace.autodiff.gradcheck import grad_check
from acnn_kspace.autodiff.tensor import Tensor
from acnn_kspace.data import PhantomSpec, gen_phantom, split_dataset
from acnn_kspace.kspace import apply_mask, fft2c, ifft2c, rss_combine
from acnn_kspace.metrics import ssim
from acnn_kspace.network.models import ModelConfig, build_model
from acnn_kspace.network.pipeline import output_images, reconstruct, zero_filled
from acnn_kspace.network.training import TrainHyper, TrainingData, build_training_data, train
from acnn_kspace.sampling import make_cartesian_mask


def randomize(model, seed=0):
    """Give zero-initialised weights random values so every gradient is informative."""
    rng = np.random.default_rng(seed)
    for name, p in model.named_parameters().items():
        if name.endswith("gamma"):
            p.data = rng.uniform(0.5, 1.5, p.shape).astype(p.dtype)
        elif "channel.weight" in name:
            p.data = (0.01 * rng.standard_normal(p.shape)).astype(p.dtype)
        elif not np.any(p.data):
            p.data = (0.1 * rng.standard_normal(p.shape)).astype(p.dtype)
    return model


def toy_gradcheck(dtype=np.float64, epsilon=1e-4, mode="parallel", n_coords=20, seed=0, size=8, batch=4,
                  details=None, method="ridders"):
    """Worst finite-difference relative error per parameter of the full toy ACNN loss.

    Finite differences run with the branch decisions of the unperturbed pass
    frozen (see ``grad_check``); ``details`` receives per-tensor counts. For a
    float32 model they are taken on a float64 copy of the same weights: the
    channel-attention weights see the L1 squeeze of a whole feature map, and
    no float32 step is both above round-off and below truncation error there.
    """

    def setup(dt):
        cfg = ModelConfig.toy(kind="acnn", n_slices=3, n_coils=2, input_size=size, attention_mode=mode, seed=seed)
        model = randomize(build_model(cfg), seed).astype(np.float32).astype(dt)
        model.train()
        rng = np.random.default_rng(seed + 1)
        x = Tensor(rng.standard_normal((batch, cfg.in_channels, size, size)).astype(np.float32).astype(dt))
        truth = Tensor(rng.uniform(0, 1, (batch, size, size)).astype(np.float32).astype(dt))

        def loss_fn():
            return F.mse_loss(output_images(cfg, model(x)), truth).astype(np.float64)

        tensors = dict(model.named_parameters())
        tensors["input"] = x
        return loss_fn, tensors

    loss_fn, tensors = setup(dtype)
    reference = setup(np.float64) if np.dtype(dtype) != np.float64 else None
    return grad_check(loss_fn, tensors, epsilon=epsilon, n_coords=n_coords, seed=seed, details=details,
                      reference=reference, method=method)


def toy_corpus(seed, n_volumes=12, n_slices=8, size=64, n_coils=2):
    """Phantom k-space volumes, a 9/1/2 split and a Cartesian R=4 mask, all from ``seed``."""
    full = [
        fft2c(gen_phantom(PhantomSpec(n_slices, size, size, n_coils, seed=seed * 1000 + i)).data)
        for i in range(n_volumes)
    ]
    split = split_dataset(range(n_volumes), (0.75, 0.05, 0.2), seed=seed)
    mask = make_cartesian_mask(size, size, 4, seed=seed)
    under = [apply_mask(k, mask) for k in full]
    return full, under, split


def toy_experiment(seed, kind="acnn", s=1, epochs=30, corpus=None):
    """Train a toy model and score it on the held-out volumes against zero filling."""
    full, under, split = corpus or toy_corpus(seed)
    cfg = ModelConfig.toy(kind=kind, n_slices=2 * s + 1, n_coils=full[0].shape[1], seed=seed)
    model = build_model(cfg)
    tr = TrainingData.concat([build_training_data(cfg, full[i], under[i]) for i in split.train])
    va = TrainingData.concat([build_training_data(cfg, full[i], under[i]) for i in split.validation])
    result = train(model, tr, va, TrainHyper(batch_size=16, epochs=epochs, seed=seed))
    scores = {"model": [], "zero_filled": [], "nmse": []}
    t0 = time.perf_counter()
    for i in split.test:
        truth = rss_combine(ifft2c(full[i]), coil_axis=1)
        rec = reconstruct(model, under[i])
        zf = zero_filled(under[i])
        for r, z, t in zip(rec, zf, truth):
            scores["model"].append(ssim(r, t))
            scores["zero_filled"].append(ssim(z, t))
            scores["nmse"].append(float(np.sum((r - t) ** 2) / np.sum(t * t)))
    return {
        "ssim": float(np.mean(scores["model"])),
        "ssim_zero_filled": float(np.mean(scores["zero_filled"])),
        "nmse": float(np.mean(scores["nmse"])),
        "loss_trace": result.loss_trace,
        "train_seconds": result.seconds,
        "test_seconds": time.perf_counter() - t0,
        "model": model,
    }


def overfit_probe(seed=0, steps=400, lr=1e-4, batch=16):
    """Repeatedly fit one fixed batch; returns (initial loss, final loss, per-step losses)."""
    from acnn_kspace.autodiff.optim import AdamState
    from acnn_kspace.network.training import train_step

    full, under, split = toy_corpus(seed, n_volumes=2)
    cfg = ModelConfig.toy(kind="acnn", n_slices=3, n_coils=full[0].shape[1], seed=seed)
    model = build_model(cfg)
    data = TrainingData.concat([build_training_data(cfg, full[i], under[i]) for i in range(2)])
    x, y = data.inputs[:batch], data.truth[:batch]
    state = AdamState(lr=lr, weight_decay=1e-4)
    losses = [train_step(model, state, x, y) for _ in range(steps)]
    model.train()
    final = train_step(model, AdamState(lr=0.0, weight_decay=0.0), x, y)
    return losses[0], final, losses
