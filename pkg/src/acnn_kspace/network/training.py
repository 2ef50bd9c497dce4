"""Mini-batch Adam training of the reconstruction networks."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import functional as F
from ..autodiff.optim import AdamState, adam_step, lr_schedule
from ..autodiff.tensor import Tensor
from ..kspace import ifft2c, rss_combine
from ..validation import check_random_state
from .pipeline import network_inputs, output_images, predict_batches, volume_scale

logger = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    """The loss became non-finite; ``state`` holds the last good parameters."""

    def __init__(self, message, state, epoch):
        super().__init__(message)
        self.state = state
        self.epoch = epoch


@dataclass
class TrainingData:
    inputs: np.ndarray  # (N, C_in, H, W)
    truth: np.ndarray  # (N, H, W), same normalisation as inputs

    def __post_init__(self):
        if len(self.inputs) == 0:
            raise ValueError("training data is empty")
        if len(self.inputs) != len(self.truth):
            raise ValueError(f"{len(self.inputs)} inputs but {len(self.truth)} targets")

    def __len__(self):
        return len(self.inputs)

    @classmethod
    def concat(cls, parts):
        return cls(
            np.concatenate([p.inputs for p in parts]), np.concatenate([p.truth for p in parts])
        )


def build_training_data(cfg, full_kspace, undersampled):
    """Inputs from undersampled k-space, targets from the fully sampled RSS image.

    Both are divided by the peak of the volume's zero-filled image.
    """
    full = getattr(full_kspace, "data", full_kspace)
    under = getattr(undersampled, "data", undersampled)
    scale = volume_scale(under)
    inputs = network_inputs(cfg, under, scale)
    truth = (rss_combine(ifft2c(full), coil_axis=1) / scale).astype(np.float32)
    return TrainingData(inputs.astype(np.float32), truth)


@dataclass
class TrainHyper:
    batch_size: int = 16
    epochs: int = 30
    lr_start: float = 1e-4
    lr_end: float = 1e-5
    weight_decay: float = 1e-4
    seed: int = 0


@dataclass
class TrainResult:
    loss_trace: list = field(default_factory=list)  # dicts: epoch, train, validation
    epochs_completed: int = 0
    seconds: float = 0.0


def evaluate_loss(model, data, batch_size=16):
    """Eval-mode mean squared error over ``data``."""
    pred = predict_batches(model, data.inputs, batch_size)
    return float(np.mean((pred.astype(np.float64) - data.truth) ** 2))


def train_step(model, state, inputs, truth):
    model.zero_grad()
    out = model(Tensor(inputs))
    loss = F.mse_loss(output_images(model.cfg, out), Tensor(truth))
    value = float(loss.data)
    if not np.isfinite(value):
        return value
    loss.backward()
    adam_step(state, model.parameters())
    return value


def train(model, train_data, val_data=None, hyper=None, callback=None):
    """Minimise the image-domain MSE with Adam.

    The objective is a mean over pixels, i.e. already normalised by image size.
    Raises :class:`TrainingDiverged` (carrying the last good state) if a batch
    loss is not finite.
    """
    hyper = hyper or TrainHyper()
    rng = check_random_state(hyper.seed)
    state = AdamState(lr=hyper.lr_start, weight_decay=hyper.weight_decay)
    result = TrainResult()
    start = time.perf_counter()
    n = len(train_data)
    last_good = model.state_dict()
    last_good = {k: v.copy() for k, v in last_good.items()}

    for epoch in range(hyper.epochs):
        state.lr = lr_schedule(epoch, hyper.epochs, hyper.lr_start, hyper.lr_end)
        model.train()
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, hyper.batch_size):
            idx = np.sort(order[i : i + hyper.batch_size])
            value = train_step(model, state, train_data.inputs[idx], train_data.truth[idx])
            if not np.isfinite(value):
                model.load_state_dict(last_good)
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}; parameters restored to the last good epoch",
                    last_good,
                    epoch,
                )
            total += value * len(idx)
        row = {"epoch": epoch, "train": total / n}
        if val_data is not None:
            row["validation"] = evaluate_loss(model, val_data, hyper.batch_size)
        result.loss_trace.append(row)
        result.epochs_completed = epoch + 1
        last_good = {k: v.copy() for k, v in model.state_dict().items()}
        logger.info("epoch %d lr %.2e train %.6g val %s", epoch, state.lr, row["train"], row.get("validation"))
        if callback is not None:
            callback(row)
    result.seconds = time.perf_counter() - start
    model.eval()
    return result
