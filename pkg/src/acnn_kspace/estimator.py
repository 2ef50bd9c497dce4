"""scikit-learn style front end: undersampling transformers and the reconstructor.

``X`` is always a volume or a list of volumes: :class:`ComplexVolume` objects
or complex arrays of shape ``(n_slices, n_coils, H, W)`` in k-space. Targets
``y`` are real RSS images ``(n_slices, H, W)``.

>>> pipe = make_pipeline(CartesianUndersampler(acceleration=4), ACNNReconstructor(epochs=5))
>>> pipe.fit(full_kspace_volumes, truth_images)  # doctest: +SKIP
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .kspace import ComplexVolume, apply_mask, ifft2c
from .metrics import ssim
from .network.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .network.models import ModelConfig, build_model, count_params
from .network.pipeline import reconstruct, volume_scale, zero_filled
from .network.training import TrainHyper, TrainingData, build_training_data, train
from .sampling import GriddingConfig, NufftPlan, grid_radial, make_cartesian_mask, make_radial_trajectory
from .validation import ShapeError, check_finite


def check_volumes(X, name="X"):
    """Normalise ``X`` to a list of 4D complex arrays."""
    if isinstance(X, ComplexVolume) or (isinstance(X, np.ndarray) and X.ndim == 4):
        X = [X]
    out = []
    for i, v in enumerate(X):
        a = v.data if isinstance(v, ComplexVolume) else np.asarray(v)
        if a.ndim != 4:
            raise ShapeError(f"{name}[{i}] must be (slices, coils, H, W), got {a.shape}")
        out.append(check_finite(a, f"{name}[{i}]"))
    if not out:
        raise ValueError(f"{name} is empty")
    return out


def check_images(y, n, name="y"):
    if isinstance(y, np.ndarray) and y.ndim == 3:
        y = [y]
    y = [check_finite(np.asarray(v, dtype=np.float32), f"{name}[{i}]") for i, v in enumerate(y)]
    if len(y) != n:
        raise ValueError(f"{name} has {len(y)} volumes but X has {n}")
    return y


class CartesianUndersampler(TransformerMixin, BaseEstimator):
    """Keep a random Gaussian subset of phase-encode lines (columns)."""

    def __init__(self, acceleration=4, random_state=0):
        self.acceleration = acceleration
        self.random_state = random_state

    def fit(self, X, y=None):
        vols = check_volumes(X)
        _, _, h, w = vols[0].shape
        self.mask_ = make_cartesian_mask(h, w, self.acceleration, seed=self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "mask_")
        return [apply_mask(v, self.mask_) for v in check_volumes(X)]


class RadialUndersampler(TransformerMixin, BaseEstimator):
    """Simulate a radial acquisition (NUFFT) and regrid it onto the Cartesian grid."""

    def __init__(self, n_spokes=60, n_readout=None, kernel_width=5.0, oversampling=2.0):
        self.n_spokes = n_spokes
        self.n_readout = n_readout
        self.kernel_width = kernel_width
        self.oversampling = oversampling

    def fit(self, X, y=None):
        vols = check_volumes(X)
        _, _, h, w = vols[0].shape
        if h != w:
            raise ShapeError(f"radial regridding needs square k-space, got {h}x{w}")
        self.gridding_ = GriddingConfig(self.kernel_width, self.oversampling, target_size=h)
        self.trajectory_ = make_radial_trajectory(self.n_spokes, self.n_readout or h)
        self.plan_ = NufftPlan(self.trajectory_, h, self.gridding_)
        return self

    def transform(self, X):
        check_is_fitted(self, "plan_")
        out = []
        for v in check_volumes(X):
            samples = self.plan_.forward(ifft2c(v))
            out.append(grid_radial(samples, self.trajectory_, self.gridding_, plan=self.plan_).data)
        return out


class ACNNReconstructor(RegressorMixin, BaseEstimator):
    """Residual k-space interpolation network (or one of its U-Net baselines).

    Parameters
    ----------
    kind : {"acnn", "kspace_unet", "image_unet"}
    n_neighbors : int
        ``s``; each slice is reconstructed from ``2s + 1`` adjacent slices.
    encoder_widths, bottleneck_width, final_hidden_width
        Backbone widths. The defaults are the desk-scale toy network.
    attention_mode : {"parallel", "cf", "fc"}
    attention_layers : {"both", "channel", "frequency", "none"} or None
    batch_size, epochs, lr_start, lr_end, weight_decay
        Adam settings; the learning rate decays geometrically per epoch.
    random_state : int
        Seeds weight initialisation and batch order.
    """

    def __init__(
        self,
        kind="acnn",
        n_neighbors=1,
        encoder_widths=(16, 32, 64),
        bottleneck_width=128,
        final_hidden_width=8,
        attention_mode="parallel",
        attention_layers=None,
        batch_size=16,
        epochs=30,
        lr_start=1e-4,
        lr_end=1e-5,
        weight_decay=1e-4,
        random_state=0,
    ):
        self.kind = kind
        self.n_neighbors = n_neighbors
        self.encoder_widths = encoder_widths
        self.bottleneck_width = bottleneck_width
        self.final_hidden_width = final_hidden_width
        self.attention_mode = attention_mode
        self.attention_layers = attention_layers
        self.batch_size = batch_size
        self.epochs = epochs
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.weight_decay = weight_decay
        self.random_state = random_state

    def _make_config(self, n_coils, size):
        layers = self.attention_layers
        if layers is None and self.kind != "acnn":
            layers = "none"
        return ModelConfig(
            kind=self.kind,
            n_slices=2 * self.n_neighbors + 1,
            n_coils=n_coils,
            encoder_widths=tuple(self.encoder_widths),
            bottleneck_width=self.bottleneck_width,
            final_hidden_width=self.final_hidden_width,
            attention_mode=self.attention_mode,
            attention_layers=layers,
            input_size=size,
            seed=self.random_state,
        )

    def _dataset(self, X, y):
        vols = check_volumes(X)
        imgs = check_images(y, len(vols))
        parts = []
        for v, t in zip(vols, imgs):
            if t.shape != (v.shape[0],) + v.shape[2:]:
                raise ShapeError(f"target shape {t.shape} does not match volume {v.shape}")
            data = build_training_data(self.config_, v, v)  # inputs only
            scale = volume_scale(v)
            parts.append(TrainingData(data.inputs, (t / scale).astype(np.float32)))
        return TrainingData.concat(parts)

    def fit(self, X, y, X_val=None, y_val=None):
        vols = check_volumes(X)
        _, n_coils, h, w = vols[0].shape
        if h != w:
            raise ShapeError(f"network input must be square, got {h}x{w}")
        self.config_ = self._make_config(n_coils, h)
        self.model_ = build_model(self.config_)
        train_set = self._dataset(vols, y)
        val_set = self._dataset(X_val, y_val) if X_val is not None else None
        hyper = TrainHyper(
            self.batch_size, self.epochs, self.lr_start, self.lr_end, self.weight_decay, self.random_state
        )
        result = train(self.model_, train_set, val_set, hyper)
        self.loss_curve_ = result.loss_trace
        self.train_seconds_ = result.seconds
        self.n_params_ = count_params(self.model_)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return [reconstruct(self.model_, v) for v in check_volumes(X)]

    def score(self, X, y, sample_weight=None):
        """Mean global SSIM over all slices."""
        preds = self.predict(X)
        imgs = check_images(y, len(preds))
        return float(np.mean([ssim(p, t) for P, T in zip(preds, imgs) for p, t in zip(P, T)]))

    def save(self, path):
        check_is_fitted(self, "model_")
        save_checkpoint(path, self.model_, seed=self.random_state, epoch=len(self.loss_curve_))

    @classmethod
    def from_checkpoint(cls, path):
        ckpt = path if isinstance(path, Checkpoint) else load_checkpoint(path)
        cfg = ckpt.config
        est = cls(
            kind=cfg.kind,
            n_neighbors=cfg.s,
            encoder_widths=cfg.encoder_widths,
            bottleneck_width=cfg.bottleneck_width,
            final_hidden_width=cfg.final_hidden_width,
            attention_mode=cfg.attention_mode,
            attention_layers=cfg.attention_layers,
            random_state=ckpt.seed,
        )
        est.config_ = cfg
        est.model_ = ckpt.build()
        est.loss_curve_ = []
        est.n_params_ = count_params(est.model_)
        return est


def zero_filled_images(X):
    return [zero_filled(v) for v in check_volumes(X)]
