"""``acnn-kspace`` command line interface.

Verbs: gen-data, make-mask, train, reconstruct, evaluate, viz, ablate.
Global options ``--seed``, ``--config`` (flat key=value file) and ``--out``
come before the verb; flags given on the command line override file values.
Every command writes ``<verb>.config.txt`` with its resolved settings into
the output directory.
"""

import csv
import logging
import sys
import time
from pathlib import Path

import click
import numpy as np
from PIL import Image, ImageDraw

from .config import ConfigError, read_config, write_config
from .data import (
    DatasetSplit,
    PhantomSpec,
    VolumeFormatError,
    gen_phantom,
    read_volume,
    split_dataset,
    write_volume,
)
from .estimator import RadialUndersampler
from .kspace import IMAGE, KSPACE, ComplexVolume, apply_mask, fft2c, ifft2c, rss_combine
from .metrics import MetricsReport
from .network.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .network.models import ModelConfig, build_model, count_params
from .network.pipeline import input_channel_response, network_inputs, reconstruct, volume_scale, zero_filled
from .network.training import TrainHyper, TrainingData, TrainingDiverged, build_training_data, train
from .sampling import make_cartesian_mask, make_radial_trajectory, read_mask, write_mask
from .validation import ShapeError

logger = logging.getLogger("acnn_kspace")

ATTENTION_ROWS = ("none", "channel", "frequency", "both")


# ---------------------------------------------------------------- helpers


def _parse_ints(text, name):
    try:
        values = tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}", param_hint=name)
    if not values:
        raise click.BadParameter("empty list", param_hint=name)
    return values


def _out_dir(ctx):
    out = Path(ctx.obj["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _persist(ctx, extra=None):
    """Write the fully resolved settings of the running command beside its outputs."""
    out = _out_dir(ctx)
    values = dict(ctx.params)
    values.update(seed=ctx.obj["seed"], out=str(out), command=ctx.info_name)
    if ctx.obj.get("config"):
        values["config"] = ctx.obj["config"]
    values.update(extra or {})
    write_config(out / f"{ctx.info_name}.config.txt", values, header=f"resolved settings for {ctx.info_name}")
    return out


def _images(vol):
    """RSS magnitude images ``(S, H, W)`` of a k-space or image-domain volume."""
    img = vol.data if vol.domain == IMAGE else ifft2c(vol.data)
    return rss_combine(img, coil_axis=1).astype(np.float32)


def _image_volume(images):
    return ComplexVolume(np.asarray(images, dtype=np.complex64)[:, None], IMAGE)


def _undersample(full, sampling, mask=None, spokes=60, readout=None):
    """Undersampled k-space for one fully sampled k-space volume."""
    if sampling == "radial":
        regrid = RadialUndersampler(n_spokes=spokes, n_readout=readout).fit(full.data)
        return regrid.transform(full.data)[0]
    if mask is None:
        return full.data
    if mask.bits.shape != full.data.shape[-2:]:
        raise ShapeError(f"mask is {mask.bits.shape}, volume slices are {full.data.shape[-2:]}")
    return apply_mask(full.data, mask)


def _write_png(path, array):
    Image.fromarray(np.asarray(array, dtype=np.uint8), mode="L").save(path)


def _to_gray(values):
    """Map values in (0, 1) to 1..254 so no sigmoid output can reach black or white."""
    return (1 + np.rint(253 * np.clip(values, 0.0, 1.0))).astype(np.uint8)


# ---------------------------------------------------------------- data loading


class Dataset:
    """A directory written by ``gen-data``: ``<id>.kspv`` files plus ``split.txt``."""

    def __init__(self, root):
        self.root = Path(root)
        split_path = self.root / "split.txt"
        if not split_path.exists():
            raise FileNotFoundError(f"{split_path} not found (run gen-data first)")
        self.split = DatasetSplit.read(split_path)

    def load(self, ids):
        return {i: read_volume(self.root / f"{i}.kspv") for i in ids}


def _radial_cache(dataset, vols, spokes, readout):
    """Regridded k-space per volume, computed once and cached as KSPV files."""
    first = next(iter(vols.values()))
    readout = readout or first.width
    cache = dataset.root / "cache" / f"radial_s{spokes}_r{readout}"
    cache.mkdir(parents=True, exist_ok=True)
    out = {}
    for vid, vol in vols.items():
        path = cache / f"{vid}.kspv"
        if path.exists():
            out[vid] = read_volume(path).data
        else:
            out[vid] = _undersample(vol, "radial", spokes=spokes, readout=readout)
            write_volume(path, ComplexVolume(out[vid], KSPACE))
    return out


def _undersampled_set(dataset, vols, p, mask):
    if p["sampling"] == "radial":
        return _radial_cache(dataset, vols, p["spokes"], p["readout"])
    return {vid: _undersample(v, "cartesian", mask) for vid, v in vols.items()}


def _resolve_mask(p, seed, height, width):
    if p.get("mask"):
        return read_mask(p["mask"])
    mask_seed = p["mask_seed"] if p.get("mask_seed") is not None else seed
    return make_cartesian_mask(height, width, p["acceleration"], seed=mask_seed)


# ---------------------------------------------------------------- training core


def _model_config(p, seed, n_coils, size, s=None, layers=None, mode=None):
    kind = p["kind"]
    s = p["s"] if s is None else s
    layers = layers or p.get("ablate_attention")
    if kind != "acnn":
        layers = "none"
    return ModelConfig(
        kind=kind,
        n_slices=2 * s + 1,
        n_coils=n_coils,
        encoder_widths=_parse_ints(p["widths"], "widths"),
        bottleneck_width=p["bottleneck"],
        final_hidden_width=p["hidden"],
        attention_mode=mode or p["attention_mode"],
        attention_layers=layers,
        input_size=size,
        seed=seed,
    )


def _fit(p, seed, dataset, cfg, full, under):
    split = dataset.split
    n_slices = next(iter(full.values())).shape[0]
    if cfg.n_slices > n_slices:
        raise ShapeError(f"s={cfg.s} needs {cfg.n_slices} slices, volumes have {n_slices}")
    model = build_model(cfg)
    train_set = TrainingData.concat([build_training_data(cfg, full[i], under[i]) for i in split.train])
    val_set = None
    if split.validation:
        val_set = TrainingData.concat(
            [build_training_data(cfg, full[i], under[i]) for i in split.validation]
        )
    hyper = TrainHyper(p["batch_size"], p["epochs"], p["lr_start"], p["lr_end"], p["weight_decay"], seed)
    result = train(model, train_set, val_set, hyper)
    return model, result


def _load_all(dataset):
    split = dataset.split
    full = dataset.load(split.train + split.validation + split.test)
    if not full:
        raise ValueError(f"{dataset.root}: no volumes listed in split.txt")
    return full


def _write_loss_curve(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train", "validation"])
        for row in trace:
            val = row.get("validation")
            w.writerow([row["epoch"], repr(row["train"]), "" if val is None else repr(val)])


def training_options(f):
    opts = [
        click.option("--data", "data", required=True, type=click.Path(file_okay=False), help="gen-data output directory."),
        click.option("--kind", type=click.Choice(["acnn", "kspace_unet", "image_unet"]), default="acnn", show_default=True),
        click.option("--s", "s", type=int, default=1, show_default=True, help="Neighbor slices on each side."),
        click.option("--widths", default="16,32,64", show_default=True, help="Encoder widths."),
        click.option("--bottleneck", type=int, default=128, show_default=True),
        click.option("--hidden", type=int, default=8, show_default=True, help="Width of the final hidden conv."),
        click.option("--attention-mode", type=click.Choice(["parallel", "cf", "fc"]), default="parallel", show_default=True),
        click.option("--ablate-attention", type=click.Choice(ATTENTION_ROWS), default=None, help="Attention layers kept (acnn only; default both)."),
        click.option("--sampling", type=click.Choice(["cartesian", "radial"]), default="cartesian", show_default=True),
        click.option("--mask", type=click.Path(dir_okay=False), default=None, help="MSK1 mask file (cartesian)."),
        click.option("--acceleration", type=float, default=4.0, show_default=True, help="Used when no --mask is given."),
        click.option("--mask-seed", type=int, default=None, help="Seed of the generated mask (defaults to --seed)."),
        click.option("--spokes", type=int, default=60, show_default=True, help="Radial spokes."),
        click.option("--readout", type=int, default=None, help="Radial readout points (default: image size)."),
        click.option("--batch-size", type=int, default=16, show_default=True),
        click.option("--epochs", type=int, default=30, show_default=True),
        click.option("--lr-start", type=float, default=1e-4, show_default=True),
        click.option("--lr-end", type=float, default=1e-5, show_default=True),
        click.option("--weight-decay", type=float, default=1e-4, show_default=True),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


# ---------------------------------------------------------------- the CLI


def _category(exc):
    for cls, name in (
        (ShapeError, "shape mismatch"),
        (VolumeFormatError, "bad volume file"),
        (CheckpointError, "bad checkpoint"),
        (TrainingDiverged, "training diverged"),
        (ConfigError, "bad config"),
        (FileNotFoundError, "missing file"),
        (OSError, "i/o error"),
        (ValueError, "invalid value"),
    ):
        if isinstance(exc, cls):
            return name
    return "error"


@click.group()
@click.option("--seed", type=int, default=None, help="Global random seed (default 0).")
@click.option("--config", "config_path", type=click.Path(dir_okay=False, exists=True), default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory (default .).")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.pass_context
def cli(ctx, seed, config_path, out, verbose):
    """Attention-guided k-space reconstruction: data, training, evaluation."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    values = read_config(config_path) if config_path else {}
    known = {"seed", "out"}
    for cmd in cli.commands.values():
        known.update(p.name for p in cmd.params)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"{config_path}: unknown keys {', '.join(unknown)}")
    if seed is None:
        seed = int(values.pop("seed", 0))
    values.pop("seed", None)
    if out is None:
        out = values.pop("out", ".")
    values.pop("out", None)
    defaults = {k: v for k, v in values.items() if v != ""}
    ctx.default_map = {name: defaults for name in cli.commands}
    ctx.obj = {"seed": seed, "out": out, "config": config_path}


@cli.command("gen-data")
@click.option("--slices", type=int, default=8, show_default=True)
@click.option("--coils", type=int, default=2, show_default=True)
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--count", type=int, default=12, show_default=True)
@click.option("--ellipses", type=int, default=6, show_default=True)
@click.option("--drift", type=float, default=0.01, show_default=True, help="Per-slice geometric drift.")
@click.option("--fractions", default="0.75,0.05,0.2", show_default=True, help="train,validation,test shares.")
@click.pass_context
def gen_data(ctx, slices, coils, size, count, ellipses, drift, fractions):
    """Write COUNT phantom k-space volumes (KSPV) and a train/validation/test split."""
    seed = ctx.obj["seed"]
    out = _persist(ctx)
    ids = []
    for i in range(count):
        spec = PhantomSpec(slices, size, size, coils, ellipses, seed=seed * 100_003 + i, slice_drift=drift)
        vid = f"vol_{i:03d}"
        write_volume(out / f"{vid}.kspv", ComplexVolume(fft2c(gen_phantom(spec).data), KSPACE))
        ids.append(vid)
    shares = tuple(float(v) for v in fractions.split(","))
    split_dataset(ids, shares, seed=seed).write(out / "split.txt")
    click.echo(f"wrote {count} volumes ({slices}x{coils}x{size}x{size}) to {out}")


@cli.command("make-mask")
@click.option("--kind", type=click.Choice(["cartesian", "radial"]), default="cartesian", show_default=True)
@click.option("--size", type=int, default=64, show_default=True, help="Square size (overridden by --height/--width).")
@click.option("--height", type=int, default=None)
@click.option("--width", type=int, default=None)
@click.option("--acceleration", type=float, default=4.0, show_default=True)
@click.option("--spokes", type=int, default=60, show_default=True)
@click.option("--readout", type=int, default=None, help="Radial readout points (default: size).")
@click.pass_context
def make_mask(ctx, kind, size, height, width, acceleration, spokes, readout):
    """Write a Cartesian MSK1 mask, or the radial trajectory table (kx, ky per sample)."""
    seed = ctx.obj["seed"]
    out = _persist(ctx)
    if kind == "cartesian":
        mask = make_cartesian_mask(height or size, width or size, acceleration, seed=seed)
        write_mask(out / "mask.msk", mask)
        click.echo(f"mask.msk: {len(mask.lines)} of {mask.width} lines")
    else:
        traj = make_radial_trajectory(spokes, readout or size)
        np.savetxt(out / "trajectory.csv", traj.flat, delimiter=",", header="kx,ky", comments="")
        click.echo(f"trajectory.csv: {traj.n_spokes} spokes x {traj.n_readout} readout points")


@cli.command("train")
@training_options
@click.pass_context
def train_command(ctx, **p):
    """Train one model on the training split; writes model.ackp and loss_curve.csv."""
    seed = ctx.obj["seed"]
    dataset = Dataset(p["data"])
    full = _load_all(dataset)
    first = next(iter(full.values()))
    if first.height != first.width:
        raise ShapeError(f"volumes must be square, got {first.height}x{first.width}")
    mask = None if p["sampling"] == "radial" else _resolve_mask(p, seed, first.height, first.width)
    cfg = _model_config(p, seed, first.n_coils, first.height)
    out = _persist(ctx, {"n_coils": first.n_coils, "size": first.height, "attention_layers": cfg.attention_layers})
    if mask is not None:
        write_mask(out / "mask.msk", mask)
    under = _undersampled_set(dataset, full, p, mask)
    full_k = {k: v.data for k, v in full.items()}
    model, result = _fit(p, seed, dataset, cfg, full_k, under)
    save_checkpoint(out / "model.ackp", model, seed=seed, epoch=result.epochs_completed)
    _write_loss_curve(out / "loss_curve.csv", result.loss_trace)
    last = result.loss_trace[-1]
    click.echo(
        f"trained {cfg.kind} ({count_params(model)} params) for {result.epochs_completed} epochs "
        f"in {result.seconds:.1f}s; final train {last['train']:.4g} val {last.get('validation', float('nan')):.4g}"
    )


@cli.command("reconstruct")
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False, exists=True))
@click.option("--volume", required=True, type=click.Path(dir_okay=False, exists=True), help="k-space KSPV volume.")
@click.option("--sampling", type=click.Choice(["cartesian", "radial", "none"]), default="cartesian", show_default=True,
              help="'none' treats the volume as already undersampled.")
@click.option("--mask", type=click.Path(dir_okay=False, exists=True), default=None)
@click.option("--spokes", type=int, default=60, show_default=True)
@click.option("--readout", type=int, default=None)
@click.pass_context
def reconstruct_cmd(ctx, checkpoint, volume, sampling, mask, spokes, readout):
    """Write recon.kspv and zero_filled.kspv (RSS images as image-domain KSPV)."""
    ckpt = load_checkpoint(checkpoint)
    vol = read_volume(volume)
    if vol.domain != KSPACE:
        raise ValueError(f"{volume}: expected a k-space volume, got domain {vol.domain!r}")
    cfg = ckpt.config
    if vol.n_coils != cfg.n_coils or vol.height != cfg.input_size or vol.width != cfg.input_size:
        raise ShapeError(
            f"checkpoint expects {cfg.n_coils} coils at {cfg.input_size}x{cfg.input_size}, "
            f"volume is {vol.n_coils} coils at {vol.height}x{vol.width}"
        )
    if vol.n_slices < cfg.n_slices:
        raise ShapeError(f"checkpoint uses {cfg.n_slices} input slices, volume has {vol.n_slices}")
    if sampling == "cartesian" and mask is None:
        raise click.UsageError("--mask is required for cartesian sampling")
    m = read_mask(mask) if mask else None
    under = vol.data if sampling == "none" else _undersample(vol, sampling, m, spokes, readout)
    out = _persist(ctx)
    model = ckpt.build()
    write_volume(out / "recon.kspv", _image_volume(reconstruct(model, under)))
    write_volume(out / "zero_filled.kspv", _image_volume(zero_filled(under)))
    click.echo(f"wrote recon.kspv and zero_filled.kspv ({vol.n_slices} slices) to {out}")


@cli.command("evaluate")
@click.option("--truth", required=True, type=click.Path(dir_okay=False, exists=True),
              help="Reference volume (k-space or image domain).")
@click.option("--method", "methods", multiple=True, required=True, metavar="NAME=PATH",
              help="A reconstruction to score; repeatable.")
@click.option("--reference", default=None, help="Method the others are tested against (default: the last).")
@click.pass_context
def evaluate_cmd(ctx, truth, methods, reference):
    """Per-slice SSIM/PSNR/NMSE, mean +- std and rank-sum p-values (metrics.csv)."""
    ref_img = _images(read_volume(truth))
    report = MetricsReport()
    names = []
    for item in methods:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise click.BadParameter(f"expected NAME=PATH, got {item!r}", param_hint="--method")
        img = _images(read_volume(path))
        if img.shape != ref_img.shape:
            raise ShapeError(f"{name}: images {img.shape} vs truth {ref_img.shape}")
        report.add(name, img, ref_img)
        names.append(name)
    reference = reference or names[-1]
    if reference not in names:
        raise click.BadParameter(f"{reference!r} is not one of {names}", param_hint="--reference")
    for name in names:
        if name != reference:
            report.compare(name, reference)
    out = _persist(ctx)
    report.write(out / "metrics.csv")
    for name in names:
        agg = report.aggregate(name)
        click.echo(f"{name}: SSIM {agg['ssim'][0]:.4f} +- {agg['ssim'][1]:.4f}  "
                   f"NMSE {agg['nmse'][0]:.4g}  PSNR {agg['psnr'][0]:.2f} dB")


@cli.command("viz")
@click.option("--what", type=click.Choice(["attention", "response", "difference", "loss"]), required=True)
@click.option("--checkpoint", type=click.Path(dir_okay=False), default=None)
@click.option("--volume", type=click.Path(dir_okay=False), default=None, help="Fully sampled k-space volume.")
@click.option("--mask", type=click.Path(dir_okay=False), default=None)
@click.option("--slice", "slice_index", type=int, default=None, help="Slice to visualize (default: middle).")
@click.option("--recon", type=click.Path(dir_okay=False), default=None, help="Reconstruction (difference).")
@click.option("--truth", type=click.Path(dir_okay=False), default=None, help="Reference (difference).")
@click.option("--gain", type=float, default=5.0, show_default=True, help="Difference amplification.")
@click.option("--loss-curve", type=click.Path(dir_okay=False), default=None, help="loss_curve.csv from train.")
@click.pass_context
def viz_cmd(ctx, what, checkpoint, volume, mask, slice_index, recon, truth, gain, loss_curve):
    """Attention-map PNGs, channel-response table, amplified difference images, loss curves."""
    if what in ("attention", "response"):
        for name, value in (("--checkpoint", checkpoint), ("--volume", volume)):
            if not value:
                raise click.UsageError(f"{name} is required for --what {what}")
        ckpt = load_checkpoint(checkpoint)
        model = ckpt.build()
        vol = read_volume(volume)
        under = _undersample(vol, "cartesian", read_mask(mask) if mask else None)
        idx = vol.n_slices // 2 if slice_index is None else slice_index
        if not 0 <= idx < vol.n_slices:
            raise ValueError(f"slice {idx} out of range for {vol.n_slices} slices")
        scale = volume_scale(under)
        inputs = network_inputs(model.cfg, under, scale)[idx : idx + 1]
        out = _persist(ctx)
        if what == "attention":
            _viz_attention(model, inputs, out)
        else:
            truth_img = _images(vol)[idx : idx + 1] / scale
            _viz_response(model, inputs, truth_img, out)
    elif what == "difference":
        if not recon or not truth:
            raise click.UsageError("--recon and --truth are required for --what difference")
        a, b = _images(read_volume(recon)), _images(read_volume(truth))
        if a.shape != b.shape:
            raise ShapeError(f"recon {a.shape} vs truth {b.shape}")
        out = _persist(ctx)
        peak = float(b.max()) or 1.0
        slices = range(len(a)) if slice_index is None else [slice_index]
        for i in slices:
            diff = np.clip(gain * np.abs(a[i] - b[i]) / peak, 0, 1)
            _write_png(out / f"difference_{i:03d}.png", np.rint(255 * diff))
        click.echo(f"wrote {len(slices)} difference images (gain {gain:g}) to {out}")
    else:
        if not loss_curve:
            raise click.UsageError("--loss-curve is required for --what loss")
        rows = list(csv.DictReader(open(loss_curve, encoding="utf-8")))
        if not rows:
            raise ValueError(f"{loss_curve}: no rows")
        out = _persist(ctx)
        _viz_loss(rows, out)


def _viz_attention(model, inputs, out):
    from .autodiff.tensor import Tensor

    model.eval()
    model(Tensor(inputs))
    count = 0
    names = [f"encoder_{i}" for i in range(len(model.enc_att))] + [f"decoder_{i}" for i in range(len(model.up_att))]
    for name, block in zip(names, model.enc_att + model.up_att):
        if block is None or block.frequency is None or block.frequency.last_map is None:
            continue
        _write_png(out / f"attention_{name}.png", _to_gray(block.frequency.last_map[0]))
        count += 1
    if count == 0:
        raise ValueError("model has no frequency-attention layers")
    click.echo(f"wrote {count} frequency-attention maps to {out}")


def _viz_response(model, inputs, truth, out):
    cfg = model.cfg
    resp = input_channel_response(model, inputs, truth)
    per_slice = 1 if cfg.kind == "image_unet" else cfg.n_slices
    with open(out / "response.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "slice_offset", "coil", "part", "response"])
        for c, r in enumerate(resp):
            slice_pos, rest = divmod(c, 2 * cfg.n_coils)
            coil, part = divmod(rest, 2)
            offset = slice_pos - (per_slice - 1) // 2
            w.writerow([c, offset, coil, "re" if part == 0 else "im", repr(float(r))])
    click.echo(f"wrote response.csv ({len(resp)} channels) to {out}")


def _viz_loss(rows, out, width=480, height=320, margin=40):
    epochs = np.array([float(r["epoch"]) for r in rows])
    series = {"train": (0, 0, 0)}
    if rows[0].get("validation"):
        series["validation"] = (160, 160, 160)
    img = Image.new("L", (width, height), 255)
    draw = ImageDraw.Draw(img)
    values = {k: np.log10(np.array([float(r[k]) for r in rows])) for k in series}
    lo = min(v.min() for v in values.values())
    hi = max(v.max() for v in values.values())
    span = (hi - lo) or 1.0
    x = margin + (epochs - epochs.min()) / max(np.ptp(epochs), 1) * (width - 2 * margin)
    draw.rectangle([margin, margin, width - margin, height - margin], outline=0)
    for k, color in series.items():
        y = height - margin - (values[k] - lo) / span * (height - 2 * margin)
        draw.line(list(zip(x.tolist(), y.tolist())), fill=color[0], width=2)
    draw.text((margin, 8), "log10 loss per pixel vs epoch (black: train, grey: validation)", fill=0)
    img.save(out / "loss_curve.png")
    with open(out / "loss_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train", "validation"])
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in ("epoch", "train", "validation")})
    click.echo(f"wrote loss_curve.png and loss_curve.csv to {out}")


@cli.command("ablate")
@training_options
@click.option("--axis", type=click.Choice(["slices", "attention", "mode"]), default="slices", show_default=True)
@click.option("--values", "values_", default="1,3", show_default=True,
              help="s values, attention layers (none,channel,frequency,both) or modes (parallel,cf,fc).")
@click.pass_context
def ablate_cmd(ctx, axis, values_, **p):
    """Train and test one model per setting under identical seeds (ablation.csv, metrics.csv)."""
    seed = ctx.obj["seed"]
    values = [v.strip() for v in values_.split(",") if v.strip()]
    if axis == "slices":
        values = list(_parse_ints(values_, "--values"))
    else:
        allowed = ATTENTION_ROWS if axis == "attention" else ("parallel", "cf", "fc")
        bad = [v for v in values if v not in allowed]
        if bad:
            raise click.BadParameter(f"{bad} not in {allowed}", param_hint="--values")
        if p["kind"] != "acnn":
            raise click.BadParameter("attention ablations need --kind acnn", param_hint="--axis")
    dataset = Dataset(p["data"])
    full = _load_all(dataset)
    first = next(iter(full.values()))
    if axis == "slices" and 2 * max(values) + 1 > first.n_slices:
        raise ShapeError(f"s={max(values)} needs {2 * max(values) + 1} slices, volumes have {first.n_slices}")
    if not dataset.split.test:
        raise ValueError("the split has no test volumes")
    mask = None if p["sampling"] == "radial" else _resolve_mask(p, seed, first.height, first.width)
    out = _persist(ctx)
    under = _undersampled_set(dataset, full, p, mask)
    full_k = {k: v.data for k, v in full.items()}
    truth = {i: _images(full[i]) for i in dataset.split.test}

    report = MetricsReport()
    rows = []
    for v in values:
        label = f"{axis}={v}"
        kw = {"slices": {"s": v}, "attention": {"layers": v}, "mode": {"mode": v}}[axis]
        cfg = _model_config(p, seed, first.n_coils, first.height, **kw)
        model, result = _fit(p, seed, dataset, cfg, full_k, under)
        t0 = time.perf_counter()
        for i in dataset.split.test:
            report.add(label, reconstruct(model, under[i]), truth[i])
        test_time = (time.perf_counter() - t0) / len(dataset.split.test)
        rows.append((label, count_params(model), result.seconds, test_time))
    base = rows[0][0]
    for label, *_ in rows[1:]:
        report.compare(label, base)
    report.write(out / "metrics.csv")
    b = report.aggregate(base)
    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["setting", "params", "ssim_mean", "ssim_std", "nmse_mean", "nmse_std", "psnr_mean",
                    "psnr_std", "delta_ssim", "delta_nmse", "delta_psnr", "train_seconds", "test_seconds_per_case"])
        for label, n_params, train_s, test_s in rows:
            a = report.aggregate(label)
            w.writerow([label, n_params] + [repr(a[m][j]) for m in ("ssim", "nmse", "psnr") for j in (0, 1)]
                       + [repr(a[m][0] - b[m][0]) for m in ("ssim", "nmse", "psnr")]
                       + [f"{train_s:.3f}", f"{test_s:.3f}"])
            click.echo(f"{label}: SSIM {a['ssim'][0]:.4f} NMSE {a['nmse'][0]:.4g} train {train_s:.1f}s")


def main(argv=None):
    """Console entry point: exit 0 on success, 1 with a one-line diagnostic otherwise."""
    try:
        cli.main(args=argv, prog_name="acnn-kspace", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("error: aborted", err=True)
        return 1
    except click.UsageError as exc:
        click.echo(f"error: usage: {exc.format_message()}", err=True)
        return 2
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except Exception as exc:
        message = " ".join(str(exc).split())
        click.echo(f"error: {_category(exc)}: {message}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
