"""Dataset index, balanced CT/MR batch sampling, training loop and ensemble prediction."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import augment
from .config import TrainConfig, format_config
from .errors import ConfigError, ManifestError, SamplingError, TrainingError
from .interp import Interp
from .model import (
    AdamState,
    Checkpoint,
    ModelParams,
    adam_step,
    ema_update,
    grad,
    he_init,
    load_checkpoint,
    save_checkpoint,
    unet_forward,
)
from .postprocess import largest_cc_filter
from .preprocess import (
    Modality,
    crop_to_cube,
    detect_modality,
    foreground_center,
    image_center,
    normalize,
    resample,
    uncrop_from_cube,
)
from .randconv import randconv_augment
from .volume_io import LabelMap, Volume3, read_volume

log = logging.getLogger(__name__)

CT_CENTERS = ("A", "B")
MR_CENTERS = ("C&D", "E")
CHECKPOINT_NAME = "model.ckpt"


@dataclass(frozen=True)
class Sample:
    image: Path
    labels: Path | None
    modality: Modality
    center: str


@dataclass
class DatasetIndex:
    entries: list[Sample] = field(default_factory=list)

    @property
    def ct_pool(self) -> list[Sample]:
        return [e for e in self.entries if e.modality is Modality.CT]

    @property
    def mr_pool(self) -> list[Sample]:
        return [e for e in self.entries if e.modality is Modality.MR]

    def counts(self) -> dict[str, int]:
        out = {c: 0 for c in CT_CENTERS + MR_CENTERS}
        for e in self.entries:
            out[e.center] += 1
        return out


def build_index(manifest) -> DatasetIndex:
    """Parse a ``image<TAB>labels<TAB>modality<TAB>center`` manifest.

    Relative paths resolve against the manifest's directory; ``-`` in the
    label column marks an unlabeled sample.
    """
    manifest = Path(manifest)
    base = manifest.parent
    entries = []
    for lineno, line in enumerate(manifest.read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ManifestError(f"{manifest}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        image, labels, modality, center = (p.strip() for p in parts)
        try:
            modality = Modality.parse(modality)
        except ValueError:
            raise ManifestError(f"{manifest}:{lineno}: unknown modality {modality!r}") from None
        allowed = CT_CENTERS if modality is Modality.CT else MR_CENTERS
        if center not in allowed:
            raise ManifestError(
                f"{manifest}:{lineno}: center {center!r} is not a {modality.value} center {allowed}"
            )
        image_path = base / image
        label_path = None if labels == "-" else base / labels
        for p in (image_path, label_path):
            if p is not None and not p.is_file():
                raise FileNotFoundError(f"{manifest}:{lineno}: missing file {p}")
        entries.append(Sample(image_path, label_path, modality, center))
    if not entries:
        raise ManifestError(f"{manifest}: manifest is empty")
    index = DatasetIndex(entries)
    log.info("indexed %s", ", ".join(f"{c}: {n}" for c, n in index.counts().items()))
    return index


def sample_joint_batch(index: DatasetIndex, rng: np.random.Generator) -> tuple[Sample, Sample]:
    """One uniformly drawn CT sample and one uniformly drawn MR sample."""
    ct, mr = index.ct_pool, index.mr_pool
    if not ct or not mr:
        raise SamplingError(f"need both modalities, have {len(ct)} CT and {len(mr)} MR samples")
    return ct[int(rng.integers(len(ct)))], mr[int(rng.integers(len(mr)))]


def prepare_training_sample(image: Volume3, labels: LabelMap, modality: Modality,
                            target_spacing: float, crop: int) -> tuple[Volume3, LabelMap]:
    """Resample, crop a cube around the label centroid, normalize."""
    image = resample(image, target_spacing, Interp.TRILINEAR)
    labels = resample(labels, target_spacing, Interp.NEAREST, dims=image.dims)
    center = foreground_center(labels)
    image = crop_to_cube(image, center, crop, fill=float(image.data.min()))
    labels = crop_to_cube(labels, center, crop, fill=0)
    return normalize(image, modality), labels


def augment_sample(image: Volume3, labels: LabelMap, modality: Modality, cfg: TrainConfig,
                   rng: np.random.Generator) -> tuple[Volume3, LabelMap]:
    """Spatial warp of image and labels, intensity augmentation, then RandConv."""
    disp = augment.sample_spatial(cfg.spatial, image.dims, rng)
    image = augment.apply_field(image, disp, Interp.TRILINEAR, fill=float(image.data.min()))
    labels = augment.apply_field(labels, disp, Interp.NEAREST, fill=0)
    params = augment.sample_intensity(modality, np.unique(labels.data), rng, cfg.intensity)
    image = augment.apply_intensity(image, labels, params)
    image = randconv_augment(image, rng, cfg.randconv_prob)
    return image, labels


@dataclass
class TrainResult:
    params: ModelParams
    adam: AdamState
    losses: list[float]
    checkpoint: Path | None = None


def checkpoint_meta(cfg: TrainConfig) -> dict[str, object]:
    return {
        "target_spacing": cfg.target_spacing,
        "train_crop": cfg.train_crop,
        "infer_crop": cfg.infer_crop,
        "seed": cfg.seed,
        "iterations": cfg.iterations,
    }


def load_training_set(index: DatasetIndex, cfg: TrainConfig) -> dict[Sample, tuple[Volume3, LabelMap]]:
    cache = {}
    for entry in index.entries:
        if entry.labels is None:
            raise ManifestError(f"training sample {entry.image} has no label map")
        image, labels = read_volume(entry.image), read_volume(entry.labels)
        if not isinstance(labels, LabelMap):
            raise ManifestError(f"{entry.labels} is not a UInt8 label map")
        cache[entry] = prepare_training_sample(image, labels, entry.modality,
                                               cfg.target_spacing, cfg.train_crop)
    return cache


def train(cfg: TrainConfig, index: DatasetIndex, out_dir=None, data=None) -> TrainResult:
    """Run ``cfg.iterations`` balanced joint-training steps.

    ``data`` may supply already-prepared ``{sample: (image, labels)}`` pairs;
    otherwise every indexed file is read and preprocessed once up front.
    With ``out_dir`` set, ``model.ckpt`` (raw + EMA weights + Adam state) is
    written every ``checkpoint_every`` iterations and at the end, and the
    loss trace goes to ``loss.tsv``.
    """
    if not index.ct_pool or not index.mr_pool:
        raise ManifestError("training needs at least one CT and one MR sample")
    rng = np.random.default_rng(cfg.seed)
    data = data if data is not None else load_training_set(index, cfg)
    params = he_init(cfg.net, rng)
    adam = AdamState.zeros_like(params)
    losses = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "train.cfg").write_text(format_config(cfg))
    meta = checkpoint_meta(cfg)

    for it in range(1, cfg.iterations + 1):
        ct_entry, mr_entry = sample_joint_batch(index, rng)
        assert ct_entry.modality is Modality.CT and mr_entry.modality is Modality.MR
        batch = []
        for entry in (ct_entry, mr_entry):
            image, labels = data[entry]
            batch.append(augment_sample(image, labels, entry.modality, cfg, rng))
        grads, loss = grad(params, batch, rng)
        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingError(
                f"non-finite loss/gradient at iteration {it} (loss={loss}, "
                f"samples {ct_entry.image.name}, {mr_entry.image.name})"
            )
        adam_step(params, grads, adam, cfg.learning_rate)
        ema_update(params, cfg.ema_decay)
        losses.append(loss)
        if it % 50 == 0 or it == 1:
            log.info("iteration %d/%d loss %.5f", it, cfg.iterations, loss)
        if out is not None and cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
            save_checkpoint(out / CHECKPOINT_NAME, params, adam, meta)

    path = None
    if out is not None:
        path = out / CHECKPOINT_NAME
        save_checkpoint(path, params, adam, meta)
        with open(out / "loss.tsv", "w") as f:
            f.write("iteration\tloss\n")
            f.writelines(f"{i}\t{l!r}\n" for i, l in enumerate(losses, 1))
    return TrainResult(params, adam, losses, path)


@dataclass
class Prediction:
    """Averaged class probabilities ``(classes, X, Y, Z)`` on the network's crop grid."""

    probs: np.ndarray
    spacing: tuple[float, float, float]

    def argmax(self) -> LabelMap:
        return LabelMap(np.argmax(self.probs, axis=0).astype(np.uint8), self.spacing)


def _load_all(checkpoints) -> list[Checkpoint]:
    items = []
    for c in checkpoints:
        items.append(c if isinstance(c, Checkpoint) else load_checkpoint(c))
    return items


def ensemble_mean(prob_maps: list[np.ndarray]) -> np.ndarray:
    """Voxelwise mean whose bits do not depend on the order of ``prob_maps``."""
    stacked = np.sort(np.stack(prob_maps), axis=0)
    return stacked.sum(axis=0, dtype=np.float64).astype(np.float32) / np.float32(len(prob_maps))


def predict_ensemble(checkpoints, vol: Volume3, modality: Modality | None = None,
                     infer_crop: int | None = None, target_spacing: float | None = None,
                     postprocess: bool = True) -> tuple[LabelMap, Prediction]:
    """Segment ``vol`` with the EMA weights of every checkpoint, averaging probabilities.

    Returns the label map on the input grid and the averaged prediction on
    the cropped network grid.
    """
    if not checkpoints:
        raise ConfigError("need at least one checkpoint")
    if all(isinstance(c, (str, Path)) for c in checkpoints):
        checkpoints = sorted(checkpoints, key=str)
    models = _load_all(checkpoints)
    net_cfg = models[0].params.config
    for m in models[1:]:
        if m.params.config != net_cfg:
            raise ConfigError("checkpoints have incompatible network configurations")
    meta = models[0].meta
    infer_crop = int(infer_crop or meta.get("infer_crop", 192))
    target_spacing = float(target_spacing or meta.get("target_spacing", 1.5))
    modality = Modality(modality) if modality is not None else detect_modality(vol)

    rs = resample(vol, target_spacing, Interp.TRILINEAR)
    center = image_center(rs)
    crop = crop_to_cube(rs, center, infer_crop, fill=float(rs.data.min()))
    crop = normalize(crop, modality)

    maps = [unet_forward(m.params.ema_view(), crop, training=False) for m in models]
    pred = Prediction(ensemble_mean(maps), crop.spacing)
    labels = pred.argmax()
    if postprocess:
        labels = largest_cc_filter(labels)
    full = uncrop_from_cube(labels, center, rs.dims, fill=0)
    back = resample(full, vol.spacing, Interp.NEAREST, dims=vol.dims)
    return back, pred
