"""Export MVTec-AD-layout image folders into engine-ready feature files.

Expected dataset layout under ``<root>/<category>``:

    train/good/*.png            normal training images
    test/good/*.png             normal test images
    test/<defect>/*.png         anomalous test images
    ground_truth/<defect>/<stem>_mask.png

Each image yields one tensor file per exported hierarchy level containing
the raw stage output in (H, W, C) order, before any neighborhood
aggregation, so the engine can sweep its own aggregation settings without
re-exporting. Masks are converted to 8-bit PGM after the same resize and
center crop as the image. Manifests use the engine's JSON schema and
record the preprocessing constants.
"""

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image

from .backbone import extract_levels, load_backbone
from .tensorio import write_mask_pgm, write_tensor

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass
class ExportJob:
    dataset_root: str
    category: str
    out_dir: str
    backbone: str = "wide_resnet50_2"
    weights: str = "imagenet"
    levels: tuple = (2, 3)
    image_size: int = 256     # resize shorter side, then center crop
    seed: int = 0
    force: bool = False


@dataclass
class ExportReport:
    written: int = 0
    skipped: int = 0
    errors: list = field(default_factory=list)

    def ok(self):
        return not self.errors


def _list_images(folder):
    if not os.path.isdir(folder):
        return []
    return sorted(
        f for f in os.listdir(folder)
        if f.lower().endswith(IMAGE_EXTENSIONS)
    )


def _resize_center_crop(img, size, resample):
    w, h = img.size
    scale = size / min(w, h)
    img = img.resize(
        (max(size, round(w * scale)), max(size, round(h * scale))), resample
    )
    w, h = img.size
    left = (w - size) // 2
    top = (h - size) // 2
    return img.crop((left, top, left + size, top + size))


def _load_image_tensor(path, size):
    img = Image.open(path).convert("RGB")
    img = _resize_center_crop(img, size, Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - np.asarray(IMAGENET_MEAN, dtype=np.float32)) / np.asarray(
        IMAGENET_STD, dtype=np.float32
    )
    return torch.from_numpy(arr.transpose(2, 0, 1))[None, :]


def _load_mask(path, size):
    img = Image.open(path).convert("L")
    img = _resize_center_crop(img, size, Image.NEAREST)
    return np.asarray(img)


def _find_mask(root, category, defect, stem):
    folder = os.path.join(root, category, "ground_truth", defect)
    for cand in (f"{stem}_mask.png", f"{stem}.png"):
        path = os.path.join(folder, cand)
        if os.path.isfile(path):
            return path
    return None


def export(job):
    """Run the export; returns (train_manifest, test_manifest, report)."""
    category_dir = os.path.join(job.dataset_root, job.category)
    if not os.path.isdir(category_dir):
        raise FileNotFoundError(f"category folder not found: {category_dir}")
    os.makedirs(job.out_dir, exist_ok=True)
    tensors_dir = os.path.join(job.out_dir, "tensors")
    masks_dir = os.path.join(job.out_dir, "masks")
    os.makedirs(tensors_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)

    torch.set_num_threads(max(1, os.cpu_count() or 1))
    model = load_backbone(job.backbone, job.weights, job.seed)
    levels = tuple(sorted(job.levels))
    report = ExportReport()

    def export_image(image_path, entry_id, label, mask_path):
        rel_tensors = {
            str(j): f"tensors/{entry_id}_l{j}.pbft" for j in levels
        }
        missing = [
            rel for rel in rel_tensors.values()
            if not os.path.isfile(os.path.join(job.out_dir, rel))
        ]
        if missing or job.force:
            batch = _load_image_tensor(image_path, job.image_size)
            features = extract_levels(model, batch, levels)
            for j in levels:
                grid = features[j][0].permute(1, 2, 0).numpy()
                write_tensor(
                    os.path.join(job.out_dir, rel_tensors[str(j)]), grid
                )
            report.written += 1
        else:
            report.skipped += 1
        mask_rel = None
        if mask_path is not None:
            mask_rel = f"masks/{entry_id}.pgm"
            out_mask = os.path.join(job.out_dir, mask_rel)
            if not os.path.isfile(out_mask) or job.force:
                write_mask_pgm(out_mask, _load_mask(mask_path, job.image_size))
        return {
            "id": entry_id,
            "tensors": rel_tensors,
            "label": label,
            "mask": mask_rel,
            "image_dims": [job.image_size, job.image_size],
        }

    train_entries = []
    train_dir = os.path.join(category_dir, "train", "good")
    for name in _list_images(train_dir):
        stem = os.path.splitext(name)[0]
        try:
            train_entries.append(
                export_image(
                    os.path.join(train_dir, name),
                    f"train_good_{stem}", "normal", None,
                )
            )
        except Exception as exc:  # report per file, keep going
            report.errors.append(f"{os.path.join(train_dir, name)}: {exc}")

    test_entries = []
    test_root = os.path.join(category_dir, "test")
    defects = sorted(os.listdir(test_root)) if os.path.isdir(test_root) else []
    for defect in defects:
        folder = os.path.join(test_root, defect)
        for name in _list_images(folder):
            stem = os.path.splitext(name)[0]
            label = "normal" if defect == "good" else "anomalous"
            mask_path = None
            if label == "anomalous":
                mask_path = _find_mask(
                    job.dataset_root, job.category, defect, stem
                )
                if mask_path is None:
                    report.errors.append(
                        f"{os.path.join(folder, name)}: ground-truth mask not found"
                    )
                    continue
            try:
                test_entries.append(
                    export_image(
                        os.path.join(folder, name),
                        f"test_{defect}_{stem}", label, mask_path,
                    )
                )
            except Exception as exc:
                report.errors.append(f"{os.path.join(folder, name)}: {exc}")

    preprocessing = {
        "backbone": job.backbone,
        "weights": job.weights,
        "levels": list(levels),
        "image_size": job.image_size,
        "normalize_mean": list(IMAGENET_MEAN),
        "normalize_std": list(IMAGENET_STD),
    }
    train_manifest = os.path.join(job.out_dir, "train.json")
    test_manifest = os.path.join(job.out_dir, "test.json")
    _write_manifest(train_manifest, "train", train_entries, preprocessing)
    _write_manifest(test_manifest, "test", test_entries, preprocessing)
    with open(os.path.join(job.out_dir, "export_job.json"), "w",
              encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(job), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return train_manifest, test_manifest, report


def _write_manifest(path, split, entries, preprocessing):
    data = {"split": split, "entries": entries, "preprocessing": preprocessing}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
