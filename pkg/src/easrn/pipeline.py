"""Batch front-end: dataset synthesis, deblurring runs, pair evaluation.

Every generated pair is described by one manifest row carrying the
derived seeds, the trajectory as a flat float list, streak placements,
and output checksums, so a run is reproducible bit for bit and a
partial run can resume.  Per-item randomness comes from the seed tuple
(master seed, item index, attempt), making items independent of
execution order.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import cv2
import numpy as np

from .blur import (NoiseConfig, accumulate_frames, add_noise, clip_dynamic_range,
                   registration_flow, warp_image)
from .network import GraphConfig, forward_nodes, load_weights, validate_weights
from .metrics import psnr, ssim
from .pyramid import decompose
from .streaks import LightSource, StreakConfig, composite_sources, render_shape_for_seed, sample_light_sources
from .trajectory import MotionConfig, Trajectory, generate_trajectory
from .validation import ConfigurationError, as_image, rng_from
from . import autodiff as ad

SCHEMA_VERSION = 1
MAX_SATURATION_ATTEMPTS = 8
GAMMA_RANGE = (0.8, 1.25)


@dataclass(frozen=True)
class DatasetPolicy:
    """Knobs of the synthesis run; defaults follow the training recipe
    (512 crops, streaks on a third of the images, 30 px flow bound,
    noise sigma up to 0.02, 3 scales)."""

    crop_size: int = 512
    flips: bool = True
    gamma: bool = True
    oe_fraction: float = 1.0 / 3.0
    streak_count_range: tuple[int, int] = (2, 20)
    streak_intensity_range: tuple[float, float] = (1.0, 10.0)
    streak_shape_size: int = 17
    max_shift: float = 30.0
    sigma_max: float = 0.02
    trajectory_samples: int = 100
    rotation_per_sample: float = 0.0
    scales: int = 3
    bits: int = 16
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.oe_fraction <= 1.0:
            raise ConfigurationError(f"oe_fraction must lie in [0, 1], got {self.oe_fraction}")
        if self.crop_size < 2 ** (self.scales - 1):
            raise ConfigurationError(
                f"crop_size {self.crop_size} too small for {self.scales} scales")
        if self.bits not in (8, 16):
            raise ConfigurationError(f"bits must be 8 or 16, got {self.bits}")
        if self.sigma_max < 0:
            raise ConfigurationError(f"sigma_max must be >= 0, got {self.sigma_max}")
        if self.max_shift <= 0:
            raise ConfigurationError(f"max_shift must be > 0, got {self.max_shift}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["streak_count_range"] = list(self.streak_count_range)
        d["streak_intensity_range"] = list(self.streak_intensity_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetPolicy":
        d = dict(d)
        d["streak_count_range"] = tuple(d["streak_count_range"])
        d["streak_intensity_range"] = tuple(d["streak_intensity_range"])
        return cls(**d)


# ------------------------------------------------------------------ image io

def read_image(path) -> tuple[np.ndarray, int]:
    """Load an 8- or 16-bit image as float64 RGB in [0, 1]; returns the
    array and its source bit depth."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise IOError(f"cannot read image: {path}")
    if raw.dtype == np.uint8:
        bits = 8
    elif raw.dtype == np.uint16:
        bits = 16
    else:
        raise IOError(f"unsupported image dtype {raw.dtype}: {path}")
    arr = raw.astype(np.float64) / (2**bits - 1)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    elif arr.shape[2] == 4:
        arr = arr[:, :, :3][:, :, ::-1]
    elif arr.shape[2] == 3:
        arr = arr[:, :, ::-1]
    return np.ascontiguousarray(arr), bits


def write_image(path, img, bits: int = 16) -> None:
    arr = np.clip(as_image(img), 0.0, 1.0)
    scale = 2**bits - 1
    quant = np.rint(arr * scale).astype(np.uint16 if bits == 16 else np.uint8)
    if quant.shape[2] == 3:
        quant = quant[:, :, ::-1]
    else:
        quant = quant[:, :, 0]
    if not cv2.imwrite(str(path), quant):
        raise IOError(f"cannot write image: {path}")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ------------------------------------------------------------- pair synthesis

def _blur_pair(sharp_oe: np.ndarray, streak_mask, traj: Trajectory, rotation: float,
               sigma: float, noise_seed: int) -> tuple[np.ndarray, np.ndarray, dict]:
    """Blur + register one prepared sharp frame; stats record the
    saturation bookkeeping used by the manifest."""
    pre_clip = accumulate_frames(sharp_oe, traj, rotation)
    noisy = add_noise(pre_clip, NoiseConfig(sigma, noise_seed))
    blurred = clip_dynamic_range(noisy)
    reg_flow = registration_flow(traj, rotation, sharp_oe.shape[:2])
    truth = clip_dynamic_range(warp_image(sharp_oe, reg_flow))
    stats = {
        "preclip_sharp_max": float(sharp_oe.max()),
        "preclip_blur_max": float(noisy.max()),
        "saturated": False,
        "truth_streak_max": None,
        "blur_streak_max": None,
    }
    if streak_mask is not None:
        truth_region = warp_image(streak_mask, reg_flow)[:, :, 0] > 1e-6
        blur_region = accumulate_frames(streak_mask, traj, rotation)[:, :, 0] > 1e-6
        t_max = float(truth[truth_region].max()) if truth_region.any() else 0.0
        b_max = float(blurred[blur_region].max()) if blur_region.any() else 0.0
        stats["truth_streak_max"] = t_max
        stats["blur_streak_max"] = b_max
        stats["saturated"] = (t_max == 1.0) or (b_max == 1.0)
    return blurred, truth, stats


def _prepare_item(src_path, index: int, policy: DatasetPolicy):
    """Draw one item's augmentation, streaks, trajectory, and noise.

    Retries with a re-derived seed in the rare case a streaked frame
    fails to saturate after clipping, so the saturation guarantee is
    structural rather than probabilistic.
    """
    sharp_full, _ = read_image(src_path)
    h, w = sharp_full.shape[:2]
    cs = policy.crop_size
    if h < cs or w < cs:
        raise ValueError(f"source {h}x{w} smaller than crop {cs}: {src_path}")
    for attempt in range(MAX_SATURATION_ATTEMPTS):
        rng = rng_from((policy.seed, index, attempt))
        y0 = int(rng.integers(0, h - cs + 1))
        x0 = int(rng.integers(0, w - cs + 1))
        img = sharp_full[y0:y0 + cs, x0:x0 + cs]
        flip_h = bool(policy.flips and rng.random() < 0.5)
        flip_v = bool(policy.flips and rng.random() < 0.5)
        if flip_h:
            img = img[:, ::-1]
        if flip_v:
            img = img[::-1]
        gamma_val = float(rng.uniform(*GAMMA_RANGE)) if policy.gamma else 1.0
        img = np.ascontiguousarray(img) ** gamma_val
        with_streaks = bool(rng.random() < policy.oe_fraction)
        sources: list[LightSource] = []
        if with_streaks:
            cfg = StreakConfig(policy.streak_count_range, policy.streak_intensity_range,
                               policy.streak_shape_size, 0)
            sources = sample_light_sources(cfg, img.shape[:2], channels=img.shape[2], rng=rng)
        sharp_oe = composite_sources(img, sources) if sources else img
        mask = None
        if sources:
            mask = ((sharp_oe - img).max(axis=2, keepdims=True) > 1e-12).astype(np.float64)
        traj_seed = int(rng.integers(0, 2**63))
        traj = generate_trajectory(MotionConfig(
            num_samples=policy.trajectory_samples, max_shift=policy.max_shift, seed=traj_seed))
        sigma = float(rng.uniform(0.0, policy.sigma_max))
        noise_seed = int(rng.integers(0, 2**63))
        blurred, truth, stats = _blur_pair(sharp_oe, mask, traj, policy.rotation_per_sample,
                                           sigma, noise_seed)
        if not with_streaks or stats["saturated"]:
            break
    row = {
        "index": index,
        "source": str(src_path),
        "attempt": attempt,
        "crop": [y0, x0],
        "flip_h": flip_h,
        "flip_v": flip_v,
        "gamma": gamma_val,
        "oe": with_streaks,
        "streaks": [{"shape_seed": s.shape_seed, "position": list(s.position),
                     "intensities": [float(v) for v in s.intensities]} for s in sources],
        "trajectory": traj.to_list(),
        "trajectory_seed": traj_seed,
        "rotation_per_sample": policy.rotation_per_sample,
        "sigma": sigma,
        "noise_seed": noise_seed,
        **stats,
    }
    return row, blurred, truth


def _rebuild_item(row: dict, policy: DatasetPolicy):
    """Deterministically regenerate a pair from its manifest row."""
    sharp_full, _ = read_image(row["source"])
    cs = policy.crop_size
    y0, x0 = row["crop"]
    img = sharp_full[y0:y0 + cs, x0:x0 + cs]
    if row["flip_h"]:
        img = img[:, ::-1]
    if row["flip_v"]:
        img = img[::-1]
    img = np.ascontiguousarray(img) ** row["gamma"]
    sources = [LightSource(render_shape_for_seed(s["shape_seed"], policy.streak_shape_size),
                           np.array(s["intensities"]), tuple(s["position"]), s["shape_seed"])
               for s in row["streaks"]]
    sharp_oe = composite_sources(img, sources) if sources else img
    mask = None
    if sources:
        mask = ((sharp_oe - img).max(axis=2, keepdims=True) > 1e-12).astype(np.float64)
    traj = Trajectory.from_list(row["trajectory"])
    return _blur_pair(sharp_oe, mask, traj, row["rotation_per_sample"],
                      row["sigma"], row["noise_seed"])


# ------------------------------------------------------------------ manifests

def _pair_paths(out_dir: Path, index: int) -> tuple[Path, Path]:
    return out_dir / f"blur_{index:05d}.png", out_dir / f"sharp_{index:05d}.png"


def write_manifest(path: Path, header: dict, rows: list[dict]) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for row in sorted(rows, key=lambda r: r["index"]):
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    tmp.replace(path)


def read_manifest(path) -> tuple[dict, list[dict]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ConfigurationError(f"empty manifest: {path}")
    header = json.loads(lines[0])
    if header.get("schema") != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported manifest schema {header.get('schema')!r}")
    return header, [json.loads(ln) for ln in lines[1:]]


@dataclass
class RunResult:
    manifest_path: Path
    ok: int
    failed: int

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0


def generate_dataset(input_paths, out_dir, policy: DatasetPolicy, count: int | None = None,
                     jobs: int = 1, resume: bool = False) -> RunResult:
    """Synthesize ``count`` pairs (inputs cycled in sorted order) and
    write pair PNGs plus a line-delimited JSON manifest.

    Item failures are recorded as error rows and do not stop the run.
    """
    policy.validate()
    inputs = sorted(str(p) for p in input_paths)
    if not inputs:
        raise ConfigurationError("no input images given")
    if count is None:
        count = len(inputs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.jsonl"
    partial_path = out / "manifest.partial.jsonl"
    header = {"schema": SCHEMA_VERSION, "policy": policy.to_dict(), "count": count}

    done: dict[int, dict] = {}
    if resume and partial_path.exists():
        for ln in partial_path.read_text().splitlines():
            row = json.loads(ln)
            if "error" in row:
                continue
            blur_p, sharp_p = _pair_paths(out, row["index"])
            if (blur_p.exists() and sharp_p.exists()
                    and sha256_file(blur_p) == row["blur_sha256"]
                    and sha256_file(sharp_p) == row["sharp_sha256"]):
                done[row["index"]] = row

    lock = threading.Lock()
    partial = open(partial_path, "a" if resume else "w")

    def run_item(index: int) -> dict:
        src = inputs[index % len(inputs)]
        try:
            row, blurred, truth = _prepare_item(src, index, policy)
            blur_p, sharp_p = _pair_paths(out, index)
            write_image(blur_p, blurred, policy.bits)
            write_image(sharp_p, truth, policy.bits)
            row["blur_file"] = blur_p.name
            row["sharp_file"] = sharp_p.name
            row["blur_sha256"] = sha256_file(blur_p)
            row["sharp_sha256"] = sha256_file(sharp_p)
        except Exception as exc:  # recorded, run continues
            row = {"index": index, "source": src, "error": str(exc)}
        with lock:
            partial.write(json.dumps(row, sort_keys=True) + "\n")
            partial.flush()
        return row

    todo = [i for i in range(count) if i not in done]
    try:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(run_item, todo))
        else:
            rows = [run_item(i) for i in todo]
    finally:
        partial.close()
    all_rows = list(done.values()) + rows
    write_manifest(manifest_path, header, all_rows)
    partial_path.unlink(missing_ok=True)
    failed = sum(1 for r in all_rows if "error" in r)
    return RunResult(manifest_path, len(all_rows) - failed, failed)


def replay_manifest(manifest_path, out_dir) -> RunResult:
    """Regenerate every pair recorded in a manifest and verify the
    outputs reproduce the recorded checksums."""
    header, rows = read_manifest(manifest_path)
    policy = DatasetPolicy.from_dict(header["policy"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ok = failed = 0
    new_rows = []
    for row in rows:
        if "error" in row:
            new_rows.append(row)
            failed += 1
            continue
        try:
            blurred, truth, _ = _rebuild_item(row, policy)
            blur_p, sharp_p = _pair_paths(out, row["index"])
            write_image(blur_p, blurred, policy.bits)
            write_image(sharp_p, truth, policy.bits)
            if (sha256_file(blur_p) != row["blur_sha256"]
                    or sha256_file(sharp_p) != row["sharp_sha256"]):
                raise ValueError(f"checksum mismatch for pair {row['index']}")
            new_rows.append(row)
            ok += 1
        except Exception as exc:
            new_rows.append({"index": row["index"], "source": row.get("source", ""),
                             "error": str(exc)})
            failed += 1
    manifest_out = out / "manifest.jsonl"
    write_manifest(manifest_out, header, new_rows)
    return RunResult(manifest_out, ok, failed)


# ---------------------------------------------------------------- deblur runs

def run_deblur(input_path, weights_path, output_path, config: GraphConfig = GraphConfig(),
               dump_intermediates: bool = False) -> list[Path]:
    """Restore one image (or every image in a directory) with a weight
    file; optionally dump every scale's input and output."""
    weights = load_weights(weights_path)
    validate_weights(weights, config)
    in_path, out_path = Path(input_path), Path(output_path)
    if in_path.is_dir():
        images = sorted(p for p in in_path.iterdir() if p.suffix.lower() == ".png")
        if not images:
            raise ConfigurationError(f"no .png images in {in_path}")
        out_path.mkdir(parents=True, exist_ok=True)
        targets = [(p, out_path / p.name) for p in images]
    else:
        if out_path.suffix == "":
            out_path.mkdir(parents=True, exist_ok=True)
            targets = [(in_path, out_path / in_path.name)]
        else:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            targets = [(in_path, out_path)]
    written = []
    for src, dst in targets:
        img, bits = read_image(src)
        levels = decompose(img, config.n_scales)
        xs, ys = forward_nodes([ad.Node(lv) for lv in levels], weights, config)
        write_image(dst, np.clip(ys[-1].value, 0.0, 1.0), bits)
        written.append(dst)
        if dump_intermediates:
            for i, (x, y) in enumerate(zip(xs, ys), start=1):
                xp = dst.with_name(f"{dst.stem}_x{i}.png")
                yp = dst.with_name(f"{dst.stem}_y{i}.png")
                write_image(xp, np.clip(x.value, 0.0, 1.0), bits)
                write_image(yp, np.clip(y.value, 0.0, 1.0), bits)
                written.extend([xp, yp])
    return written


# ----------------------------------------------------------------- evaluation

def _jsonable(x):
    if isinstance(x, float) and not np.isfinite(x):
        return "inf" if x > 0 else "-inf"
    return x


def evaluate_pairs(pred_dir, truth_dir, report_path=None) -> dict:
    """Per-pair and mean PSNR/SSIM for same-named images in two
    directories; mean PSNR is taken over the finite pairs."""
    pred, truth = Path(pred_dir), Path(truth_dir)
    names = sorted(set(p.name for p in pred.glob("*.png")) & set(p.name for p in truth.glob("*.png")))
    if not names:
        raise ConfigurationError(f"no matching .png pairs between {pred} and {truth}")
    pairs = []
    for name in names:
        a, _ = read_image(pred / name)
        b, _ = read_image(truth / name)
        pairs.append({"name": name, "psnr": psnr(a, b), "ssim": ssim(a, b)})
    finite = [p["psnr"] for p in pairs if np.isfinite(p["psnr"])]
    report = {
        "count": len(pairs),
        "mean_psnr": float(np.mean(finite)) if finite else None,
        "infinite_psnr_pairs": len(pairs) - len(finite),
        "mean_ssim": float(np.mean([p["ssim"] for p in pairs])),
        "pairs": [{k: _jsonable(v) for k, v in p.items()} for p in pairs],
    }
    if report_path is not None:
        Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
