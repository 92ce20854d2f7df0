"""2D lesion detection surface: tiling, LoG baseline, soft-NMS, metrics.

External CNN detectors integrate through the detections.json schema; the
built-in baseline finds dark blob-like regions with a scale-normalized
Laplacian-of-Gaussian filter bank. Evaluation implements single-class
average precision with all-points interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from . import fileio

SOFT_NMS_SIGMA = 0.5
SOFT_NMS_FLOOR = 0.25
LOG_SCALES = (2.0, 3.0, 4.0, 6.0, 8.0, 11.0, 16.0)  # sigma px at 4000x6000


@dataclass
class Detection2D:
    """One bounding box in one image; bbox is (x, y, w, h), top-left origin."""

    image_id: str
    det_id: int
    bbox: tuple
    score: float
    source: str = "log_baseline"
    removed: bool = False
    notes: str = ""

    def __post_init__(self):
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValueError("bbox must have positive width and height")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")
        self.bbox = (float(x), float(y), float(w), float(h))

    def to_json(self) -> dict:
        return {"det_id": self.det_id, "bbox": list(self.bbox),
                "score": self.score, "source": self.source,
                "removed": self.removed, "notes": self.notes}

    @classmethod
    def from_json(cls, image_id: str, obj: dict) -> "Detection2D":
        return cls(image_id=image_id, det_id=obj["det_id"],
                   bbox=tuple(obj["bbox"]), score=obj["score"],
                   source=obj.get("source", "external"),
                   removed=obj.get("removed", False),
                   notes=obj.get("notes", ""))


def save_detections(path, per_image: dict[str, list[Detection2D]]) -> None:
    fileio.write_json_atomic(
        path, {iid: [d.to_json() for d in dets]
               for iid, dets in per_image.items()})


def load_detections(path) -> dict[str, list[Detection2D]]:
    raw = fileio.read_json(path)
    return {iid: [Detection2D.from_json(iid, o) for o in objs]
            for iid, objs in raw.items()}


# ------------------------------------------------------------------- tiling

@dataclass(frozen=True)
class TileGrid:
    """Overlapping tile layout covering a (possibly edge-padded) image."""

    width: int
    height: int
    tile_size: int
    overlap_fraction: float
    offsets: tuple
    padded_size: tuple


def tile(width: int, height: int, tile_size: int = 608,
         overlap: float = 0.5) -> TileGrid:
    """Tile an image with fixed-size overlapping patches.

    Origins sit at multiples of ``stride = round(tile_size * (1 - overlap))``;
    the image is conceptually edge-padded up to the last tile's far edge so
    every tile has full size and every pixel is covered.
    """
    if tile_size < 1:
        raise ValueError("tile_size must be >= 1")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must be in [0, 1)")
    stride = int(round(tile_size * (1.0 - overlap)))
    if stride < 1:
        raise ValueError("overlap too large: stride rounds to zero")

    def count(extent: int) -> int:
        if extent <= tile_size:
            return 1
        return int(np.ceil((extent - tile_size) / stride)) + 1

    nx, ny = count(width), count(height)
    offsets = tuple((i * stride, j * stride)
                    for j in range(ny) for i in range(nx))
    padded = ((nx - 1) * stride + tile_size, (ny - 1) * stride + tile_size)
    return TileGrid(width=width, height=height, tile_size=tile_size,
                    overlap_fraction=overlap, offsets=offsets,
                    padded_size=padded)


def extract_tile(image: np.ndarray, origin: tuple, tile_size: int) -> np.ndarray:
    """Cut one tile out of a 2D raster, edge-padding past the image."""
    x0, y0 = origin
    h, w = image.shape[:2]
    pad_x, pad_y = max(0, x0 + tile_size - w), max(0, y0 + tile_size - h)
    patch = image[y0:min(y0 + tile_size, h), x0:min(x0 + tile_size, w)]
    if pad_x or pad_y:
        widths = [(0, pad_y), (0, pad_x)] + [(0, 0)] * (image.ndim - 2)
        patch = np.pad(patch, widths, mode="edge")
    return patch


# ------------------------------------------------------------- LoG baseline

def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Luma of an RGB uint8/float image, as float64 in [0, 1]."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
    if arr.max() > 1.5:
        arr = arr / 255.0
    return arr


def log_response_stack(image: np.ndarray, scales) -> np.ndarray:
    """Scale-normalized LoG responses, positive for dark blobs; (S, H, W).

    The image mean is removed first: the truncated LoG kernel is not exactly
    DC-free, so this keeps responses invariant under intensity shifts.
    """
    img = np.asarray(image, dtype=np.float64)
    img = img - img.mean()
    return np.stack([s * s * ndimage.gaussian_laplace(img, s) for s in scales])


def detect_blobs_log(image: np.ndarray, scales=LOG_SCALES,
                     response_threshold: float = 0.05,
                     mask: np.ndarray | None = None,
                     image_id: str = "", det_id_start: int = 0,
                     origin: tuple = (0, 0),
                     border: int = 0) -> list[Detection2D]:
    """Dark-blob detections via scale-space LoG maxima.

    Maxima over (x, y, sigma) above ``response_threshold`` and on masked
    pixels emit square boxes of side 2*sigma*sqrt(2). Scores are responses
    normalized by 3x the threshold, so the detection set and scores are
    invariant to affine intensity changes when the threshold is scaled
    along. ``border`` suppresses maxima within that many pixels of the
    raster edge (used by the tiled path where edges are interior seams).
    """
    scales = tuple(scales)
    if not scales or any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be non-empty and ascending")
    stack = log_response_stack(image, scales)
    local_max = stack
    for axis in range(3):  # separable 3x3x3 box maximum
        local_max = ndimage.maximum_filter1d(local_max, 3, axis=axis,
                                             mode="nearest")
    peaks = (stack == local_max) & (stack > response_threshold)
    if mask is not None:
        peaks &= np.asarray(mask, dtype=bool)[None, :, :]
    if border > 0:
        h, w = stack.shape[1:]
        keep = np.zeros((h, w), dtype=bool)
        keep[border:h - border, border:w - border] = True
        peaks &= keep[None, :, :]

    si, yi, xi = np.nonzero(peaks)
    order = np.lexsort((si, xi, yi))  # deterministic emission order
    dets = []
    h, w = stack.shape[1:]
    for k in order:
        s = scales[si[k]]
        half = s * np.sqrt(2.0)
        x0, y0 = xi[k] - half, yi[k] - half
        x1, y1 = xi[k] + half, yi[k] + half
        x0, y0 = max(x0, 0.0), max(y0, 0.0)
        x1, y1 = min(x1, float(w)), min(y1, float(h))
        if x1 <= x0 or y1 <= y0:
            continue
        score = float(np.clip(stack[si[k], yi[k], xi[k]]
                              / (3.0 * response_threshold), 0.0, 1.0))
        dets.append(Detection2D(
            image_id=image_id, det_id=det_id_start + len(dets),
            bbox=(x0 + origin[0], y0 + origin[1], x1 - x0, y1 - y0),
            score=score, source="log_baseline"))
    return dets


# ----------------------------------------------------------------- soft-NMS

def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes, continuous areas."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def decayed_score(score: float, overlap: float, sigma: float) -> float:
    """Gaussian soft-NMS decay: score * exp(-overlap^2 / sigma)."""
    return score * float(np.exp(-(overlap * overlap) / sigma))


def soft_nms(dets: list[Detection2D], sigma: float = SOFT_NMS_SIGMA,
             score_floor: float = SOFT_NMS_FLOOR) -> list[Detection2D]:
    """Gaussian soft-NMS: decay overlapping boxes instead of deleting them.

    Repeatedly selects the highest-score box (ties: smaller x, then y) and
    decays every remaining running score by exp(-iou^2 / sigma); boxes whose
    running score falls below ``score_floor`` are dropped. Survivors are
    returned in selection order carrying their input scores, which makes the
    operation exactly idempotent: the decayed values only drive suppression.
    """
    pool = list(range(len(dets)))
    running = [d.score for d in dets]
    out: list[Detection2D] = []
    while pool:
        best = min(pool, key=lambda i: (-running[i], dets[i].bbox[0],
                                        dets[i].bbox[1]))
        pool.remove(best)
        out.append(replace(dets[best]))
        survivors = []
        for i in pool:
            running[i] = decayed_score(running[i],
                                       iou(dets[best].bbox, dets[i].bbox),
                                       sigma)
            if running[i] >= score_floor:
                survivors.append(i)
        pool = survivors
    return out


def merge_tile_detections(per_tile: list[tuple[tuple, list[Detection2D]]],
                          grid: TileGrid, sigma: float = SOFT_NMS_SIGMA,
                          score_floor: float = SOFT_NMS_FLOOR) -> list[Detection2D]:
    """Aggregate tile-local detections into image coordinates.

    Boxes are translated by their tile origin, clamped to the image, then
    deduplicated with soft-NMS; det_ids are reassigned contiguously.
    """
    merged: list[Detection2D] = []
    for origin, dets in per_tile:
        ox, oy = origin
        for d in dets:
            x, y, w, h = d.bbox
            x0 = min(max(x + ox, 0.0), grid.width - 1.0)
            y0 = min(max(y + oy, 0.0), grid.height - 1.0)
            x1 = min(x + ox + w, float(grid.width))
            y1 = min(y + oy + h, float(grid.height))
            if x1 <= x0 or y1 <= y0:
                continue
            merged.append(replace(d, bbox=(x0, y0, x1 - x0, y1 - y0)))
    kept = soft_nms(merged, sigma=sigma, score_floor=score_floor)
    return [replace(d, det_id=i) for i, d in enumerate(kept)]


# ---------------------------------------------------------------- evaluation

def _match_greedy(dets: list[Detection2D], gts: list[Detection2D],
                  iou_threshold: float) -> list[bool]:
    """Score-descending greedy matching; one match per ground truth.

    Returns the TP flag per detection, in score-descending order of ``dets``.
    """
    order = sorted(range(len(dets)),
                   key=lambda i: (-dets[i].score, dets[i].bbox[0],
                                  dets[i].bbox[1], dets[i].det_id))
    taken = [False] * len(gts)
    flags = []
    for i in order:
        best_iou, best_j = 0.0, -1
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            v = iou(dets[i].bbox, g.bbox)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= iou_threshold:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(tp_flags: list[bool], scores: list[float],
                      n_gt: int) -> float:
    """All-points interpolated AP from pooled, score-ranked TP flags."""
    if n_gt == 0:
        raise ValueError("average precision undefined without ground truth")
    if not tp_flags:
        return 0.0
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    tp = np.asarray(tp_flags, dtype=np.float64)[order]
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(1.0 - tp)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    # precision envelope
    env = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recall, env):
        ap += (r - prev_r) * p
        prev_r = r
    return float(ap)


def evaluate(dets: dict[str, list[Detection2D]],
             gts: dict[str, list[Detection2D]],
             iou_threshold: float = 0.5,
             score_threshold: float = 0.0) -> dict:
    """Single-class detection metrics against ground truth boxes.

    ``map50`` pools all detections across images into one PR curve
    (all-points interpolated AP at the IoU threshold); precision and recall
    are computed per image at the operating score threshold and averaged
    over images. Detections flagged removed are excluded. Detections for an
    image id absent from the ground truth raise.
    """
    unknown = set(dets) - set(gts)
    if unknown:
        raise ValueError(f"detections reference unknown image ids: {sorted(unknown)!r}")

    pooled_flags: list[bool] = []
    pooled_scores: list[float] = []
    n_gt_total = 0
    per_image = {}
    precisions, recalls = [], []
    for iid in sorted(gts):
        gt = [g for g in gts[iid] if not g.removed]
        active = [d for d in dets.get(iid, []) if not d.removed]
        n_gt_total += len(gt)

        flags = _match_greedy(active, gt, iou_threshold)
        scores_sorted = sorted((d.score for d in active), reverse=True)
        pooled_flags.extend(flags)
        pooled_scores.extend(scores_sorted)

        operating = [d for d in active if d.score >= score_threshold]
        op_flags = _match_greedy(operating, gt, iou_threshold)
        tp = sum(op_flags)
        fp = len(op_flags) - tp
        fn = len(gt) - tp
        precision = tp / (tp + fp) if (tp + fp) else 1.0
        recall = tp / len(gt) if gt else 1.0
        per_image[iid] = {"precision": precision, "recall": recall,
                          "tp": tp, "fp": fp, "fn": fn}
        precisions.append(precision)
        recalls.append(recall)

    if n_gt_total == 0:
        raise ValueError("evaluation undefined: ground truth has no boxes")
    return {
        "map50": average_precision(pooled_flags, pooled_scores, n_gt_total),
        "precision": float(np.mean(precisions)),
        "recall": float(np.mean(recalls)),
        "per_image": per_image,
    }


# -------------------------------------------------------------- tiled driver

def detect_image_tiled(image: np.ndarray, mask: np.ndarray | None,
                       image_id: str, tile_size: int = 608,
                       overlap: float = 0.5, scales=LOG_SCALES,
                       response_threshold: float = 0.05,
                       min_box_px: float = 5.0,
                       nms_sigma: float = SOFT_NMS_SIGMA,
                       nms_floor: float = SOFT_NMS_FLOOR) -> list[Detection2D]:
    """Run the LoG baseline over an image tile by tile and merge.

    Tile-seam maxima are suppressed inside each tile (every pixel near a
    seam is interior to a neighboring tile at 50% overlap); ``tile_size=0``
    processes the whole image in one piece.
    """
    gray = to_grayscale(image)
    h, w = gray.shape
    if tile_size <= 0:
        dets = detect_blobs_log(gray, scales=scales,
                                response_threshold=response_threshold,
                                mask=mask, image_id=image_id)
        merged = soft_nms(dets, sigma=nms_sigma, score_floor=nms_floor)
    else:
        grid = tile(w, h, tile_size, overlap)
        border = min(8, grid.tile_size // 8) if len(grid.offsets) > 1 else 0
        per_tile = []
        for origin in grid.offsets:
            patch = extract_tile(gray, origin, grid.tile_size)
            patch_mask = None
            if mask is not None:
                patch_mask = extract_tile(np.asarray(mask, dtype=bool),
                                          origin, grid.tile_size)
                if not patch_mask.any():
                    continue
            per_tile.append((origin, detect_blobs_log(
                patch, scales=scales,
                response_threshold=response_threshold, mask=patch_mask,
                image_id=image_id, border=border)))
        merged = merge_tile_detections(per_tile, grid, sigma=nms_sigma,
                                       score_floor=nms_floor)
    sized = [d for d in merged
             if d.bbox[2] >= min_box_px and d.bbox[3] >= min_box_px]
    return [replace(d, det_id=i) for i, d in enumerate(sized)]
