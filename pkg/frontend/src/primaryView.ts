/** Central pan/zoom image canvas with detection box overlays. */

import type { App } from "./app.js";
import type { Detection } from "./types.js";

export class PrimaryImageView {
  private ctx: CanvasRenderingContext2D;
  private image = new Image();
  private imageId: string | null = null;
  private scale = 1;
  private offsetX = 0;
  private offsetY = 0;
  private dragging = false;
  private lastX = 0;
  private lastY = 0;
  overlaysVisible = true;

  constructor(
    private readonly app: App,
    private readonly canvas: HTMLCanvasElement,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
    this.image.onload = () => {
      this.fitToCanvas();
      this.draw();
    };
    canvas.addEventListener("wheel", (e) => this.onWheel(e));
    canvas.addEventListener("mousedown", (e) => this.onDown(e));
    window.addEventListener("mousemove", (e) => this.onMove(e));
    window.addEventListener("mouseup", () => (this.dragging = false));
    canvas.addEventListener("click", (e) => this.onClick(e));
    this.app.store.subscribe((sel) => {
      if (sel.imageId !== this.imageId) this.showImage(sel.imageId);
      else this.draw();
    });
  }

  toggleOverlays(): void {
    this.overlaysVisible = !this.overlaysVisible;
    this.draw();
  }

  private showImage(imageId: string | null): void {
    this.imageId = imageId;
    const session = this.app.store.selection.session;
    if (!imageId || !session) {
      this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
      return;
    }
    this.image.src = this.app.source.imageUrl(session, imageId);
  }

  private fitToCanvas(): void {
    const { width, height } = this.canvas;
    const s = Math.min(width / this.image.width, height / this.image.height);
    this.scale = s;
    this.offsetX = (width - this.image.width * s) / 2;
    this.offsetY = (height - this.image.height * s) / 2;
  }

  private toImage(x: number, y: number): [number, number] {
    return [(x - this.offsetX) / this.scale, (y - this.offsetY) / this.scale];
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const factor = e.deltaY < 0 ? 1.2 : 1 / 1.2;
    const [ix, iy] = this.toImage(e.offsetX, e.offsetY);
    this.scale *= factor;
    this.offsetX = e.offsetX - ix * this.scale;
    this.offsetY = e.offsetY - iy * this.scale;
    this.draw();
  }

  private onDown(e: MouseEvent): void {
    this.dragging = true;
    this.lastX = e.clientX;
    this.lastY = e.clientY;
  }

  private onMove(e: MouseEvent): void {
    if (!this.dragging) return;
    this.offsetX += e.clientX - this.lastX;
    this.offsetY += e.clientY - this.lastY;
    this.lastX = e.clientX;
    this.lastY = e.clientY;
    this.draw();
  }

  private onClick(e: MouseEvent): void {
    if (!this.imageId || !this.overlaysVisible) return;
    const [ix, iy] = this.toImage(e.offsetX, e.offsetY);
    const hit = this.app
      .visibleDetections(this.imageId)
      .filter(
        (d) =>
          ix >= d.bbox[0] &&
          ix <= d.bbox[0] + d.bbox[2] &&
          iy >= d.bbox[1] &&
          iy <= d.bbox[1] + d.bbox[3],
      )
      // prefer the smallest box under the cursor
      .sort((a, b) => a.bbox[2] * a.bbox[3] - b.bbox[2] * b.bbox[3])[0];
    if (hit) this.app.selectDetection(this.imageId, hit.det_id);
  }

  private boxStyle(d: Detection, activeId: number | null): string {
    return d.det_id === activeId ? "#ff3b3b" : "#21c7ff";
  }

  draw(): void {
    const { width, height } = this.canvas;
    this.ctx.clearRect(0, 0, width, height);
    if (!this.image.src || !this.image.complete) return;
    this.ctx.save();
    this.ctx.translate(this.offsetX, this.offsetY);
    this.ctx.scale(this.scale, this.scale);
    this.ctx.drawImage(this.image, 0, 0);
    if (this.overlaysVisible && this.imageId) {
      const active = this.app.store.selection.detection;
      const activeId =
        active && active.imageId === this.imageId ? active.detId : null;
      for (const d of this.app.visibleDetections(this.imageId)) {
        this.ctx.strokeStyle = this.boxStyle(d, activeId);
        this.ctx.lineWidth = 2 / this.scale;
        this.ctx.strokeRect(d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3]);
      }
    }
    this.ctx.restore();
  }
}

/** Enlarged crop of the active detection, smoothing optional. */
export class DetectionCropView {
  private ctx: CanvasRenderingContext2D;
  private image = new Image();
  smoothing = true;

  constructor(
    private readonly app: App,
    private readonly canvas: HTMLCanvasElement,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
    this.image.onload = () => this.draw();
    this.app.store.subscribe(() => this.update());
  }

  toggleSmoothing(): void {
    this.smoothing = !this.smoothing;
    this.draw();
  }

  private update(): void {
    const sel = this.app.store.selection;
    if (!sel.session || !sel.detection) {
      this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
      return;
    }
    const src = this.app.source.imageUrl(sel.session, sel.detection.imageId);
    if (this.image.src !== src) this.image.src = src;
    else this.draw();
  }

  private draw(): void {
    const det = this.app.store.activeDetection();
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!det || !this.image.complete) return;
    const [x, y, w, h] = det.bbox;
    const margin = Math.max(w, h) * 0.4;
    const sx = Math.max(0, x - margin);
    const sy = Math.max(0, y - margin);
    const sw = Math.min(this.image.width - sx, w + 2 * margin);
    const sh = Math.min(this.image.height - sy, h + 2 * margin);
    this.ctx.imageSmoothingEnabled = this.smoothing;
    const s = Math.min(this.canvas.width / sw, this.canvas.height / sh);
    this.ctx.drawImage(this.image, sx, sy, sw, sh, 0, 0, sw * s, sh * s);
  }
}
