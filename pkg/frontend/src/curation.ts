/** Detection metadata panel: remove button, free-text notes, crop list. */

import type { App } from "./app.js";

export class CurationPanel {
  private meta: HTMLElement;
  private notes: HTMLTextAreaElement;
  private removeBtn: HTMLButtonElement;
  private toast: HTMLElement;
  private detList: HTMLElement;

  constructor(
    private readonly app: App,
    panel: HTMLElement,
  ) {
    this.meta = panel.querySelector("#det-meta")!;
    this.notes = panel.querySelector("#det-notes")!;
    this.removeBtn = panel.querySelector("#det-remove")!;
    this.toast = panel.querySelector("#toast")!;
    this.detList = panel.querySelector("#det-list")!;

    this.removeBtn.onclick = () => void this.remove();
    this.notes.onblur = () => void this.saveNotes();
    this.app.store.subscribe(() => this.render());
  }

  private async remove(): Promise<void> {
    const ok = await this.app.removeActiveDetection();
    if (!ok) this.showToast("remove failed; nothing changed");
  }

  private async saveNotes(): Promise<void> {
    const det = this.app.store.activeDetection();
    if (!det || det.notes === this.notes.value) return;
    const ok = await this.app.annotateActiveDetection(this.notes.value);
    if (!ok) this.showToast("saving notes failed; nothing changed");
  }

  private showToast(message: string): void {
    this.toast.textContent = message;
    this.toast.classList.add("show");
    setTimeout(() => this.toast.classList.remove("show"), 4000);
  }

  render(): void {
    const sel = this.app.store.selection;
    const det = this.app.store.activeDetection();
    this.removeBtn.disabled = !det || this.app.source.readOnly;
    this.notes.disabled = !det || this.app.source.readOnly;
    if (det) {
      const lesion = sel.lesionId !== null ? `lesion #${sel.lesionId}` : "unfused";
      this.meta.textContent =
        `${sel.detection!.imageId} / det ${det.det_id} - ` +
        `score ${det.score.toFixed(2)} - ${det.source} - ${lesion}`;
      this.notes.value = det.notes;
    } else {
      this.meta.textContent = "no detection selected";
      this.notes.value = "";
    }
    this.renderList(sel.imageId);
  }

  /** "current image detections" strip; click selects. */
  private renderList(imageId: string | null): void {
    this.detList.textContent = "";
    if (!imageId) return;
    const active = this.app.store.selection.detection;
    for (const d of this.app.visibleDetections(imageId)) {
      const chip = document.createElement("button");
      chip.className = "det-chip";
      chip.textContent = `#${d.det_id}`;
      if (active && active.detId === d.det_id) chip.classList.add("active");
      chip.onclick = () => this.app.selectDetection(imageId, d.det_id);
      this.detList.appendChild(chip);
    }
  }
}
