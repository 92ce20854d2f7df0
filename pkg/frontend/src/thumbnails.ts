/** Filterable thumbnail grid of the session's camera views. */

import type { App } from "./app.js";
import { POLE_VIEWS, filterByView } from "./poles.js";

export class ThumbnailGrid {
  private view: string | null = null;

  constructor(
    private readonly app: App,
    private readonly grid: HTMLElement,
    private readonly filterBar: HTMLElement,
  ) {
    this.buildFilterButtons();
    this.app.store.subscribe(() => this.highlightActive());
  }

  private buildFilterButtons(): void {
    const all = document.createElement("button");
    all.textContent = "All";
    all.onclick = () => this.setView(null);
    this.filterBar.appendChild(all);
    for (const name of Object.keys(POLE_VIEWS)) {
      const btn = document.createElement("button");
      btn.textContent = name;
      btn.onclick = () => this.setView(name);
      this.filterBar.appendChild(btn);
    }
  }

  setView(view: string | null): void {
    this.view = view;
    this.render();
  }

  render(): void {
    this.grid.textContent = "";
    const session = this.app.store.selection.session;
    if (!session) return;
    for (const img of filterByView(this.app.images(), this.view)) {
      const cell = document.createElement("figure");
      cell.className = "thumb";
      cell.dataset.imageId = img.id;
      const pic = document.createElement("img");
      pic.loading = "lazy";
      pic.src = this.app.source.imageUrl(session, img.id);
      pic.alt = img.id;
      const cap = document.createElement("figcaption");
      cap.textContent = img.id;
      cell.append(pic, cap);
      cell.onclick = () => this.app.selectThumbnail(img.id);
      this.grid.appendChild(cell);
    }
    this.highlightActive();
  }

  private highlightActive(): void {
    const active = this.app.store.selection.imageId;
    this.grid.querySelectorAll<HTMLElement>(".thumb").forEach((el) => {
      el.classList.toggle("active", el.dataset.imageId === active);
    });
  }
}
