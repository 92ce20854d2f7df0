/** Entry point: wire panels to the controller and open a session.
 *
 * Query parameters:
 *   ?api=http://127.0.0.1:8008   pipeline service base URL (default)
 *   ?static=/path/to/export     read-only flat-file mode instead
 *   ?session=<id>               session to open (default: first listed)
 */

import { ApiClient, StaticClient } from "./api.js";
import { App } from "./app.js";
import { CurationPanel } from "./curation.js";
import { ModelView } from "./modelView.js";
import { DetectionCropView, PrimaryImageView } from "./primaryView.js";
import { ThumbnailGrid } from "./thumbnails.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const staticRoot = params.get("static");
  const source = staticRoot
    ? new StaticClient(staticRoot)
    : new ApiClient(params.get("api") ?? "http://127.0.0.1:8008");

  let modelView: ModelView | null = null;
  const app = new App(source, {
    onError: (msg) => console.error(msg),
    onFocus: (pose) => modelView?.focus(pose),
  });

  modelView = new ModelView(app, document.getElementById("model-view")!);
  const thumbs = new ThumbnailGrid(
    app,
    document.getElementById("thumb-grid")!,
    document.getElementById("thumb-filters")!,
  );
  const primary = new PrimaryImageView(
    app,
    document.getElementById("primary-canvas") as HTMLCanvasElement,
  );
  new DetectionCropView(
    app,
    document.getElementById("crop-canvas") as HTMLCanvasElement,
  );
  new CurationPanel(app, document.getElementById("right-panel")!);

  document.getElementById("toggle-overlays")!.onclick = () =>
    primary.toggleOverlays();
  document.getElementById("toggle-texture")!.onclick = () =>
    modelView!.toggleTexture();
  document.getElementById("reset-view")!.onclick = () =>
    modelView!.resetToFront();
  document.getElementById("recenter")!.onclick = () => modelView!.recenter();

  // static exports have no session index; ?session= names it directly
  const wanted = params.get("session");
  const sessionId =
    wanted ?? (await source.listSessions().catch(() => []))[0];
  if (!sessionId) {
    document.getElementById("status")!.textContent = "no sessions found";
    return;
  }
  await app.openSession(sessionId);
  await modelView.loadSession();
  thumbs.render();
  document.getElementById("status")!.textContent =
    `session ${sessionId}` + (source.readOnly ? " (read-only)" : "");
}

void boot();
