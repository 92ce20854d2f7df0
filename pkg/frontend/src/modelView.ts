/** Interactive textured 3D model viewport with lesion markers.
 *
 * Lesion markers are billboarded discs sized in screen space so distant
 * lesions stay clickable; selecting a lesion animates the camera to the
 * centroid offset along the surface normal.
 */

import * as THREE from "three";

import type { App, FocusPose } from "./app.js";
import type { Lesion } from "./types.js";

const FRONT_POSE: FocusPose = { position: [2.4, 1.1, 0], target: [0, 1.1, 0] };

function parseObj(text: string): THREE.BufferGeometry {
  const pos: number[] = [];
  const uv: number[] = [];
  const vs: number[][] = [];
  const vts: number[][] = [];
  for (const line of text.split("\n")) {
    const p = line.trim().split(/\s+/);
    if (p[0] === "v") vs.push([+p[1], +p[2], +p[3]]);
    else if (p[0] === "vt") vts.push([+p[1], +p[2]]);
    else if (p[0] === "f") {
      const corners = p.slice(1).map((c) => c.split("/"));
      for (let k = 1; k + 1 < corners.length; k++) {
        for (const c of [corners[0], corners[k], corners[k + 1]]) {
          const vi = parseInt(c[0], 10) - 1;
          pos.push(...vs[vi]);
          if (c.length > 1 && c[1]) {
            const ti = parseInt(c[1], 10) - 1;
            uv.push(...vts[ti]);
          }
        }
      }
    }
  }
  const geo = new THREE.BufferGeometry();
  geo.setAttribute("position", new THREE.Float32BufferAttribute(pos, 3));
  if (uv.length * 3 === pos.length * 2) {
    geo.setAttribute("uv", new THREE.Float32BufferAttribute(uv, 2));
  }
  geo.computeVertexNormals();
  return geo;
}

function markerTexture(color: string): THREE.Texture {
  const c = document.createElement("canvas");
  c.width = c.height = 64;
  const ctx = c.getContext("2d")!;
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(32, 32, 26, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#ffffff";
  ctx.lineWidth = 6;
  ctx.stroke();
  const tex = new THREE.CanvasTexture(c);
  return tex;
}

export class ModelView {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private mesh: THREE.Mesh | null = null;
  private texturedMaterial: THREE.MeshBasicMaterial | null = null;
  private plainMaterial = new THREE.MeshStandardMaterial({ color: 0xb9aa9b });
  private markers = new Map<number, THREE.Sprite>();
  private markerTex = markerTexture("#1f8fff");
  private activeTex = markerTexture("#ff3b3b");
  private target = new THREE.Vector3(0, 1.1, 0);
  private animFrom: FocusPose | null = null;
  private animTo: FocusPose | null = null;
  private animT = 1;
  private textured = true;
  private orbitState = { dragging: false, x: 0, y: 0 };
  private raycaster = new THREE.Raycaster();

  constructor(
    private readonly app: App,
    container: HTMLElement,
  ) {
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(container.clientWidth, container.clientHeight);
    container.appendChild(this.renderer.domElement);
    this.camera = new THREE.PerspectiveCamera(
      45,
      container.clientWidth / container.clientHeight,
      0.01,
      50,
    );
    this.applyPose(FRONT_POSE);
    this.scene.add(new THREE.AmbientLight(0xffffff, 1.4));
    const sun = new THREE.DirectionalLight(0xffffff, 0.8);
    sun.position.set(2, 3, 2);
    this.scene.add(sun);

    const el = this.renderer.domElement;
    el.addEventListener("mousedown", (e) => {
      this.orbitState = { dragging: true, x: e.clientX, y: e.clientY };
    });
    window.addEventListener("mouseup", () => (this.orbitState.dragging = false));
    window.addEventListener("mousemove", (e) => this.orbit(e));
    el.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.dolly(e.deltaY > 0 ? 1.12 : 1 / 1.12);
    });
    el.addEventListener("click", (e) => this.pickMarker(e));

    this.app.store.subscribe((sel) => this.highlight(sel.lesionId));
    this.animate();
  }

  async loadSession(): Promise<void> {
    const session = this.app.store.selection.session;
    if (!session) return;
    const objText = await (await fetch(this.app.source.meshUrl(session))).text();
    const geometry = parseObj(objText);
    const texture = new THREE.TextureLoader().load(
      this.app.source.textureUrl(session),
    );
    texture.colorSpace = THREE.SRGBColorSpace;
    texture.flipY = true;
    this.texturedMaterial = new THREE.MeshBasicMaterial({ map: texture });
    if (this.mesh) this.scene.remove(this.mesh);
    this.mesh = new THREE.Mesh(geometry, this.texturedMaterial);
    this.scene.add(this.mesh);

    for (const sprite of this.markers.values()) this.scene.remove(sprite);
    this.markers.clear();
    for (const lesion of this.app.lesions) this.addMarker(lesion);
    this.recenter();
  }

  private addMarker(lesion: Lesion): void {
    const mat = new THREE.SpriteMaterial({
      map: this.markerTex,
      sizeAttenuation: false,
      depthTest: false,
    });
    const sprite = new THREE.Sprite(mat);
    sprite.position.set(...lesion.centroid);
    sprite.scale.setScalar(0.035); // screen-space size, resolution independent
    sprite.userData.lesionId = lesion.global_id;
    sprite.renderOrder = 10;
    this.scene.add(sprite);
    this.markers.set(lesion.global_id, sprite);
  }

  private pickMarker(e: MouseEvent): void {
    const rect = this.renderer.domElement.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((e.clientX - rect.left) / rect.width) * 2 - 1,
      -((e.clientY - rect.top) / rect.height) * 2 + 1,
    );
    this.raycaster.setFromCamera(ndc, this.camera);
    const hits = this.raycaster.intersectObjects([...this.markers.values()]);
    const first = hits[0]?.object as THREE.Sprite | undefined;
    if (first) this.app.selectLesionMarker(first.userData.lesionId as number);
  }

  private highlight(activeLesion: number | null): void {
    for (const [gid, sprite] of this.markers) {
      (sprite.material as THREE.SpriteMaterial).map =
        gid === activeLesion ? this.activeTex : this.markerTex;
      (sprite.material as THREE.SpriteMaterial).needsUpdate = true;
    }
  }

  toggleTexture(): void {
    this.textured = !this.textured;
    if (this.mesh && this.texturedMaterial) {
      this.mesh.material = this.textured
        ? this.texturedMaterial
        : this.plainMaterial;
    }
  }

  /** Animate toward a lesion inspection pose. */
  focus(pose: FocusPose): void {
    this.animFrom = {
      position: this.camera.position.toArray() as [number, number, number],
      target: this.target.toArray() as [number, number, number],
    };
    this.animTo = pose;
    this.animT = 0;
  }

  resetToFront(): void {
    this.focus(FRONT_POSE);
  }

  recenter(): void {
    if (!this.mesh) return;
    this.mesh.geometry.computeBoundingBox();
    const box = this.mesh.geometry.boundingBox!;
    const mid = new THREE.Vector3();
    box.getCenter(mid); // mid-abdomen for a standing subject
    this.target.copy(mid);
    this.camera.lookAt(this.target);
  }

  private applyPose(pose: FocusPose): void {
    this.camera.position.set(...pose.position);
    this.target.set(...pose.target);
    this.camera.lookAt(this.target);
  }

  private orbit(e: MouseEvent): void {
    if (!this.orbitState.dragging) return;
    const dxPx = e.clientX - this.orbitState.x;
    const dyPx = e.clientY - this.orbitState.y;
    this.orbitState = { dragging: true, x: e.clientX, y: e.clientY };
    if (e.shiftKey) {
      this.pan(dxPx, dyPx);
      return;
    }
    const rel = this.camera.position.clone().sub(this.target);
    const sph = new THREE.Spherical().setFromVector3(rel);
    sph.theta -= dxPx * 0.008;
    sph.phi = Math.min(Math.PI - 0.05, Math.max(0.05, sph.phi + dyPx * 0.008));
    this.camera.position.copy(
      new THREE.Vector3().setFromSpherical(sph).add(this.target),
    );
    this.camera.lookAt(this.target);
  }

  /** Shift-drag: translate camera and target in the view plane. */
  private pan(dxPx: number, dyPx: number): void {
    const dist = this.camera.position.distanceTo(this.target);
    const scale = dist * 0.0012;
    const right = new THREE.Vector3()
      .setFromMatrixColumn(this.camera.matrix, 0)
      .multiplyScalar(-dxPx * scale);
    const up = new THREE.Vector3()
      .setFromMatrixColumn(this.camera.matrix, 1)
      .multiplyScalar(dyPx * scale);
    const shift = right.add(up);
    this.camera.position.add(shift);
    this.target.add(shift);
    this.camera.lookAt(this.target);
  }

  private dolly(factor: number): void {
    const rel = this.camera.position.clone().sub(this.target);
    this.camera.position.copy(rel.multiplyScalar(factor).add(this.target));
  }

  private animate = (): void => {
    requestAnimationFrame(this.animate);
    if (this.animTo && this.animT < 1) {
      this.animT = Math.min(1, this.animT + 0.08);
      const t = this.animT * this.animT * (3 - 2 * this.animT);
      const from = this.animFrom!;
      const lerp = (a: number, b: number) => a + (b - a) * t;
      this.camera.position.set(
        lerp(from.position[0], this.animTo.position[0]),
        lerp(from.position[1], this.animTo.position[1]),
        lerp(from.position[2], this.animTo.position[2]),
      );
      this.target.set(
        lerp(from.target[0], this.animTo.target[0]),
        lerp(from.target[1], this.animTo.target[1]),
        lerp(from.target[2], this.animTo.target[2]),
      );
      this.camera.lookAt(this.target);
    }
    this.renderer.render(this.scene, this.camera);
  };
}
