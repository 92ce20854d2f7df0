/** Pole-based thumbnail filters.
 *
 * Poles are lettered A..O around the rig circle with A facing the subject;
 * the front arc is C, B, A, O, N (two poles either side of A).
 */

import type { ImageEntry } from "./types.js";

export const POLE_VIEWS: Record<string, string[]> = {
  Front: ["C", "B", "A", "O", "N"],
  Right: ["B", "C", "D", "E", "F"],
  Back: ["F", "G", "H", "I", "J"],
  Left: ["K", "L", "M", "N", "O"],
};

export type ViewName = keyof typeof POLE_VIEWS | null;

export function filterByView(
  images: ImageEntry[],
  view: string | null,
): ImageEntry[] {
  if (!view) return [...images];
  const poles = POLE_VIEWS[view];
  if (!poles) throw new Error(`unknown view filter ${view}`);
  return images.filter((img) => poles.includes(img.pole));
}
