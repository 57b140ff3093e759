/** View state and its pure transitions: the rendered UI is a function of
 * (server metadata, this state). */

import type { DirectionInfo, Meta } from "./api.js";

export interface ViewState {
  selected: number | null;
  t: number;
  seed: number;
  stripMode: boolean;
}

export function initialState(): ViewState {
  return { selected: null, t: 0, seed: 0, stripMode: false };
}

export function clampT(t: number, meta: Meta): number {
  const limit = meta.t_limit;
  return Math.min(limit, Math.max(-limit, t));
}

/** Slider configuration comes from the service metadata alone. */
export function sliderConfig(meta: Meta): { min: number; max: number; step: number } {
  return { min: -meta.t_limit, max: meta.t_limit, step: meta.t_limit / 200 };
}

/** Selecting a direction always returns to the unshifted view (t = 0). */
export function selectDirection(state: ViewState, id: number): ViewState {
  return { ...state, selected: id, t: 0 };
}

export function setMagnitude(state: ViewState, t: number, meta: Meta): ViewState {
  return { ...state, t: clampT(t, meta) };
}

export function setSeed(state: ViewState, seed: number): ViewState {
  return { ...state, seed: Math.max(0, Math.floor(seed)) };
}

export function toggleStrip(state: ViewState): ViewState {
  return { ...state, stripMode: !state.stripMode };
}

/** Sidebar ordering: by method name, then score descending, then id. */
export function sortDirections(dirs: DirectionInfo[]): DirectionInfo[] {
  return [...dirs].sort((a, b) => {
    if (a.method !== b.method) return a.method < b.method ? -1 : 1;
    const sa = a.score ?? -Infinity;
    const sb = b.score ?? -Infinity;
    if (sa !== sb) return sb - sa;
    return a.id - b.id;
  });
}
