/** Pure HTML fragments; kept DOM-free so they are directly testable. */

import type { DirectionInfo } from "./api.js";
import { sortDirections } from "./state.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function sidebarHtml(dirs: DirectionInfo[], selected: number | null): string {
  if (dirs.length === 0) {
    return '<p class="placeholder">no directions loaded</p>';
  }
  const items = sortDirections(dirs).map((d) => {
    const cls = d.id === selected ? "direction selected" : "direction";
    const score = d.score === null ? "" : ` <span class="score">${d.score.toFixed(3)}</span>`;
    return `<li class="${cls}" data-id="${d.id}">` +
      `<span class="label">${esc(d.label)}</span>` +
      `<span class="method">${esc(d.method)}</span>${score}</li>`;
  });
  return `<ul class="directions">${items.join("")}</ul>`;
}

export function annotationRowsHtml(records: Record<string, unknown>[]): string {
  if (records.length === 0) {
    return '<tr><td colspan="6" class="placeholder">no annotations yet</td></tr>';
  }
  return records.map((r) =>
    `<tr><td>${esc(String(r.method ?? ""))}</td>` +
    `<td>${Number(r.direction_id)}</td>` +
    `<td>${esc(String(r.label ?? ""))}</td>` +
    `<td>${r.interpretable ? "yes" : "no"}</td>` +
    `<td>${Number(r.quality)}</td>` +
    `<td>[${Number(r.t_min).toFixed(2)}, ${Number(r.t_max).toFixed(2)}]</td></tr>`,
  ).join("");
}

export function errorBannerHtml(message: string | null): string {
  return message === null ? "" : `<div class="banner error">${esc(message)}</div>`;
}
