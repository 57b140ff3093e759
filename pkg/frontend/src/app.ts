/** DOM wiring for the direction inspector. All protocol/state logic lives in
 * the pure modules; this file only connects it to elements. */

import { ApiClient, type AnnotationDraft, type DirectionInfo, type FieldErrors,
         type Meta, validateDraft } from "./api.js";
import { errorBannerHtml, annotationRowsHtml, sidebarHtml } from "./render.js";
import { FrameScrubber } from "./scrub.js";
import { initialState, selectDirection, setMagnitude, setSeed, sliderConfig,
         toggleStrip, type ViewState } from "./state.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

export async function startApp(): Promise<void> {
  const api = new ApiClient((u, i) => fetch(u, i));
  let meta: Meta;
  let directions: DirectionInfo[];
  try {
    meta = await api.getMeta();
    directions = await api.getDirections();
  } catch (err) {
    $("banner").innerHTML = errorBannerHtml(
      `cannot reach the inspection service: ${(err as Error).message}`);
    $<HTMLButtonElement>("retry").hidden = false;
    $("retry").onclick = () => { location.reload(); };
    return;
  }

  let state: ViewState = initialState();
  const frame = $<HTMLImageElement>("frame");
  const slider = $<HTMLInputElement>("t-slider");
  const tValue = $("t-value");
  const banner = $("banner");

  const cfg = sliderConfig(meta);
  slider.min = String(cfg.min);
  slider.max = String(cfg.max);
  slider.step = String(cfg.step);

  const scrubber = new FrameScrubber({
    fetchFrame: (url) => api.fetchFrame(url),
    onFrame: (_url, blob) => {
      const next = URL.createObjectURL(blob);
      const prev = frame.src;
      frame.src = next;
      if (prev.startsWith("blob:")) URL.revokeObjectURL(prev);
      banner.innerHTML = "";
    },
    onError: (err) => { banner.innerHTML = errorBannerHtml(err.message); },
  });

  function requestView(): void {
    if (state.selected === null) return;
    const url = state.stripMode
      ? api.stripUrl(state.selected, state.seed, 9, meta.magnitude_range)
      : api.renderUrl(state.selected, state.t, state.seed);
    scrubber.request(url);
  }

  function paintSidebar(): void {
    $("sidebar").innerHTML = sidebarHtml(directions, state.selected);
    for (const li of document.querySelectorAll<HTMLElement>("li.direction")) {
      li.onclick = () => {
        state = selectDirection(state, Number(li.dataset.id));
        slider.value = "0";
        tValue.textContent = "0.000";
        draft.direction_id = state.selected as number;
        paintSidebar();
        requestView();
      };
    }
  }

  slider.oninput = () => {
    state = setMagnitude(state, Number(slider.value), meta);
    tValue.textContent = state.t.toFixed(3);
    requestView();
  };
  $<HTMLInputElement>("seed").onchange = (e) => {
    state = setSeed(state, Number((e.target as HTMLInputElement).value));
    requestView();
  };
  $<HTMLInputElement>("strip-mode").onchange = () => {
    state = toggleStrip(state);
    frame.classList.toggle("strip", state.stripMode);
    requestView();
  };

  // -- annotations ----------------------------------------------------------

  const draft: AnnotationDraft = {
    direction_id: -1, label: "", interpretable: true, quality: 3,
    t_min: -meta.magnitude_range, t_max: meta.magnitude_range, annotator: "",
  };

  function showFieldErrors(errors: FieldErrors): void {
    for (const el of document.querySelectorAll<HTMLElement>(".field-error")) {
      el.textContent = "";
    }
    for (const [field, msg] of Object.entries(errors)) {
      const slot = document.getElementById(`err-${field}`);
      if (slot) slot.textContent = msg;
      else banner.innerHTML = errorBannerHtml(`${field}: ${msg}`);
    }
  }

  async function refreshTable(): Promise<void> {
    const records = await api.listAnnotations();
    $("annotation-rows").innerHTML = annotationRowsHtml(records);
  }

  $<HTMLButtonElement>("submit-annotation").onclick = async () => {
    draft.label = $<HTMLInputElement>("ann-label").value;
    draft.quality = Number($<HTMLInputElement>("ann-quality").value);
    draft.interpretable = $<HTMLInputElement>("ann-interpretable").checked;
    draft.t_min = Number($<HTMLInputElement>("ann-tmin").value);
    draft.t_max = Number($<HTMLInputElement>("ann-tmax").value);
    draft.annotator = $<HTMLInputElement>("ann-annotator").value;
    const clientErrors = validateDraft(draft);
    if (Object.keys(clientErrors).length > 0) {
      showFieldErrors(clientErrors);
      return;
    }
    const result = await api.submitAnnotation(draft);
    if (!result.ok) {
      showFieldErrors(result.fieldErrors);
      return;
    }
    showFieldErrors({});
    await refreshTable();  // table reflects server truth, never local state
  };

  $<HTMLButtonElement>("export-csv").onclick = async () => {
    const blob = await api.exportCsv();
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "annotations.csv";
    a.click();
    URL.revokeObjectURL(a.href);
  };

  paintSidebar();
  await refreshTable();
}

startApp();
