/** DOM wiring for the reader view and the operator report view. */

import { ApiClient, Label } from "./api.js";
import { ClassifyFlow } from "./flow.js";
import { decodePgm, toRgbaScaled } from "./pgm.js";
import { kappaLines, progressSummary, readerTableView } from "./report.js";

const api = new ApiClient("");
let flow: ClassifyFlow | null = null;
let pixelated = true;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function show(id: string, visible: boolean): void {
  el(id).style.display = visible ? "" : "none";
}

function renderImage(base64: string): void {
  const image = decodePgm(base64);
  const factor = pixelated ? Math.max(1, Math.floor(256 / image.width)) : 1;
  const canvas = el<HTMLCanvasElement>("image-canvas");
  canvas.width = image.width * factor;
  canvas.height = image.height * factor;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const rgba = toRgbaScaled(image, factor);
  ctx.putImageData(new ImageData(rgba, canvas.width, canvas.height), 0, 0);
  canvas.style.imageRendering = pixelated ? "pixelated" : "auto";
}

function paint(): void {
  if (!flow) return;
  const state = flow.state;
  show("classify-view", state.phase === "classify");
  show("done-view", state.phase === "done");
  show("error-banner", state.phase === "error");
  if (state.phase === "classify" && state.item?.image_pgm_b64) {
    renderImage(state.item.image_pgm_b64);
    el("progress").textContent = `${state.answered} / ${state.total} answered`;
  }
  if (state.phase === "done") {
    el("done-text").textContent =
      `You classified ${state.answered} of ${state.total} images. Thank you.`;
  }
  if (state.phase === "error") {
    el("error-text").textContent = state.errorMessage ?? "request failed";
  }
}

async function submitLabel(label: Label): Promise<void> {
  if (!flow) return;
  await flow.submit(label);
  paint();
}

async function startSession(): Promise<void> {
  const sessionId = el<HTMLInputElement>("session-input").value.trim();
  const readerId = el<HTMLInputElement>("reader-input").value.trim();
  if (!sessionId || !readerId) return;
  flow = new ClassifyFlow(api, sessionId, readerId);
  show("setup-view", false);
  await flow.advance();
  paint();
}

async function showReport(): Promise<void> {
  const sessionId = el<HTMLInputElement>("session-input").value.trim();
  if (!sessionId) return;
  const unblind = el<HTMLInputElement>("unblind-checkbox").checked;
  let report;
  try {
    report = await api.report(sessionId, unblind);
  } catch (err) {
    show("report-view", true);
    el("report-progress").innerHTML = "";
    el("report-tables").innerHTML = "";
    el("report-kappa").innerHTML =
      `<li class="error">report unavailable: ${err instanceof Error ? err.message : err}</li>`;
    return;
  }
  show("setup-view", false);
  show("report-view", true);
  el("report-progress").innerHTML = progressSummary(report)
    .map((line) => `<li>${line}</li>`)
    .join("");
  const container = el("report-tables");
  container.innerHTML = "";
  for (const reader of report.readers) {
    const view = readerTableView(report, reader);
    const caption = view.partial ? `${reader} (partial)` : reader;
    const header = view.groups.map((g) => `<th>${g}</th>`).join("");
    const body = view.rows
      .map(
        (row) =>
          `<tr><td>${row.title}</td>${row.cells.map((c) => `<td>${c}</td>`).join("")}</tr>`,
      )
      .join("");
    container.insertAdjacentHTML(
      "beforeend",
      `<h3>${caption}</h3><table><tr><th></th>${header}</tr>${body}</table>`,
    );
  }
  el("report-kappa").innerHTML =
    kappaLines(report).map((line) => `<li>${line}</li>`).join("") ||
    "<li>waiting for a second completed reader</li>";
}

export function init(): void {
  el("start-button").addEventListener("click", () => void startSession());
  el("report-button").addEventListener("click", () => void showReport());
  el("real-button").addEventListener("click", () => void submitLabel("real"));
  el("fake-button").addEventListener("click", () => void submitLabel("fake"));
  el("retry-button").addEventListener("click", async () => {
    if (flow) {
      await flow.retry();
      paint();
    }
  });
  el<HTMLInputElement>("pixelated-checkbox").addEventListener("change", (event) => {
    pixelated = (event.target as HTMLInputElement).checked;
    paint();
  });
  document.addEventListener("keydown", (event) => {
    if (!flow || flow.state.phase !== "classify") return;
    const key = event.key.toLowerCase();
    if (key === "r") void submitLabel("real");
    if (key === "f") void submitLabel("fake");
  });
}

if (typeof document !== "undefined" && document.getElementById("start-button")) {
  init();
}
