// Canvas tracing tool: pick cell centers, trace bodies, set long axes,
// trace neurites and branches, mark terminations, probe neurite diameters,
// and save to the annotation service.  Color semantics: centers are red
// numbered stars, bodies yellow with fill, long axes white, neurites
// magenta (self-terminated) or cyan (connected), branches red, diameter
// circles and trigger pixels green.

import {
  ApiClient,
  clearLocalDraft,
  loadLocalDraft,
  saveLocalDraft,
  type ServiceConfig,
  type VideoInfo,
} from "./api.js";
import { gridFromImageData, neuriteDiameter, type DiameterResult } from "./diameter.js";
import type { Point } from "./geometry.js";
import type { AnnotationDoc, NeuriteNode } from "./schema.js";
import { EditError, Session } from "./session.js";

type Mode = "center" | "body" | "axis" | "neurite" | "branch" | "terminate" | "diameter";

const api = new ApiClient("");
const storage: Storage = window.localStorage;

const canvas = document.getElementById("frame") as HTMLCanvasElement;
const ctx = canvas.getContext("2d", { willReadFrequently: true })!;
const videoSelect = document.getElementById("video-select") as HTMLSelectElement;
const frameSlider = document.getElementById("frame-slider") as HTMLInputElement;
const frameLabel = document.getElementById("frame-label") as HTMLSpanElement;
const statusLine = document.getElementById("status") as HTMLDivElement;
const previewLine = document.getElementById("preview") as HTMLDivElement;
const dirtyBadge = document.getElementById("dirty") as HTMLSpanElement;
const labelSelect = document.getElementById("cell-label") as HTMLSelectElement;
const terminationSelect = document.getElementById("termination") as HTMLSelectElement;

let session: Session | null = null;
let config: ServiceConfig = { px_per_micron: 1.1939, contrast_cutoff: 0.04 };
let videos: VideoInfo[] = [];
let mode: Mode = "center";
let activeCell: string | null = null;
let activeTrace: string | null = null;
let axisStart: Point | null = null;
let frameImage: HTMLImageElement | null = null;
let diameterOverlay: { at: Point; result: DiameterResult | null } | null = null;

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.className = isError ? "error" : "";
}

function canvasPoint(event: MouseEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return [
    ((event.clientX - rect.left) / rect.width) * canvas.width,
    ((event.clientY - rect.top) / rect.height) * canvas.height,
  ];
}

function drawStar(p: Point, index: number): void {
  ctx.strokeStyle = "red";
  ctx.fillStyle = "red";
  ctx.lineWidth = 1.5;
  for (let k = 0; k < 5; k++) {
    const angle = (k * 4 * Math.PI) / 5 - Math.PI / 2;
    const x = p[0] + 6 * Math.cos(angle);
    const y = p[1] + 6 * Math.sin(angle);
    if (k === 0) {
      ctx.beginPath();
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  }
  ctx.closePath();
  ctx.stroke();
  ctx.font = "12px sans-serif";
  ctx.fillText(String(index + 1), p[0] + 8, p[1] - 8);
}

function drawPolyline(points: readonly Point[], color: string, width = 2): void {
  if (points.length === 0) {
    return;
  }
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  ctx.moveTo(points[0][0], points[0][1]);
  for (const [x, y] of points.slice(1)) {
    ctx.lineTo(x, y);
  }
  ctx.stroke();
}

function drawTrace(node: NeuriteNode, isBranch: boolean): void {
  const color = isBranch ? "red" : node.termination === "connected" ? "cyan" : "magenta";
  drawPolyline(node.points, color);
  for (const branch of node.branches ?? []) {
    drawTrace(branch, true);
  }
}

function redraw(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (frameImage) {
    ctx.drawImage(frameImage, 0, 0);
  }
  if (!session) {
    return;
  }
  session.cells.forEach((cell, i) => {
    if (cell.polygon.length >= 2) {
      ctx.fillStyle = "rgba(255, 255, 0, 0.25)";
      ctx.strokeStyle = "yellow";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(cell.polygon[0][0], cell.polygon[0][1]);
      for (const [x, y] of cell.polygon.slice(1)) {
        ctx.lineTo(x, y);
      }
      ctx.closePath();
      ctx.fill();
      ctx.stroke();
    }
    if (cell.long_axis) {
      drawPolyline(cell.long_axis, "white", 2);
    }
    drawStar(cell.center, i);
  });
  for (const neurite of session.neurites) {
    drawTrace(neurite, false);
  }
  if (diameterOverlay) {
    const { at, result } = diameterOverlay;
    ctx.strokeStyle = "lime";
    ctx.fillStyle = "lime";
    ctx.lineWidth = 1.5;
    ctx.setLineDash(result ? [] : [4, 4]);
    ctx.beginPath();
    ctx.arc(at[0], at[1], result ? result.radiusPx : 20, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.setLineDash([]);
    for (const [tx, ty] of result?.triggerPoints ?? []) {
      ctx.fillRect(tx - 1.5, ty - 1.5, 3, 3);
    }
  }
  dirtyBadge.style.display = session.dirty ? "inline" : "none";
}

function updatePreview(): void {
  if (!session || !activeCell) {
    previewLine.textContent = "";
    return;
  }
  const preview = session.bodyPreview(activeCell);
  previewLine.textContent = preview
    ? `body ${activeCell}: area ${preview.areaUm2.toFixed(3)} um^2, ` +
      `perimeter ${preview.perimeterUm.toFixed(3)} um`
    : `body ${activeCell}: trace at least 3 points`;
}

function probeDiameter(at: Point): void {
  if (!frameImage) {
    return;
  }
  const image = ctx.getImageData(0, 0, canvas.width, canvas.height);
  const result = neuriteDiameter(
    gridFromImageData(image),
    at,
    config.px_per_micron,
    config.contrast_cutoff,
  );
  diameterOverlay = { at, result };
  setStatus(
    result
      ? `diameter ${result.diameterUm.toFixed(3)} um (radius ${result.radiusPx.toFixed(2)} px)`
      : "no contrast cutoff within 20 px (dashed circle = max radius)",
    result === null,
  );
}

function handleClick(event: MouseEvent): void {
  if (!session) {
    return;
  }
  const p = canvasPoint(event);
  try {
    switch (mode) {
      case "center":
        activeCell = session.addCell(p, labelSelect.value as "neuron" | "dead_cell");
        setStatus(`placed center for ${activeCell}`);
        break;
      case "body":
        if (!activeCell) {
          throw new EditError("place a center first");
        }
        session.addBodyPoint(activeCell, p);
        break;
      case "axis":
        if (!activeCell) {
          throw new EditError("place a center first");
        }
        if (!axisStart) {
          axisStart = p;
          setStatus("long axis: click the second endpoint");
        } else {
          session.setLongAxis(activeCell, axisStart, p);
          axisStart = null;
          setStatus(`long axis set for ${activeCell}`);
        }
        break;
      case "neurite":
        if (activeTrace === null) {
          if (!activeCell) {
            throw new EditError("place a center first");
          }
          activeTrace = session.addNeurite(activeCell, p);
          setStatus(`tracing neurite ${activeTrace} (double-click to finish)`);
        } else {
          session.addNeuritePoint(activeTrace, p);
        }
        break;
      case "branch":
        if (activeTrace === null) {
          throw new EditError("select a neurite first (finish tracing one)");
        }
        if (event.shiftKey) {
          activeTrace = session.addBranch(activeTrace, p);
          setStatus(`tracing branch ${activeTrace}`);
        } else {
          session.addNeuritePoint(activeTrace, p);
        }
        break;
      case "terminate": {
        if (activeTrace === null) {
          throw new EditError("select a neurite first");
        }
        const termination = terminationSelect.value as "self_terminated" | "connected";
        const target = termination === "connected" ? nearestCellId(p) : undefined;
        session.setTermination(activeTrace, termination, target);
        setStatus(`marked ${activeTrace} ${termination}`);
        break;
      }
      case "diameter":
        probeDiameter(p);
        break;
    }
  } catch (err) {
    if (err instanceof EditError) {
      setStatus(err.message, true);
    } else {
      throw err;
    }
  }
  updatePreview();
  redraw();
  persistDraft();
}

function nearestCellId(p: Point): string | undefined {
  if (!session || session.cells.length === 0) {
    return undefined;
  }
  let best: { id: string; d: number } | null = null;
  for (const cell of session.cells) {
    const d = Math.hypot(cell.center[0] - p[0], cell.center[1] - p[1]);
    if (!best || d < best.d) {
      best = { id: cell.id, d };
    }
  }
  return best?.id;
}

function persistDraft(): void {
  if (session?.dirty) {
    saveLocalDraft(storage, session.videoId, JSON.stringify(session.toJSON()));
  }
}

async function save(): Promise<void> {
  if (!session) {
    return;
  }
  const problems = session.validate();
  if (problems.length > 0) {
    setStatus(`cannot save: ${problems[0].path}: ${problems[0].message}`, true);
    return;
  }
  const body = JSON.stringify(session.toJSON());
  try {
    await api.saveAnnotation(session.videoId, body);
    session.markSaved();
    clearLocalDraft(storage, session.videoId);
    setStatus("saved");
    redraw();
  } catch (err) {
    const detail = err instanceof Error ? err.message : String(err);
    const path = (err as { jsonPath?: string }).jsonPath;
    setStatus(path ? `rejected at ${path}: ${detail}` : `save failed: ${detail} (draft kept locally)`, true);
    persistDraft();
  }
}

async function loadFrame(): Promise<void> {
  if (!session) {
    return;
  }
  const video = videos.find((v) => v.id === session!.videoId);
  if (!video) {
    return;
  }
  const img = new Image();
  img.src = api.frameUrl(video.id, session.frameIndex);
  await img.decode();
  frameImage = img;
  canvas.width = video.width;
  canvas.height = video.height;
  frameLabel.textContent = `frame ${session.frameIndex + 1}/${video.frame_count}`;
  diameterOverlay = null;
  redraw();
}

async function openVideo(videoId: string): Promise<void> {
  session = new Session(videoId, config.px_per_micron);
  activeCell = null;
  activeTrace = null;
  const local = loadLocalDraft(storage, videoId);
  if (local) {
    session.loadDocument(JSON.parse(local) as AnnotationDoc);
    session.dirty = true;
    setStatus("restored unsaved local draft");
  } else {
    const saved = await api.getAnnotation(videoId);
    if (saved) {
      session.loadDocument(saved);
      setStatus("loaded saved annotations");
    } else {
      setStatus("new annotation");
    }
  }
  const video = videos.find((v) => v.id === videoId);
  frameSlider.max = String((video?.frame_count ?? 1) - 1);
  frameSlider.value = "0";
  session.frameIndex = 0;
  await loadFrame();
  updatePreview();
}

async function init(): Promise<void> {
  config = await api.getConfig();
  videos = await api.listVideos();
  videoSelect.innerHTML = "";
  for (const video of videos) {
    const option = document.createElement("option");
    option.value = video.id;
    option.textContent = `${video.id} (${video.frame_count} frames)`;
    videoSelect.appendChild(option);
  }
  if (videos.length > 0) {
    await openVideo(videos[0].id);
  } else {
    setStatus("no videos found in the frames directory", true);
  }
}

canvas.addEventListener("click", handleClick);
canvas.addEventListener("dblclick", () => {
  activeTrace = null;
  setStatus("finished trace");
});
videoSelect.addEventListener("change", () => void openVideo(videoSelect.value));
frameSlider.addEventListener("input", () => {
  if (session) {
    session.frameIndex = parseInt(frameSlider.value, 10);
    void loadFrame();
  }
});
for (const button of document.querySelectorAll<HTMLButtonElement>("[data-mode]")) {
  button.addEventListener("click", () => {
    mode = button.dataset.mode as Mode;
    axisStart = null;
    setStatus(`mode: ${mode}`);
  });
}
document.getElementById("undo")!.addEventListener("click", () => {
  if (session?.undo()) {
    updatePreview();
    redraw();
    persistDraft();
    setStatus("undid last edit");
  }
});
document.getElementById("save")!.addEventListener("click", () => void save());

void init();
