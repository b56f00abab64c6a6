/**
 * App bootstrap: wires capture -> chunker -> service client -> SessionView,
 * and renders gauges, the live log-log spectrum with model frequency
 * markers, and the attempt history onto canvases.
 */

import { startCapture, CaptureHandle } from "./audio.js";
import { Chunker } from "./chunker.js";
import { ServiceClient } from "./client.js";
import { logLogPoints } from "./spectrum.js";
import { SessionView } from "./session.js";

const SERVICE_RATE = 48_000;

const view = new SessionView();
let client: ServiceClient | null = null;
let capture: CaptureHandle | null = null;
let lastChunk: Float32Array | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function renderGauges(): void {
  const host = $("gauges");
  host.innerHTML = "";
  host.style.opacity = view.dimmed ? "0.4" : "1.0";
  for (const [task, gauge] of Object.entries(view.gauges)) {
    const row = document.createElement("div");
    row.className = "task-row";
    const title = document.createElement("span");
    title.textContent = `${task}: ${gauge.mapLabel}`;
    row.appendChild(title);
    for (const [label, p] of Object.entries(gauge.averaged)) {
      const bar = document.createElement("div");
      bar.className = "gauge";
      const fill = document.createElement("div");
      fill.className = "fill";
      fill.style.width = `${Math.round(p * 100)}%`;
      fill.title = `${label}: ${(p * 100).toFixed(1)}%`;
      const tag = document.createElement("span");
      tag.textContent = `${label} ${(p * 100).toFixed(0)}%`;
      bar.appendChild(fill);
      bar.appendChild(tag);
      row.appendChild(bar);
    }
    host.appendChild(row);
  }
  $("status").textContent = view.lastError
    ? `error: ${view.lastError}`
    : `${view.connection}${view.sessionId ? ` (${view.sessionId.slice(0, 8)})` : ""}`;
}

function renderSpectrum(): void {
  const canvas = $("spectrum") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx || !lastChunk) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const pts = logLogPoints(lastChunk, SERVICE_RATE);
  const lo = Math.log10(50);
  const hi = Math.log10(20_000);
  const x = (logF: number) => ((logF - lo) / (hi - lo)) * width;
  // model frequency markers (dashed verticals)
  ctx.strokeStyle = "#c04040";
  ctx.setLineDash([4, 4]);
  for (const freqs of Object.values(view.markers())) {
    for (const f of freqs) {
      const px = x(Math.log10(f));
      ctx.beginPath();
      ctx.moveTo(px, 0);
      ctx.lineTo(px, height);
      ctx.stroke();
    }
  }
  ctx.setLineDash([]);
  // spectrum trace
  const logIs = pts.map((p) => p.logI);
  const iLo = Math.min(...logIs);
  const iHi = Math.max(...logIs);
  ctx.strokeStyle = "#2060c0";
  ctx.beginPath();
  pts.forEach((p, i) => {
    const px = x(p.logF);
    const py = height - ((p.logI - iLo) / (iHi - iLo + 1e-9)) * height;
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function renderHistory(): void {
  const host = $("history");
  host.innerHTML = "";
  view.history.forEach((rec, i) => {
    const li = document.createElement("li");
    const parts = Object.entries(rec.averaged).map(([task, probs]) => {
      const best = Object.entries(probs).sort((a, b) => b[1] - a[1])[0];
      return `${task}: ${best[0]} ${(best[1] * 100).toFixed(0)}%`;
    });
    li.textContent = `attempt ${i + 1} - ${parts.join(", ")}`;
    host.appendChild(li);
  });
}

async function start(): Promise<void> {
  const base = (($("service-url") as HTMLInputElement).value || "http://127.0.0.1:8000")
    .replace(/\/$/, "");
  const wsUrl = base.replace(/^http/, "ws") + "/session";
  view.connection = "connecting";
  renderGauges();

  const chunker = new Chunker(SERVICE_RATE, (chunk) => {
    lastChunk = chunk;
    client?.sendChunk(chunk);
    renderSpectrum();
  });
  client = new ServiceClient({
    url: wsUrl,
    tasks: ["gender", "choral"],
    sampleRate: SERVICE_RATE,
    onFrame: (frame) => {
      view.apply(frame);
      renderGauges();
    },
    onClose: () => {
      view.connection = "idle";
      renderGauges();
    },
  });
  await client.connect();
  capture = await startCapture(chunker, (state) => {
    $("status").textContent = state === "denied" ? "microphone denied" : "capturing";
  });
}

function stop(): void {
  capture?.stop();
  capture = null;
  client?.close();
  client = null;
  view.endAttempt();
  view.connection = "idle";
  renderGauges();
  renderHistory();
}

export function wireUi(): void {
  $("start").addEventListener("click", () => {
    void start().catch((err) => {
      view.connection = "error";
      view.lastError = String(err);
      renderGauges();
    });
  });
  $("stop").addEventListener("click", stop);
}

if (typeof document !== "undefined" && document.getElementById("start")) {
  wireUi();
}
