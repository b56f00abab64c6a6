/**
 * Thin WebSocket client for the service: opens /session, sends the start
 * frame and binary chunks, and feeds parsed frames to a handler in order.
 */

import { encodeChunk, parseServerFrame, ServerFrame, StartFrame } from "./protocol.js";

export interface ServiceClientOptions {
  url: string;               // ws://host:port/session
  tasks: string[];
  sampleRate: number;
  onFrame: (frame: ServerFrame) => void;
  onClose?: () => void;
}

export class ServiceClient {
  private ws: WebSocket | null = null;
  private readonly opts: ServiceClientOptions;

  constructor(opts: ServiceClientOptions) {
    this.opts = opts;
  }

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const ws = new WebSocket(this.opts.url);
      ws.binaryType = "arraybuffer";
      ws.onopen = () => {
        const start: StartFrame = {
          type: "start",
          tasks: this.opts.tasks,
          sample_rate: this.opts.sampleRate,
        };
        ws.send(JSON.stringify(start));
        resolve();
      };
      ws.onmessage = (ev) => {
        if (typeof ev.data === "string") {
          this.opts.onFrame(parseServerFrame(ev.data));
        }
      };
      ws.onerror = () => reject(new Error("websocket error"));
      ws.onclose = () => this.opts.onClose?.();
      this.ws = ws;
    });
  }

  sendChunk(samples: Float32Array): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(encodeChunk(samples));
    }
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }
}

export async function fetchModels(baseUrl: string) {
  const resp = await fetch(`${baseUrl}/models`);
  if (!resp.ok) throw new Error(`GET /models failed: ${resp.status}`);
  return (await resp.json()).models;
}
