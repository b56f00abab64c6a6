/**
 * Wire types for the voiceclass service socket (see docs/protocol.md in the
 * repository root). Text frames are JSON with a `type` tag; audio chunks go
 * out as binary little-endian 16-bit PCM.
 */

export interface StartFrame {
  type: "start";
  tasks: string[];
  sample_rate: number;
}

export interface ChunkMetaFrame {
  type: "chunk_meta";
  chunk_index: number;
}

export interface ModelInfo {
  task: string;
  d: number;
  frequencies_hz: number[];
  class_labels: string[];
  fingerprint: string;
}

export interface ModelInfoFrame {
  type: "model_info";
  session_id: string;
  models: Record<string, ModelInfo>;
}

export interface PosteriorFrame {
  type: "posterior";
  session_id: string;
  chunk_index: number;
  task: string;
  instant: Record<string, number>;
  averaged: Record<string, number>;
  map_label: string;
}

export interface SilenceFrame {
  type: "silence";
  session_id: string;
  chunk_index: number;
}

export interface ErrorFrame {
  type: "error";
  message: string;
  session_id?: string | null;
}

export type ServerFrame = ModelInfoFrame | PosteriorFrame | SilenceFrame | ErrorFrame;

export function parseServerFrame(text: string): ServerFrame {
  const obj = JSON.parse(text);
  switch (obj.type) {
    case "model_info":
    case "posterior":
    case "silence":
    case "error":
      return obj as ServerFrame;
    default:
      throw new Error(`unknown frame type: ${obj.type}`);
  }
}

/** Convert float samples in [-1, 1] to the service's binary chunk format. */
export function encodeChunk(samples: Float32Array): ArrayBuffer {
  const out = new Int16Array(samples.length);
  for (let i = 0; i < samples.length; i++) {
    const v = Math.max(-1, Math.min(1, samples[i]));
    out[i] = Math.max(-32768, Math.min(32767, Math.round(v * 32768)));
  }
  return out.buffer;
}
