/**
 * SessionView: the single source of truth the UI renders from.
 * It consumes server frames in order; it computes no classification of
 * its own. Gauges always hold normalized probabilities straight from the
 * frames; `silence` dims the display without clearing the last values;
 * attempt history records the final averaged posterior of each capture.
 */

import {
  ModelInfo,
  ServerFrame,
} from "./protocol.js";

export type ConnectionState = "idle" | "connecting" | "live" | "error";

export interface TaskGauge {
  instant: Record<string, number>;
  averaged: Record<string, number>;
  mapLabel: string;
  chunkIndex: number;
}

export interface AttemptRecord {
  endedAtChunk: number;
  averaged: Record<string, Record<string, number>>; // task -> probs
}

export class SessionView {
  connection: ConnectionState = "idle";
  sessionId: string | null = null;
  models: Record<string, ModelInfo> = {};
  gauges: Record<string, TaskGauge> = {};
  dimmed = false;
  lastError: string | null = null;
  history: AttemptRecord[] = [];
  private lastChunkIndex = -1;

  /** Apply one server frame; returns the frame kind for callers that care. */
  apply(frame: ServerFrame): string {
    switch (frame.type) {
      case "model_info":
        this.sessionId = frame.session_id;
        this.models = frame.models;
        this.connection = "live";
        this.lastError = null;
        break;
      case "posterior": {
        this.dimmed = false;
        this.lastChunkIndex = frame.chunk_index;
        this.gauges[frame.task] = {
          instant: frame.instant,
          averaged: frame.averaged,
          mapLabel: frame.map_label,
          chunkIndex: frame.chunk_index,
        };
        break;
      }
      case "silence":
        // keep the last values on screen, just dim them
        this.dimmed = true;
        this.lastChunkIndex = frame.chunk_index;
        break;
      case "error":
        this.connection = "error";
        this.lastError = frame.message;
        break;
    }
    return frame.type;
  }

  /** Gauge value (averaged probability) for one task/label, 0 if unknown. */
  gaugeValue(task: string, label: string): number {
    return this.gauges[task]?.averaged[label] ?? 0;
  }

  /** Frequency markers for the spectrum display, one entry per task. */
  markers(): Record<string, number[]> {
    const out: Record<string, number[]> = {};
    for (const [task, info] of Object.entries(this.models)) {
      out[task] = info.frequencies_hz;
    }
    return out;
  }

  /** Close out one attempt: push the final averaged posteriors to history. */
  endAttempt(): AttemptRecord | null {
    if (Object.keys(this.gauges).length === 0) return null;
    const averaged: Record<string, Record<string, number>> = {};
    for (const [task, gauge] of Object.entries(this.gauges)) {
      averaged[task] = { ...gauge.averaged };
    }
    const record = { endedAtChunk: this.lastChunkIndex, averaged };
    this.history.push(record);
    return record;
  }
}
