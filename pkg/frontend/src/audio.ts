/**
 * Microphone capture glue (browser only). Keeps the DOM/WebAudio surface
 * thin so everything testable lives in chunker.ts and session.ts.
 */

import { Chunker } from "./chunker.js";

export interface CaptureHandle {
  stop: () => void;
  context: AudioContext;
}

export type PermissionCallback = (state: "granted" | "denied") => void;

/**
 * Start capturing the default microphone, feeding the chunker with every
 * audio buffer at the device rate. Rejection (permission denied, no
 * device) is reported through `onPermission` and the promise.
 */
export async function startCapture(
  chunker: Chunker,
  onPermission: PermissionCallback = () => {},
): Promise<CaptureHandle> {
  let stream: MediaStream;
  try {
    stream = await navigator.mediaDevices.getUserMedia({ audio: true, video: false });
  } catch (err) {
    onPermission("denied");
    throw err;
  }
  onPermission("granted");
  const context = new AudioContext();
  const source = context.createMediaStreamSource(stream);
  const processor = context.createScriptProcessor(4096, 1, 1);
  processor.onaudioprocess = (ev) => {
    const data = ev.inputBuffer.getChannelData(0);
    chunker.push(new Float32Array(data), context.sampleRate);
  };
  source.connect(processor);
  processor.connect(context.destination);
  return {
    context,
    stop: () => {
      processor.disconnect();
      source.disconnect();
      stream.getTracks().forEach((t) => t.stop());
      void context.close();
      chunker.flush();
    },
  };
}
