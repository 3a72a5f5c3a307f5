/**
 * Session state and the message reducer.
 *
 * Socket ingestion mutates this state; rendering reads it on animation
 * frames. The two never block each other: a burst of events costs one
 * reduce each, and the next frame paints whatever the latest state is.
 */

import { ModelInfo, ServerMessage, EventMsg } from "./messages.js";
import { Transcript } from "./transcript.js";
import { sameDirection } from "./weights.js";

export type Connection = "connecting" | "open" | "closed";

export interface UiState {
  connection: Connection;
  models: ModelInfo[];
  /** last server-acknowledged weight snapshot (from events) */
  ackPi: number[] | null;
  /** latest local gesture not yet visible in an event, if any */
  pendingPi: number[] | null;
  latestEvent: EventMsg | null;
  transcript: Transcript;
  serverState: string;
  statusLine: string;
  errors: string[];
  eventsSeen: number;
}

export function initialState(): UiState {
  return {
    connection: "connecting",
    models: [],
    ackPi: null,
    pendingPi: null,
    latestEvent: null,
    transcript: new Transcript(),
    serverState: "unknown",
    statusLine: "",
    errors: [],
    eventsSeen: 0,
  };
}

/** The weights the mixer should display right now. */
export function displayedPi(state: UiState): number[] | null {
  return state.pendingPi ?? state.ackPi;
}

export function noteGesture(state: UiState, weights: number[]): void {
  state.pendingPi = weights.slice();
}

export function applyServer(state: UiState, msg: ServerMessage): UiState {
  switch (msg.type) {
    case "model_list":
      state.models = msg.models;
      break;
    case "event":
      state.latestEvent = msg;
      state.eventsSeen += 1;
      state.transcript.push(msg.seq, msg.char);
      state.ackPi = msg.pi.slice();
      if (sameDirection(state.pendingPi, state.ackPi)) state.pendingPi = null;
      break;
    case "status":
      state.serverState = msg.state;
      state.statusLine = msg.detail || msg.state;
      break;
    case "error":
      state.errors.push(`${msg.code}: ${msg.message}`);
      if (state.errors.length > 50) state.errors.shift();
      break;
  }
  return state;
}
