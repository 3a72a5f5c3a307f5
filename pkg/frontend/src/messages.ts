/**
 * Wire message types for the stream protocol (see ../PROTOCOL.md).
 *
 * The authoritative contract is the shared schema file
 * protocol.schema.json at the repo root; the test suite validates every
 * outbound message shape against it.
 */

export const PROTOCOL_VERSION = 1;

export interface Envelope {
  v: typeof PROTOCOL_VERSION;
  type: string;
  session: string;
  seq: number;
}

export interface DistRow {
  model: number;
  top: [number, number][]; // [char index, probability], best first
  residual: number;
}

export interface EventMsg extends Envelope {
  type: "event";
  step: number;
  char: number;
  rho: number[]; // 128 entries
  rows: DistRow[];
  pi: number[];
  active: number[];
  t: number | null;
}

export interface ModelInfo {
  name: string;
  layers?: number[];
  params?: number;
  corpus?: string;
}

export interface ModelListMsg extends Envelope {
  type: "model_list";
  models: ModelInfo[];
}

export interface StatusMsg extends Envelope {
  type: "status";
  state: string;
  detail: string;
  stats: Record<string, number> | null;
}

export interface ErrorMsg extends Envelope {
  type: "error";
  code: string;
  message: string;
}

export type ServerMessage = EventMsg | ModelListMsg | StatusMsg | ErrorMsg;

export class MessageError extends Error {}

function need(cond: boolean, why: string): asserts cond {
  if (!cond) throw new MessageError(why);
}

const isNum = (x: unknown): x is number => typeof x === "number" && Number.isFinite(x);
const isInt = (x: unknown): x is number => Number.isInteger(x);

/** Parse one inbound frame payload; throws MessageError on anything off. */
export function parseServerMessage(text: string): ServerMessage {
  let obj: any;
  try {
    obj = JSON.parse(text);
  } catch (exc) {
    throw new MessageError(`payload is not JSON: ${exc}`);
  }
  need(obj !== null && typeof obj === "object" && !Array.isArray(obj), "not an object");
  need(obj.v === PROTOCOL_VERSION, `unsupported protocol version ${obj.v}`);
  need(typeof obj.session === "string", "bad session");
  need(isInt(obj.seq) && obj.seq >= 0, "bad seq");
  switch (obj.type) {
    case "event": {
      need(isInt(obj.step) && obj.step >= 0, "bad step");
      need(isInt(obj.char) && obj.char >= 0 && obj.char < 128, "bad char");
      need(Array.isArray(obj.rho) && obj.rho.length === 128 && obj.rho.every(isNum), "bad rho");
      need(Array.isArray(obj.pi) && obj.pi.every(isNum), "bad pi");
      need(Array.isArray(obj.active) && obj.active.every(isInt), "bad active");
      need(Array.isArray(obj.rows), "bad rows");
      for (const row of obj.rows) {
        need(row && isInt(row.model) && isNum(row.residual), "bad row");
        need(
          Array.isArray(row.top) &&
            row.top.every(
              (p: unknown) =>
                Array.isArray(p) && p.length === 2 && isInt(p[0]) && isNum(p[1]),
            ),
          "bad row top",
        );
      }
      need(obj.t === null || obj.t === undefined || isNum(obj.t), "bad t");
      return { ...obj, t: obj.t ?? null } as EventMsg;
    }
    case "model_list": {
      need(Array.isArray(obj.models), "bad models");
      for (const m of obj.models) need(m && typeof m.name === "string", "bad model entry");
      return obj as ModelListMsg;
    }
    case "status": {
      need(typeof obj.state === "string", "bad state");
      return { detail: "", stats: null, ...obj } as StatusMsg;
    }
    case "error": {
      need(typeof obj.code === "string" && typeof obj.message === "string", "bad error");
      return obj as ErrorMsg;
    }
    default:
      throw new MessageError(`unknown message type ${String(obj.type)}`);
  }
}

/** Outbound message builders (envelope included). */
export function makeMessage(
  type: string,
  session: string,
  seq: number,
  body: Record<string, unknown> = {},
): Record<string, unknown> {
  return { v: PROTOCOL_VERSION, type, session, seq, ...body };
}

export const makeSetWeights = (weights: number[], session: string, seq: number) =>
  makeMessage("set_weights", session, seq, { weights });
export const makePrime = (text: string, session: string, seq: number) =>
  makeMessage("prime", session, seq, { text });
export const makePause = (session: string, seq: number) => makeMessage("pause", session, seq);
export const makeResume = (session: string, seq: number) => makeMessage("resume", session, seq);
export const makeReset = (session: string, seq: number) => makeMessage("reset", session, seq);
export const makeSetTemperature = (temperature: number, session: string, seq: number) =>
  makeMessage("set_temperature", session, seq, { temperature });
export const makeListModels = (session: string, seq: number) =>
  makeMessage("list_models", session, seq);
