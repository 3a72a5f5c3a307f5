/**
 * Browser entry point: connect, render, steer.
 *
 * Connects to the WebSocket bridge (ws://localhost:8765 by default, or
 * ?ws=... to override), keeps the session state up to date off the
 * socket, and paints on animation frames so rendering never back-blocks
 * ingestion. Sliders and the 2D pad both go through the rate-limited
 * sender.
 */

import {
  makeListModels,
  makePause,
  makePrime,
  makeReset,
  makeResume,
  makeSetTemperature,
  makeSetWeights,
  parseServerMessage,
} from "./messages.js";
import { renderEventPanel, renderWeightGauges, escapeHtml } from "./render.js";
import {
  applyServer,
  displayedPi,
  initialState,
  noteGesture,
  UiState,
} from "./ui-state.js";
import { circleAnchors, isAllZero, padWeights, RateLimitedSender } from "./weights.js";

const SESSION = "conductor-ui";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

class App {
  state: UiState = initialState();
  socket: WebSocket | null = null;
  seq = 0;
  sender: RateLimitedSender;
  dirty = true;
  sliderEls: HTMLInputElement[] = [];

  constructor(readonly wsUrl: string) {
    this.sender = new RateLimitedSender((weights) => this.sendRaw(makeSetWeights(weights, SESSION, this.seq++)), 30);
    this.connect();
    const paint = () => {
      if (this.dirty) {
        this.render();
        this.dirty = false;
      }
      requestAnimationFrame(paint);
    };
    requestAnimationFrame(paint);
    this.wireControls();
  }

  connect(): void {
    this.state.connection = "connecting";
    const socket = new WebSocket(this.wsUrl);
    this.socket = socket;
    socket.onopen = () => {
      this.state.connection = "open";
      this.sendRaw(makeListModels(SESSION, this.seq++));
      this.sender.flush();
      this.dirty = true;
    };
    socket.onmessage = (evt) => {
      try {
        applyServer(this.state, parseServerMessage(String(evt.data)));
      } catch (exc) {
        this.state.errors.push(String(exc));
      }
      if (this.state.models.length > 0 && this.sliderEls.length === 0) this.buildMixer();
      this.dirty = true;
    };
    socket.onclose = () => {
      this.state.connection = "closed";
      this.dirty = true;
      setTimeout(() => this.connect(), 1500);
    };
  }

  sendRaw(msg: Record<string, unknown>): boolean {
    if (this.socket && this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(JSON.stringify(msg));
      return true;
    }
    return false;
  }

  gesture(weights: number[]): void {
    if (isAllZero(weights)) {
      this.state.statusLine = "all sliders at zero: not sent (nothing would run)";
      this.dirty = true;
      return;
    }
    noteGesture(this.state, weights);
    this.sender.update(weights);
    this.dirty = true;
  }

  buildMixer(): void {
    const mixer = $("sliders");
    mixer.innerHTML = "";
    this.sliderEls = this.state.models.map((model, i) => {
      const wrap = document.createElement("label");
      wrap.className = "slider-wrap";
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "100";
      slider.value = i === 0 ? "100" : "0";
      slider.oninput = () => this.gesture(this.sliderEls.map((s) => Number(s.value) / 100));
      const caption = document.createElement("span");
      caption.textContent = model.name;
      wrap.append(slider, caption);
      mixer.append(wrap);
      return slider;
    });

    const pad = $("pad") as HTMLCanvasElement;
    const anchors = circleAnchors(this.state.models.length);
    const ctx = pad.getContext("2d")!;
    const drawPad = (px?: number, py?: number) => {
      ctx.clearRect(0, 0, pad.width, pad.height);
      ctx.strokeStyle = "#444";
      ctx.strokeRect(0, 0, pad.width, pad.height);
      anchors.forEach((a, i) => {
        ctx.fillStyle = "#8ab";
        ctx.beginPath();
        ctx.arc(a.x * pad.width, a.y * pad.height, 4, 0, 2 * Math.PI);
        ctx.fill();
        ctx.fillText(this.state.models[i]?.name ?? String(i), a.x * pad.width + 6, a.y * pad.height);
      });
      if (px !== undefined && py !== undefined) {
        ctx.fillStyle = "#fff";
        ctx.beginPath();
        ctx.arc(px, py, 5, 0, 2 * Math.PI);
        ctx.fill();
      }
    };
    drawPad();
    const onPoint = (evt: PointerEvent) => {
      if (evt.buttons === 0) return;
      const rect = pad.getBoundingClientRect();
      const x = (evt.clientX - rect.left) / rect.width;
      const y = (evt.clientY - rect.top) / rect.height;
      drawPad(x * pad.width, y * pad.height);
      this.gesture(padWeights(x, y, anchors));
    };
    pad.onpointerdown = onPoint;
    pad.onpointermove = onPoint;
  }

  wireControls(): void {
    $("pause").onclick = () => this.sendRaw(makePause(SESSION, this.seq++));
    $("resume").onclick = () => this.sendRaw(makeResume(SESSION, this.seq++));
    $("reset").onclick = () => this.sendRaw(makeReset(SESSION, this.seq++));
    $("prime").onclick = () => {
      const text = (($("prime-text") as HTMLInputElement).value ?? "").slice(0, 2000);
      this.sendRaw(makePrime(text, SESSION, this.seq++));
    };
    ($("temperature") as HTMLInputElement).oninput = (evt) => {
      const value = Number((evt.target as HTMLInputElement).value) / 100;
      $("temperature-value").textContent = value.toFixed(2);
      this.sendRaw(makeSetTemperature(value, SESSION, this.seq++));
    };
  }

  render(): void {
    const st = this.state;
    $("connection").textContent = `${st.connection} / server ${st.serverState}`;
    $("connection").className = `badge ${st.connection}`;
    $("status-line").textContent = st.statusLine;
    if (st.latestEvent) {
      $("bars").innerHTML = renderEventPanel(
        st.latestEvent,
        st.models.map((m) => m.name),
      );
    }
    const pi = displayedPi(st);
    if (pi) {
      $("gauges").innerHTML = renderWeightGauges(
        st.models.map((m) => m.name),
        pi,
        st.pendingPi !== null,
      );
    }
    const view = $("transcript");
    view.textContent = st.transcript.rendered();
    view.scrollTop = view.scrollHeight;
    $("errors").innerHTML = st.errors
      .slice(-4)
      .map((e) => `<div class="badge error">${escapeHtml(e)}</div>`)
      .join("");
  }
}

const params = new URLSearchParams(location.search);
new App(params.get("ws") ?? "ws://localhost:8765");
