// The three operator panels: UDP endpoints, model setup, and run
// control. Panels never compute sample math; they only display server
// state and issue one API call per action, reconciling from the reply.

import type { ApiClient } from "./api.js";
import { Gauge } from "./gauge.js";
import type { HostInfo, PresetDoc, SlotDoc } from "./types.js";
import { DEFAULT_READ_PORT, DEFAULT_SEND_PORT } from "./types.js";
import {
  parseIp,
  parseLengthScales,
  parsePort,
  parsePositiveInt,
  parsePositiveReal,
} from "./validate.js";

/** Wiring every panel gets from the application shell. */
export interface ConsoleHost {
  readonly api: ApiClient;
  currentSlotId(): number;
  currentDoc(): SlotDoc | null;
  hostInfo(): HostInfo;
  presets(): PresetDoc[];
  applyDoc(doc: SlotDoc): void;
  resync(): Promise<void>;
  selectSlot(id: number): Promise<void>;
  /** Registers an in-flight action so tests can await quiescence. */
  track<T>(p: Promise<T>): Promise<T>;
}

function q<T extends Element>(root: ParentNode, selector: string): T {
  const node = root.querySelector(selector);
  if (node === null) throw new Error(`missing element: ${selector}`);
  return node as T;
}

function setDot(el: Element, on: boolean): void {
  el.classList.toggle("on", on);
  el.classList.toggle("off", !on);
}

/** Local IP choice: first non-loopback address, loopback as fallback. */
export function pickLocalIp(info: HostInfo): string {
  return info.addresses.find((a) => a !== "127.0.0.1") ?? "127.0.0.1";
}

abstract class Panel {
  protected busy = false;
  protected current: SlotDoc | null = null;
  private readonly errorEl: HTMLElement;

  constructor(
    protected readonly root: HTMLElement,
    protected readonly host: ConsoleHost,
    html: string,
  ) {
    root.classList.add("panel");
    root.innerHTML = html;
    this.errorEl = q(root, "[data-error]");
  }

  setError(message: string | null): void {
    this.errorEl.textContent = message ?? "";
    this.errorEl.classList.toggle("visible", message !== null);
  }

  /** One server call; reconcile from the reply, or show the failure. */
  protected async action(call: () => Promise<SlotDoc>): Promise<void> {
    this.busy = true;
    this.setError(null);
    try {
      this.host.applyDoc(await call());
    } catch (err) {
      this.setError(err instanceof Error ? err.message : String(err));
      this.busy = false;
      await this.host.resync();
    } finally {
      this.busy = false;
    }
  }

  protected run(p: Promise<void>): void {
    void this.host.track(p);
  }

  abstract render(doc: SlotDoc): void;
  abstract updateLive(doc: SlotDoc): void;
}

// ---------------------------------------------------------------------------
// endpoint panel

const ENDPOINT_HTML = `
  <h2>UDP Endpoints <span class="dot off" data-light="udp"></span></h2>
  <div class="field-group">
    <h3>Read</h3>
    <label>IP to read <input data-field="read_ip" spellcheck="false"></label>
    <label>Port to read <input data-field="read_port" inputmode="numeric"></label>
    <div class="row">
      <button type="button" data-action="local-read">Use Local IP</button>
      <button type="button" data-action="default-read">Use Default Port</button>
    </div>
  </div>
  <div class="field-group">
    <h3>Send</h3>
    <label>IP to send <input data-field="send_ip" spellcheck="false"></label>
    <label>Port to send <input data-field="send_port" inputmode="numeric"></label>
    <div class="row">
      <button type="button" data-action="local-send">Use Local IP</button>
      <button type="button" data-action="default-send">Use Default Port</button>
    </div>
  </div>
  <div class="row">
    <button type="button" class="primary" data-action="apply-endpoint">Apply Endpoints</button>
    <label class="switch">UDP
      <input type="checkbox" data-switch="udp">
      <span class="slider"></span>
    </label>
  </div>
  <p class="error" data-error></p>
`;

export class EndpointPanel extends Panel {
  private readonly ipRead: HTMLInputElement;
  private readonly portRead: HTMLInputElement;
  private readonly ipSend: HTMLInputElement;
  private readonly portSend: HTMLInputElement;
  private readonly udpSwitch: HTMLInputElement;
  private readonly dotEl: HTMLElement;

  constructor(root: HTMLElement, host: ConsoleHost) {
    super(root, host, ENDPOINT_HTML);
    this.ipRead = q(root, '[data-field="read_ip"]');
    this.portRead = q(root, '[data-field="read_port"]');
    this.ipSend = q(root, '[data-field="send_ip"]');
    this.portSend = q(root, '[data-field="send_port"]');
    this.udpSwitch = q(root, '[data-switch="udp"]');
    this.dotEl = q(root, '[data-light="udp"]');

    q<HTMLButtonElement>(root, '[data-action="local-read"]').addEventListener(
      "click", () => { this.ipRead.value = pickLocalIp(this.host.hostInfo()); });
    q<HTMLButtonElement>(root, '[data-action="local-send"]').addEventListener(
      "click", () => { this.ipSend.value = pickLocalIp(this.host.hostInfo()); });
    q<HTMLButtonElement>(root, '[data-action="default-read"]').addEventListener(
      "click", () => { this.portRead.value = String(DEFAULT_READ_PORT); });
    q<HTMLButtonElement>(root, '[data-action="default-send"]').addEventListener(
      "click", () => { this.portSend.value = String(DEFAULT_SEND_PORT); });
    q<HTMLButtonElement>(root, '[data-action="apply-endpoint"]').addEventListener(
      "click", () => { this.run(this.applyEndpoints()); });
    this.udpSwitch.addEventListener("change", () => {
      const active = this.udpSwitch.checked;
      this.run(this.action(() => this.host.api.setUdp(this.host.currentSlotId(), active)));
    });
  }

  /** Invalid fields block the submission entirely: no request is sent. */
  private async applyEndpoints(): Promise<void> {
    const readIp = parseIp(this.ipRead.value);
    if (!readIp.ok) return this.setError(`IP to read: ${readIp.error}`);
    const readPort = parsePort(this.portRead.value);
    if (!readPort.ok) return this.setError(`Port to read: ${readPort.error}`);
    const sendIp = parseIp(this.ipSend.value);
    if (!sendIp.ok) return this.setError(`IP to send: ${sendIp.error}`);
    const sendPort = parsePort(this.portSend.value);
    if (!sendPort.ok) return this.setError(`Port to send: ${sendPort.error}`);
    await this.action(() =>
      this.host.api.putEndpoint(this.host.currentSlotId(), {
        read_ip: readIp.value,
        read_port: readPort.value,
        send_ip: sendIp.value,
        send_port: sendPort.value,
      }),
    );
  }

  render(doc: SlotDoc): void {
    this.current = doc;
    this.ipRead.value = doc.endpoint.read_ip;
    this.portRead.value = String(doc.endpoint.read_port);
    this.ipSend.value = doc.endpoint.send_ip;
    this.portSend.value = String(doc.endpoint.send_port);
    this.updateLive(doc);
  }

  updateLive(doc: SlotDoc): void {
    this.current = doc;
    setDot(this.dotEl, doc.udp_active);
    if (!this.busy) this.udpSwitch.checked = doc.udp_active;
    const locked = doc.udp_active || doc.running;
    for (const field of [this.ipRead, this.portRead, this.ipSend, this.portSend]) {
      field.disabled = locked;
    }
    this.root.querySelectorAll<HTMLButtonElement>("button").forEach((b) => {
      b.disabled = locked;
    });
  }
}

// ---------------------------------------------------------------------------
// model panel

const MODEL_HTML = `
  <h2>Remote GP Model <span class="dot off" data-light="gp"></span></h2>
  <div class="row">
    <label>Slot <select data-field="slot"></select></label>
    <label>Preset <select data-field="preset"></select></label>
    <button type="button" data-action="init-preset">Initialize Remote GP</button>
  </div>
  <div class="field-group">
    <label>Input Dimension <input data-field="d_in" inputmode="numeric"></label>
    <label>Output Dimension <input data-field="d_out" inputmode="numeric"></label>
    <label>Sigma F <input data-field="sigma_f"></label>
    <label>Sigma N <input data-field="sigma_n"></label>
    <div class="scales" data-scales></div>
    <button type="button" data-action="default-hp">Use Default Hyperparameters</button>
  </div>
  <div class="field-group">
    <label>Max. Local GP Quantity <input data-field="max_leaves" inputmode="numeric"></label>
    <label>Max. Local Data Quantity <input data-field="max_local_data" inputmode="numeric"></label>
  </div>
  <div class="row">
    <button type="button" class="primary" data-action="apply-config">Apply Model Config</button>
    <label class="switch">Remote GP
      <input type="checkbox" data-switch="gp">
      <span class="slider"></span>
    </label>
  </div>
  <p class="error" data-error></p>
`;

export class ModelPanel extends Panel {
  private readonly slotSelect: HTMLSelectElement;
  private readonly presetSelect: HTMLSelectElement;
  private readonly dIn: HTMLInputElement;
  private readonly dOut: HTMLInputElement;
  private readonly sigmaF: HTMLInputElement;
  private readonly sigmaN: HTMLInputElement;
  private readonly scaleWrap: HTMLElement;
  private readonly maxLeaves: HTMLInputElement;
  private readonly maxLocalData: HTMLInputElement;
  private readonly gpSwitch: HTMLInputElement;
  private readonly dotEl: HTMLElement;

  constructor(root: HTMLElement, host: ConsoleHost) {
    super(root, host, MODEL_HTML);
    this.slotSelect = q(root, '[data-field="slot"]');
    this.presetSelect = q(root, '[data-field="preset"]');
    this.dIn = q(root, '[data-field="d_in"]');
    this.dOut = q(root, '[data-field="d_out"]');
    this.sigmaF = q(root, '[data-field="sigma_f"]');
    this.sigmaN = q(root, '[data-field="sigma_n"]');
    this.scaleWrap = q(root, "[data-scales]");
    this.maxLeaves = q(root, '[data-field="max_leaves"]');
    this.maxLocalData = q(root, '[data-field="max_local_data"]');
    this.gpSwitch = q(root, '[data-switch="gp"]');
    this.dotEl = q(root, '[data-light="gp"]');

    this.slotSelect.addEventListener("change", () => {
      this.run(this.host.selectSlot(Number(this.slotSelect.value)));
    });
    this.dIn.addEventListener("input", () => {
      const parsed = parsePositiveInt(this.dIn.value, "input dimension");
      if (parsed.ok) this.resizeScales(parsed.value);
    });
    q<HTMLButtonElement>(root, '[data-action="default-hp"]').addEventListener(
      "click", () => this.fillDefaultHyperparameters());
    q<HTMLButtonElement>(root, '[data-action="init-preset"]').addEventListener(
      "click", () => {
        const name = this.presetSelect.value;
        this.run(this.action(() => this.host.api.applyPreset(this.host.currentSlotId(), name)));
      });
    q<HTMLButtonElement>(root, '[data-action="apply-config"]').addEventListener(
      "click", () => { this.run(this.applyConfig()); });
    this.gpSwitch.addEventListener("change", () => {
      const active = this.gpSwitch.checked;
      this.run(this.action(() => this.host.api.setGp(this.host.currentSlotId(), active)));
    });
  }

  setSlotIds(ids: number[]): void {
    this.slotSelect.innerHTML = ids
      .map((id) => `<option value="${id}">Slot ${id}</option>`)
      .join("");
  }

  setPresets(presets: PresetDoc[]): void {
    this.presetSelect.innerHTML = presets
      .map((p) => `<option value="${p.name}">${p.name}</option>`)
      .join("");
  }

  /** One "Sigma L i" field per input dimension, existing text preserved. */
  private resizeScales(count: number, values?: string[]): void {
    const old = values ?? this.scaleValues();
    const doc = this.root.ownerDocument;
    this.scaleWrap.textContent = "";
    for (let i = 0; i < count; i++) {
      const label = doc.createElement("label");
      label.textContent = `Sigma L ${i + 1} `;
      const input = doc.createElement("input");
      input.dataset.scale = String(i);
      input.value = old[i] ?? "1.0";
      label.appendChild(input);
      this.scaleWrap.appendChild(label);
    }
  }

  private scaleValues(): string[] {
    return Array.from(
      this.scaleWrap.querySelectorAll<HTMLInputElement>("input"),
      (el) => el.value,
    );
  }

  /** Hyperparameter fields from the preset chosen in the dropdown. */
  private fillDefaultHyperparameters(): void {
    const preset = this.host.presets().find((p) => p.name === this.presetSelect.value);
    if (!preset) return;
    this.sigmaF.value = String(preset.sigma_f);
    this.sigmaN.value = String(preset.sigma_n);
    const count = this.scaleWrap.querySelectorAll("input").length || preset.d_in;
    this.resizeScales(
      count,
      Array.from({ length: count }, (_, i) => String(preset.length_scales[i] ?? 1.0)),
    );
  }

  private async applyConfig(): Promise<void> {
    const dIn = parsePositiveInt(this.dIn.value, "input dimension");
    if (!dIn.ok) return this.setError(dIn.error);
    const dOut = parsePositiveInt(this.dOut.value, "output dimension");
    if (!dOut.ok) return this.setError(dOut.error);
    const sigmaF = parsePositiveReal(this.sigmaF.value, "Sigma F");
    if (!sigmaF.ok) return this.setError(sigmaF.error);
    const sigmaN = parsePositiveReal(this.sigmaN.value, "Sigma N");
    if (!sigmaN.ok) return this.setError(sigmaN.error);
    const maxLeaves = parsePositiveInt(this.maxLeaves.value, "Max. Local GP Quantity");
    if (!maxLeaves.ok) return this.setError(maxLeaves.error);
    const maxLocalData = parsePositiveInt(this.maxLocalData.value, "Max. Local Data Quantity");
    if (!maxLocalData.ok) return this.setError(maxLocalData.error);
    const scales = parseLengthScales(this.scaleValues(), dIn.value);
    if (!scales.ok) return this.setError(scales.error);
    await this.action(() =>
      this.host.api.putConfig(this.host.currentSlotId(), {
        d_in: dIn.value,
        d_out: dOut.value,
        sigma_f: sigmaF.value,
        sigma_n: sigmaN.value,
        length_scales: scales.value,
        max_leaves: maxLeaves.value,
        max_local_data: maxLocalData.value,
      }),
    );
  }

  render(doc: SlotDoc): void {
    this.current = doc;
    this.slotSelect.value = String(doc.id);
    if (doc.preset !== null) this.presetSelect.value = doc.preset;
    const m = doc.model;
    if (m !== null) {
      this.dIn.value = String(m.d_in);
      this.dOut.value = String(m.d_out);
      this.sigmaF.value = String(m.sigma_f);
      this.sigmaN.value = String(m.sigma_n);
      this.maxLeaves.value = String(m.max_leaves);
      this.maxLocalData.value = String(m.max_local_data);
      this.resizeScales(m.d_in, m.length_scales.map(String));
    } else {
      this.dIn.value = "1";
      this.dOut.value = "1";
      this.sigmaF.value = "1.0";
      this.sigmaN.value = "0.1";
      this.maxLeaves.value = "32";
      this.maxLocalData.value = "64";
      this.resizeScales(1, ["1.0"]);
    }
    this.updateLive(doc);
  }

  updateLive(doc: SlotDoc): void {
    this.current = doc;
    setDot(this.dotEl, doc.gp_active);
    if (!this.busy) this.gpSwitch.checked = doc.gp_active;
    const locked = doc.gp_active || doc.running;
    const fields: (HTMLInputElement | HTMLSelectElement | HTMLButtonElement)[] = [
      this.presetSelect, this.dIn, this.dOut, this.sigmaF, this.sigmaN,
      this.maxLeaves, this.maxLocalData,
      ...Array.from(this.scaleWrap.querySelectorAll<HTMLInputElement>("input")),
      ...Array.from(this.root.querySelectorAll<HTMLButtonElement>("button")),
    ];
    for (const field of fields) field.disabled = locked;
  }
}

// ---------------------------------------------------------------------------
// run panel

const RUN_HTML = `
  <h2>Operation <span class="dot off" data-light="run"></span></h2>
  <div class="row">
    <label>Listening Frequency (Hz) <input data-field="listen_rate_hz" inputmode="numeric"></label>
    <button type="button" class="primary" data-action="toggle-run">Start</button>
  </div>
  <div class="counters">
    <div class="counter">
      <span class="counter-label">Received Quantity</span>
      <output data-counter="received">0</output>
    </div>
    <div class="counter">
      <span class="counter-label">GP Data Quantity</span>
      <output data-counter="stored">0</output>
    </div>
  </div>
  <div class="gauges">
    <div data-gauge="read"></div>
    <div data-gauge="compute"></div>
    <div data-gauge="send"></div>
  </div>
  <p class="error" data-error></p>
`;

export class RunPanel extends Panel {
  private readonly rateField: HTMLInputElement;
  private readonly toggleBtn: HTMLButtonElement;
  private readonly receivedEl: HTMLElement;
  private readonly storedEl: HTMLElement;
  private readonly dotEl: HTMLElement;
  readonly readGauge: Gauge;
  readonly computeGauge: Gauge;
  readonly sendGauge: Gauge;

  constructor(root: HTMLElement, host: ConsoleHost) {
    super(root, host, RUN_HTML);
    this.rateField = q(root, '[data-field="listen_rate_hz"]');
    this.toggleBtn = q(root, '[data-action="toggle-run"]');
    this.receivedEl = q(root, '[data-counter="received"]');
    this.storedEl = q(root, '[data-counter="stored"]');
    this.dotEl = q(root, '[data-light="run"]');
    this.readGauge = new Gauge(q(root, '[data-gauge="read"]'), "UDP Read");
    this.computeGauge = new Gauge(q(root, '[data-gauge="compute"]'), "Compute");
    this.sendGauge = new Gauge(q(root, '[data-gauge="send"]'), "UDP Send");
    this.toggleBtn.addEventListener("click", () => { this.run(this.toggleRun()); });
  }

  /** Start applies the listening frequency first, then starts; pressing
   *  the button while running stops instead. */
  private async toggleRun(): Promise<void> {
    const doc = this.current;
    if (doc === null) return;
    if (doc.running) {
      await this.action(() => this.host.api.stop(this.host.currentSlotId()));
      return;
    }
    const rate = parsePositiveReal(this.rateField.value, "listening frequency");
    if (!rate.ok) {
      this.setError(rate.error);
      return;
    }
    await this.action(async () => {
      const id = this.host.currentSlotId();
      if (rate.value !== doc.endpoint.listen_rate_hz) {
        await this.host.api.putEndpoint(id, { listen_rate_hz: rate.value });
      }
      return this.host.api.start(id);
    });
  }

  render(doc: SlotDoc): void {
    this.current = doc;
    this.rateField.value = String(doc.endpoint.listen_rate_hz);
    this.updateLive(doc);
  }

  updateLive(doc: SlotDoc): void {
    this.current = doc;
    setDot(this.dotEl, doc.running);
    this.toggleBtn.textContent = doc.running ? "Stop" : "Start";
    this.rateField.disabled = doc.running;
    this.receivedEl.textContent = String(doc.metrics.received_quantity);
    this.storedEl.textContent = String(doc.metrics.stored_quantity);
    this.readGauge.update(doc.metrics.mean_read_time);
    this.computeGauge.update(doc.metrics.mean_compute_time);
    this.sendGauge.update(doc.metrics.mean_send_time);
  }
}
