// Application shell: loads presets, host info, and slots, renders the
// three panels for the selected slot, and keeps them live from the
// 5 Hz event stream.

import { ApiClient } from "./api.js";
import {
  EndpointPanel,
  ModelPanel,
  RunPanel,
  type ConsoleHost,
} from "./panels.js";
import type { EventFrame, HostInfo, PresetDoc, SlotDoc } from "./types.js";
import type { SseSubscription } from "./sse.js";

const SHELL_HTML = `
  <header>
    <h1>Remote GP Console</h1>
    <div class="host-line">
      <span data-hostname></span>
      <span class="dot off" data-light="stream" title="event stream"></span>
    </div>
  </header>
  <main>
    <section data-panel="model"></section>
    <section data-panel="endpoint"></section>
    <section data-panel="run"></section>
  </main>
`;

export class App implements ConsoleHost {
  readonly api: ApiClient;
  readonly endpointPanel: EndpointPanel;
  readonly modelPanel: ModelPanel;
  readonly runPanel: RunPanel;

  private doc: SlotDoc | null = null;
  private selected = 0;
  private presetDocs: PresetDoc[] = [];
  private info: HostInfo = { hostname: "", addresses: ["127.0.0.1"] };
  private sub: SseSubscription | null = null;
  private readonly pending = new Set<Promise<unknown>>();
  private readonly streamDot: Element;
  private readonly hostnameEl: HTMLElement;

  constructor(root: HTMLElement, api: ApiClient) {
    this.api = api;
    root.classList.add("console");
    root.innerHTML = SHELL_HTML;
    this.streamDot = root.querySelector('[data-light="stream"]') as Element;
    this.modelPanel = new ModelPanel(
      root.querySelector('[data-panel="model"]') as HTMLElement, this);
    this.endpointPanel = new EndpointPanel(
      root.querySelector('[data-panel="endpoint"]') as HTMLElement, this);
    this.runPanel = new RunPanel(
      root.querySelector('[data-panel="run"]') as HTMLElement, this);
    this.hostnameEl = root.querySelector("[data-hostname]") as HTMLElement;
  }

  async boot(): Promise<void> {
    const [presets, info, slots] = await Promise.all([
      this.api.getPresets(),
      this.api.getHostInfo(),
      this.api.getSlots(),
    ]);
    this.presetDocs = presets;
    this.info = info;
    this.hostnameEl.textContent = info.hostname;
    this.modelPanel.setPresets(presets);
    this.modelPanel.setSlotIds(slots.map((s) => s.id));
    const first = slots[0];
    if (first === undefined) throw new Error("service reports no slots");
    this.selected = first.id;
    this.applyDoc(first);
    this.subscribe();
  }

  /** Closes the event stream; panels stay at their last state. */
  dispose(): void {
    this.sub?.close();
    this.sub = null;
  }

  // ------------------------------------------------------------------
  // ConsoleHost

  currentSlotId(): number {
    return this.selected;
  }

  currentDoc(): SlotDoc | null {
    return this.doc;
  }

  hostInfo(): HostInfo {
    return this.info;
  }

  presets(): PresetDoc[] {
    return this.presetDocs;
  }

  applyDoc(doc: SlotDoc): void {
    this.doc = doc;
    this.endpointPanel.render(doc);
    this.modelPanel.render(doc);
    this.runPanel.render(doc);
  }

  async resync(): Promise<void> {
    this.applyDoc(await this.api.getSlot(this.selected));
  }

  async selectSlot(id: number): Promise<void> {
    if (id === this.selected) return;
    this.selected = id;
    this.applyDoc(await this.api.getSlot(id));
    this.subscribe();
  }

  track<T>(p: Promise<T>): Promise<T> {
    this.pending.add(p);
    const drop = () => this.pending.delete(p);
    p.then(drop, drop);
    return p;
  }

  /** Resolves once every tracked action has settled. */
  async idle(): Promise<void> {
    while (this.pending.size > 0) {
      await Promise.allSettled([...this.pending]);
    }
  }

  // ------------------------------------------------------------------
  // event stream

  private subscribe(): void {
    this.sub?.close();
    const id = this.selected;
    this.sub = this.api.subscribeEvents(
      id,
      (frame) => this.onFrame(id, frame),
      () => this.markStream(false),
    );
  }

  private onFrame(streamId: number, frame: EventFrame): void {
    if (streamId !== this.selected || frame.slot.id !== this.selected) return;
    this.markStream(true);
    const doc: SlotDoc = { ...frame.slot, metrics: frame.metrics };
    this.doc = doc;
    this.endpointPanel.updateLive(doc);
    this.modelPanel.updateLive(doc);
    this.runPanel.updateLive(doc);
  }

  private markStream(live: boolean): void {
    this.streamDot.classList.toggle("on", live);
    this.streamDot.classList.toggle("off", !live);
  }
}
