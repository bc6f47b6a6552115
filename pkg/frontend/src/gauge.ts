// Semi-circular SVG gauge for task timings. The needle range auto-scales
// to the largest value seen in a rolling window, so idle slots read near
// zero and busy slots use the whole arc.

const ARC = Math.PI * 80; // length of the 180-degree arc path below
const WINDOW = 50; // frames; ten seconds at the 5 Hz stream rate
const MIN_SCALE = 1e-6; // seconds; keeps idle gauges from dividing by zero

export function formatSeconds(seconds: number): string {
  if (!Number.isFinite(seconds) || seconds <= 0) return "0";
  if (seconds < 1e-3) return `${(seconds * 1e6).toFixed(0)} µs`;
  if (seconds < 1) return `${(seconds * 1e3).toFixed(2)} ms`;
  return `${seconds.toFixed(3)} s`;
}

export class Gauge {
  private readonly arc: SVGPathElement;
  private readonly valueLabel: HTMLElement;
  private readonly history: number[] = [];
  fraction = 0;

  constructor(root: HTMLElement, title: string) {
    root.classList.add("gauge");
    root.innerHTML = `
      <svg viewBox="0 0 200 100" role="img" aria-label="${title}">
        <path class="gauge-track" d="M 20 90 A 80 80 0 0 1 180 90"
              fill="none" stroke-width="14" stroke-linecap="round"></path>
        <path class="gauge-arc" d="M 20 90 A 80 80 0 0 1 180 90"
              fill="none" stroke-width="14" stroke-linecap="round"
              stroke-dasharray="${ARC}" stroke-dashoffset="${ARC}"></path>
      </svg>
      <div class="gauge-value">0</div>
      <div class="gauge-title">${title}</div>`;
    this.arc = root.querySelector(".gauge-arc") as SVGPathElement;
    this.valueLabel = root.querySelector(".gauge-value") as HTMLElement;
  }

  update(seconds: number): void {
    const value = Number.isFinite(seconds) && seconds > 0 ? seconds : 0;
    this.history.push(value);
    if (this.history.length > WINDOW) this.history.shift();
    const scale = Math.max(MIN_SCALE, ...this.history);
    this.fraction = Math.min(1, value / scale);
    this.arc.setAttribute("stroke-dashoffset", String(ARC * (1 - this.fraction)));
    this.valueLabel.textContent = formatSeconds(value);
  }
}
