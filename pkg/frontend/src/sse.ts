// Minimal server-sent-events client on top of fetch. Using the stream
// reader directly (instead of EventSource) keeps one code path for the
// browser and for node-side tests.

export type SseHandler = (data: string) => void;

/** Incremental parser; feed() may split events at arbitrary byte points. */
export class SseParser {
  private buffer = "";

  constructor(private readonly onData: SseHandler) {}

  feed(chunk: string): void {
    this.buffer += chunk;
    // normalize CRLF so the event delimiter is always a blank line
    this.buffer = this.buffer.replace(/\r\n/g, "\n");
    let cut: number;
    while ((cut = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const data = block
        .split("\n")
        .filter((line) => line.startsWith("data:"))
        .map((line) => line.slice(5).replace(/^ /, ""))
        .join("\n");
      if (data.length > 0) this.onData(data);
    }
  }
}

export interface SseSubscription {
  close(): void;
  /** Resolves when the stream ends or is closed; rejects on transport error. */
  done: Promise<void>;
}

export function subscribeSse(
  fetchFn: typeof fetch,
  url: string,
  onData: SseHandler,
  onError?: (err: unknown) => void,
): SseSubscription {
  const controller = new AbortController();
  const parser = new SseParser(onData);
  const done = (async () => {
    const res = await fetchFn(url, {
      signal: controller.signal,
      headers: { Accept: "text/event-stream" },
    });
    if (!res.ok || res.body === null) {
      throw new Error(`event stream failed: HTTP ${res.status}`);
    }
    const reader = res.body.getReader();
    const decoder = new TextDecoder();
    for (;;) {
      const { done: eof, value } = await reader.read();
      if (eof) break;
      parser.feed(decoder.decode(value, { stream: true }));
    }
  })().catch((err: unknown) => {
    if (controller.signal.aborted) return; // closed on purpose
    if (onError) onError(err);
    else throw err;
  });
  return {
    close: () => controller.abort(),
    done,
  };
}
