import { createServer, type Server } from "node:http";
import type { AddressInfo } from "node:net";
import { afterEach, describe, expect, it } from "vitest";

import { SseParser, subscribeSse } from "../src/sse";

const STREAM =
  'data: {"n": 1}\n\n' +
  'data: {"n": 2}\n\n' +
  ": keepalive comment\n\n" +
  "event: tick\ndata: {\"n\": 3}\n\n" +
  "data: part one\ndata: part two\n\n";

const EXPECTED = ['{"n": 1}', '{"n": 2}', '{"n": 3}', "part one\npart two"];

describe("SseParser", () => {
  it("parses whole frames", () => {
    const seen: string[] = [];
    const parser = new SseParser((d) => seen.push(d));
    parser.feed(STREAM);
    expect(seen).toEqual(EXPECTED);
  });

  it("is insensitive to chunk boundaries", () => {
    // small linear congruential generator; fixed seed keeps runs identical
    let state = 12345;
    const next = () => {
      state = (state * 1103515245 + 12345) & 0x7fffffff;
      return state;
    };
    for (let round = 0; round < 200; round++) {
      const seen: string[] = [];
      const parser = new SseParser((d) => seen.push(d));
      let i = 0;
      while (i < STREAM.length) {
        const step = 1 + (next() % 7);
        parser.feed(STREAM.slice(i, i + step));
        i += step;
      }
      expect(seen).toEqual(EXPECTED);
    }
  });

  it("handles CRLF line endings", () => {
    const seen: string[] = [];
    const parser = new SseParser((d) => seen.push(d));
    parser.feed('data: {"a": 1}\r\n\r\ndata: {"b": 2}\r\n\r\n');
    expect(seen).toEqual(['{"a": 1}', '{"b": 2}']);
  });

  it("keeps a trailing partial frame buffered", () => {
    const seen: string[] = [];
    const parser = new SseParser((d) => seen.push(d));
    parser.feed("data: unfinished");
    expect(seen).toEqual([]);
    parser.feed("\n\n");
    expect(seen).toEqual(["unfinished"]);
  });
});

describe("subscribeSse", () => {
  let server: Server | null = null;

  afterEach(() => {
    server?.close();
    server = null;
  });

  async function listen(handler: Parameters<typeof createServer>[1]): Promise<string> {
    server = createServer(handler);
    await new Promise<void>((resolve) => server!.listen(0, "127.0.0.1", resolve));
    const { port } = server.address() as AddressInfo;
    return `http://127.0.0.1:${port}/events`;
  }

  it("delivers frames from a live stream and stops on close()", async () => {
    const url = await listen((_req, res) => {
      res.writeHead(200, { "Content-Type": "text/event-stream" });
      res.write('data: {"n": 1}\n\n');
      res.write('data: {"n": 2}\n\n');
      // stream stays open; the client side decides when to stop
    });
    const seen: string[] = [];
    const sub = subscribeSse(fetch, url, (d) => seen.push(d));
    const deadline = Date.now() + 5000;
    while (seen.length < 2 && Date.now() < deadline) {
      await new Promise((r) => setTimeout(r, 10));
    }
    expect(seen).toEqual(['{"n": 1}', '{"n": 2}']);
    sub.close();
    await sub.done; // aborting on purpose must not reject
  });

  it("reports transport failures through onError", async () => {
    const url = await listen((_req, res) => {
      res.writeHead(503);
      res.end();
    });
    const errors: unknown[] = [];
    const sub = subscribeSse(fetch, url, () => {}, (e) => errors.push(e));
    await sub.done;
    expect(errors).toHaveLength(1);
    expect(String(errors[0])).toContain("503");
  });
});
