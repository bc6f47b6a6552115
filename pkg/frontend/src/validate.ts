// Field parsers for the form inputs. Every parser returns a result
// object instead of throwing so panels can show inline errors.

export type Parsed<T> = { ok: true; value: T } | { ok: false; error: string };

function fail<T>(error: string): Parsed<T> {
  return { ok: false, error };
}

export function parsePort(text: string): Parsed<number> {
  const trimmed = text.trim();
  if (!/^\d+$/.test(trimmed)) return fail("port must be an integer");
  const value = Number(trimmed);
  if (value < 1 || value > 65535) return fail("port must be in 1..65535");
  return { ok: true, value };
}

export function parseIp(text: string): Parsed<string> {
  const trimmed = text.trim();
  const parts = trimmed.split(".");
  if (parts.length !== 4 || !parts.every((p) => /^\d{1,3}$/.test(p) && Number(p) <= 255)) {
    return fail("expected an IPv4 address like 127.0.0.1");
  }
  return { ok: true, value: trimmed };
}

export function parsePositiveReal(text: string, label: string): Parsed<number> {
  const value = Number(text.trim());
  if (text.trim() === "" || !Number.isFinite(value) || value <= 0) {
    return fail(`${label} must be a positive number`);
  }
  return { ok: true, value };
}

export function parsePositiveInt(text: string, label: string): Parsed<number> {
  const trimmed = text.trim();
  if (!/^\d+$/.test(trimmed) || Number(trimmed) < 1) {
    return fail(`${label} must be a positive integer`);
  }
  return { ok: true, value: Number(trimmed) };
}

/** All length-scale fields at once; count must match the input dimension. */
export function parseLengthScales(texts: string[], dIn: number): Parsed<number[]> {
  if (texts.length !== dIn) {
    return fail(`expected ${dIn} length scales, got ${texts.length}`);
  }
  const values: number[] = [];
  for (let i = 0; i < texts.length; i++) {
    const parsed = parsePositiveReal(texts[i], `Sigma L ${i + 1}`);
    if (!parsed.ok) return parsed;
    values.push(parsed.value);
  }
  return { ok: true, value: values };
}
