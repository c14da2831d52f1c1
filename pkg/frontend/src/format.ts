/**
 * Raw scalar extraction from JSON text.
 *
 * The metrics panel must display values exactly as the API serialized
 * them — re-parsing into doubles and re-stringifying can change the
 * digits (the two languages disagree on exponent thresholds). This
 * scanner walks the JSON source and records each scalar's verbatim
 * source slice, keyed by dotted path ("a.b", "xs[2]", root scalar "").
 */

export class JsonSyntaxError extends Error {
  override name = "JsonSyntaxError";
}

const NUMBER_RE = /-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?/y;

class Scanner {
  pos = 0;
  readonly out = new Map<string, string>();

  constructor(readonly text: string) {}

  fail(message: string): never {
    throw new JsonSyntaxError(`${message} at offset ${this.pos}`);
  }

  skipWs(): void {
    while (this.pos < this.text.length && " \t\n\r".includes(this.text[this.pos]!)) {
      this.pos++;
    }
  }

  value(path: string): void {
    this.skipWs();
    const ch = this.text[this.pos];
    if (ch === undefined) this.fail("unexpected end of input");
    if (ch === "{") return this.object(path);
    if (ch === "[") return this.array(path);
    const start = this.pos;
    if (ch === '"') {
      this.string();
    } else if (ch === "t" || ch === "f" || ch === "n") {
      const word = ch === "t" ? "true" : ch === "f" ? "false" : "null";
      if (this.text.startsWith(word, this.pos)) this.pos += word.length;
      else this.fail(`invalid literal`);
    } else {
      NUMBER_RE.lastIndex = this.pos;
      const m = NUMBER_RE.exec(this.text);
      if (!m || m[0].length === 0) this.fail(`unexpected character ${JSON.stringify(ch)}`);
      this.pos += m[0].length;
    }
    this.out.set(path, this.text.slice(start, this.pos));
  }

  /** Consume a string token and return its decoded value. */
  string(): string {
    if (this.text[this.pos] !== '"') this.fail("expected string");
    this.pos++;
    let decoded = "";
    while (true) {
      const ch = this.text[this.pos];
      if (ch === undefined) this.fail("unterminated string");
      this.pos++;
      if (ch === '"') return decoded;
      if (ch === "\\") {
        const esc = this.text[this.pos];
        if (esc === undefined) this.fail("unterminated escape");
        this.pos++;
        if (esc === "u") {
          const hex = this.text.slice(this.pos, this.pos + 4);
          if (!/^[0-9a-fA-F]{4}$/.test(hex)) this.fail("invalid \\u escape");
          decoded += String.fromCharCode(parseInt(hex, 16));
          this.pos += 4;
        } else {
          const simple: Record<string, string> = {
            '"': '"', "\\": "\\", "/": "/", b: "\b", f: "\f", n: "\n", r: "\r", t: "\t",
          };
          const rep = simple[esc];
          if (rep === undefined) this.fail(`invalid escape \\${esc}`);
          decoded += rep;
        }
      } else {
        decoded += ch;
      }
    }
  }

  object(path: string): void {
    this.pos++; // "{"
    this.skipWs();
    if (this.text[this.pos] === "}") {
      this.pos++;
      return;
    }
    while (true) {
      this.skipWs();
      const key = this.string();
      this.skipWs();
      if (this.text[this.pos] !== ":") this.fail("expected ':'");
      this.pos++;
      this.value(path === "" ? key : `${path}.${key}`);
      this.skipWs();
      const ch = this.text[this.pos];
      if (ch === ",") {
        this.pos++;
        continue;
      }
      if (ch === "}") {
        this.pos++;
        return;
      }
      this.fail("expected ',' or '}'");
    }
  }

  array(path: string): void {
    this.pos++; // "["
    this.skipWs();
    if (this.text[this.pos] === "]") {
      this.pos++;
      return;
    }
    for (let i = 0; ; i++) {
      this.value(`${path}[${i}]`);
      this.skipWs();
      const ch = this.text[this.pos];
      if (ch === ",") {
        this.pos++;
        continue;
      }
      if (ch === "]") {
        this.pos++;
        return;
      }
      this.fail("expected ',' or ']'");
    }
  }
}

/**
 * Map dotted-path → verbatim source slice for every scalar in `text`.
 *
 * String scalars keep their quotes and escapes exactly as written.
 */
export function rawScalars(text: string): Map<string, string> {
  const scanner = new Scanner(text);
  scanner.value("");
  scanner.skipWs();
  if (scanner.pos !== text.length) scanner.fail("trailing data");
  return scanner.out;
}
