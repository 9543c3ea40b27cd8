/**
 * CDN1 wire protocol: length-prefixed frames for remote denoising.
 *
 * Frame layout, little-endian throughout:
 *
 *     magic   4 bytes  "CDN1"
 *     hlen    u32      header byte length
 *     header  hlen     UTF-8 JSON object
 *     plen    u32      payload byte length
 *     payload plen     raw bytes (tensors: float32, row-major)
 *
 * Request headers carry {request_id, op, t, shape: [h, w, c], condition};
 * ops are "hello", "eps", "decode", and "echo". Responses mirror the
 * header with op "<op>_result"; failures come back as op "error" with a
 * "reason" field and the offending request_id.
 *
 * Header JSON is canonicalized (sorted keys, no spaces, ASCII escapes) so
 * frames are byte-reproducible across implementations.
 */

export const MAGIC = Buffer.from("CDN1", "ascii");
export const MAX_HEADER_BYTES = 1 << 20;
export const MAX_PAYLOAD_BYTES = 64 << 20;

export type JsonValue =
  | null
  | boolean
  | number
  | string
  | JsonValue[]
  | { [key: string]: JsonValue };

export type Header = { [key: string]: JsonValue };

export interface Frame {
  header: Header;
  payload: Buffer;
}

/** Raised on malformed frames; framing is unrecoverable afterwards. */
export class ProtocolError extends Error {}

/** JSON with sorted keys, no whitespace, and non-ASCII escaped to \uXXXX. */
export function canonicalJson(value: JsonValue): string {
  const plain = JSON.stringify(value, (_key, v: JsonValue) => {
    if (v !== null && typeof v === "object" && !Array.isArray(v)) {
      const sorted: { [key: string]: JsonValue } = {};
      for (const k of Object.keys(v).sort()) sorted[k] = v[k];
      return sorted;
    }
    return v;
  });
  return plain.replace(/[-￿]/g, (ch) => {
    return "\\u" + ch.charCodeAt(0).toString(16).padStart(4, "0");
  });
}

/** Serialize one frame with a canonical JSON header. */
export function encodeFrame(header: Header, payload: Buffer = Buffer.alloc(0)): Buffer {
  const raw = Buffer.from(canonicalJson(header), "utf-8");
  if (raw.length > MAX_HEADER_BYTES) {
    throw new ProtocolError(`header of ${raw.length} bytes exceeds cap`);
  }
  if (payload.length > MAX_PAYLOAD_BYTES) {
    throw new ProtocolError(`payload of ${payload.length} bytes exceeds cap`);
  }
  const frame = Buffer.alloc(8 + raw.length + 4 + payload.length);
  MAGIC.copy(frame, 0);
  frame.writeUInt32LE(raw.length, 4);
  raw.copy(frame, 8);
  frame.writeUInt32LE(payload.length, 8 + raw.length);
  payload.copy(frame, 12 + raw.length);
  return frame;
}

/** Row-major float32 little-endian bytes. */
export function encodeTensor(values: ArrayLike<number>): Buffer {
  const buf = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(values[i], i * 4);
  }
  return buf;
}

/** Read a float32 payload into doubles; length must match exactly. */
export function decodeTensor(payload: Buffer, count: number): Float64Array {
  if (payload.length !== count * 4) {
    throw new ProtocolError(
      `payload holds ${payload.length} bytes, ${count} floats need ${count * 4}`,
    );
  }
  const out = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = payload.readFloatLE(i * 4);
  }
  return out;
}

/**
 * Incremental frame reassembler for stream transports.
 *
 * Feed arbitrary byte chunks; complete {header, payload} frames come out.
 * Throws ProtocolError on bad magic or oversized declared lengths.
 */
export class FrameDecoder {
  private buf: Buffer = Buffer.alloc(0);

  feed(chunk: Buffer): Frame[] {
    this.buf = this.buf.length === 0 ? chunk : Buffer.concat([this.buf, chunk]);
    const out: Frame[] = [];
    for (;;) {
      const frame = this.tryTake();
      if (frame === null) {
        return out;
      }
      out.push(frame);
    }
  }

  private tryTake(): Frame | null {
    const buf = this.buf;
    if (buf.length < 8) {
      return null;
    }
    if (!buf.subarray(0, 4).equals(MAGIC)) {
      throw new ProtocolError(`bad magic ${buf.subarray(0, 4).toString("hex")}`);
    }
    const hlen = buf.readUInt32LE(4);
    if (hlen > MAX_HEADER_BYTES) {
      throw new ProtocolError(`declared header length ${hlen} exceeds cap`);
    }
    if (buf.length < 8 + hlen + 4) {
      return null;
    }
    const plen = buf.readUInt32LE(8 + hlen);
    if (plen > MAX_PAYLOAD_BYTES) {
      throw new ProtocolError(`declared payload length ${plen} exceeds cap`);
    }
    const total = 8 + hlen + 4 + plen;
    if (buf.length < total) {
      return null;
    }
    let header: unknown;
    try {
      header = JSON.parse(buf.subarray(8, 8 + hlen).toString("utf-8"));
    } catch (exc) {
      throw new ProtocolError(`undecodable header: ${exc}`);
    }
    if (header === null || typeof header !== "object" || Array.isArray(header)) {
      throw new ProtocolError("header must be a JSON object");
    }
    const payload = Buffer.from(buf.subarray(8 + hlen + 4, total));
    this.buf = Buffer.from(buf.subarray(total));
    return { header: header as Header, payload };
  }
}
