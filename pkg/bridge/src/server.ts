/**
 * Bridge server: answers CDN1 frames with an analytic conformance
 * backend. Ops:
 *
 *   hello   negotiate patch shape and step count; the reply carries the
 *           server's own terms, so a mismatched client can bail out
 *   eps     noise prediction on a float32 tensor (any well-formed shape;
 *           the analytic backend is elementwise)
 *   decode  toy PPM rendering of the payload tensor
 *   echo    payload returned bit-exact, for transport checks
 *
 * Malformed requests produce an op "error" reply with a reason and the
 * offending request_id; a broken frame stream (bad magic, oversized
 * lengths) gets one error frame and the connection is dropped, since
 * framing cannot be recovered. Frames on one connection are answered
 * strictly in arrival order; run one server per transport endpoint and
 * as many connections as you like.
 */

import * as net from "net";

import { alphaBarTable, GaussianModel, iidEps } from "./analytic";
import {
  decodeTensor,
  encodeFrame,
  encodeTensor,
  Frame,
  FrameDecoder,
  Header,
  JsonValue,
  ProtocolError,
} from "./frame";
import { ppmFromLatent } from "./image";

export interface ServerConfig {
  listen: string | null; // "host:port", or null for stdio mode
  backend: "conformance" | "real-model";
  model: string;
  patch: [number, number, number];
  steps: number;
  betaStart: number;
  betaEnd: number;
  mean: number;
  variance: number;
}

export const CONFIG_DEFAULTS: ServerConfig = {
  listen: null,
  backend: "conformance",
  model: "",
  patch: [64, 64, 4],
  steps: 50,
  betaStart: 0.004,
  betaEnd: 0.35,
  mean: 0.0,
  variance: 1.0,
};

class RequestError extends Error {}

function intField(header: Header, key: string): number {
  const v = header[key];
  if (typeof v !== "number" || !Number.isInteger(v)) {
    throw new RequestError(`field ${key} must be an integer, got ${JSON.stringify(v)}`);
  }
  return v;
}

function shapeField(header: Header): [number, number, number] {
  const v = header["shape"];
  if (!Array.isArray(v) || v.length !== 3 || !v.every((d) => Number.isInteger(d))) {
    throw new RequestError(`field shape must be three integers, got ${JSON.stringify(v)}`);
  }
  const [h, w, c] = v as number[];
  return [h, w, c];
}

function requestId(header: Header): number {
  const v = header["request_id"];
  return typeof v === "number" && Number.isInteger(v) ? v : 0;
}

export function errorFrame(rid: number, reason: string): Buffer {
  return encodeFrame({
    request_id: rid,
    op: "error",
    t: 0,
    shape: [0, 0, 0],
    condition: "",
    reason,
  });
}

export class BridgeServer {
  readonly config: ServerConfig;
  private readonly table: Float64Array;
  private readonly model: GaussianModel;

  constructor(config: ServerConfig) {
    this.config = config;
    this.table = alphaBarTable(config.steps, config.betaStart, config.betaEnd);
    this.model = { mean: config.mean, variance: config.variance };
  }

  /** Answer one frame; never throws, malformed requests yield error frames. */
  handleFrame(frame: Frame): Buffer {
    const rid = requestId(frame.header);
    try {
      return this.dispatch(frame);
    } catch (exc) {
      if (exc instanceof RequestError || exc instanceof ProtocolError || exc instanceof RangeError) {
        return errorFrame(rid, exc.message);
      }
      throw exc;
    }
  }

  private dispatch(frame: Frame): Buffer {
    const { header, payload } = frame;
    const rid = intField(header, "request_id");
    const op = header["op"];
    switch (op) {
      case "hello":
        return this.hello(rid);
      case "eps":
        return this.eps(rid, header, payload);
      case "decode":
        return this.decode(rid, header, payload);
      case "echo":
        return this.echo(rid, header, payload);
      default:
        throw new RequestError(`unknown op ${JSON.stringify(op)}`);
    }
  }

  private hello(rid: number): Buffer {
    return encodeFrame({
      request_id: rid,
      op: "hello_result",
      t: this.config.steps,
      shape: [...this.config.patch],
      condition: "",
    });
  }

  private eps(rid: number, header: Header, payload: Buffer): Buffer {
    const shape = shapeField(header);
    const t = intField(header, "t");
    if (t < 1 || t > this.config.steps) {
      throw new RequestError(`step ${t} outside 1..${this.config.steps}`);
    }
    const z = decodeTensor(payload, shape[0] * shape[1] * shape[2]);
    const eps = iidEps(z, this.table[t], this.model);
    return encodeFrame(
      {
        request_id: rid,
        op: "eps_result",
        t,
        shape: [...shape],
        condition: "",
      },
      encodeTensor(eps),
    );
  }

  private decode(rid: number, header: Header, payload: Buffer): Buffer {
    const [h, w, c] = shapeField(header);
    const z = decodeTensor(payload, h * w * c);
    const image = ppmFromLatent(z, h, w, c);
    return encodeFrame(
      {
        request_id: rid,
        op: "decode_result",
        t: 0,
        shape: [h, w, 3],
        condition: "",
      },
      image,
    );
  }

  private echo(rid: number, header: Header, payload: Buffer): Buffer {
    const t = intField(header, "t");
    const condition = typeof header["condition"] === "string" ? header["condition"] : "";
    const shape: JsonValue = Array.isArray(header["shape"]) ? header["shape"] : [0, 0, 0];
    return encodeFrame(
      {
        request_id: rid,
        op: "echo_result",
        t,
        shape,
        condition,
      },
      payload,
    );
  }

  /**
   * Wire the server to one connection's byte streams. Returns a feed
   * function for incoming chunks; `write` receives reply frames and
   * `drop` is called once when framing breaks.
   */
  connection(write: (data: Buffer) => void, drop: () => void): (chunk: Buffer) => void {
    const decoder = new FrameDecoder();
    let broken = false;
    return (chunk: Buffer) => {
      if (broken) {
        return;
      }
      let frames: Frame[];
      try {
        frames = decoder.feed(chunk);
      } catch (exc) {
        broken = true;
        const reason = exc instanceof Error ? exc.message : String(exc);
        write(errorFrame(0, reason));
        drop();
        return;
      }
      for (const frame of frames) {
        write(this.handleFrame(frame));
      }
    };
  }

  /** Serve frames on stdin/stdout. Resolves when stdin ends. */
  serveStdio(stdin: NodeJS.ReadableStream, stdout: NodeJS.WritableStream): Promise<void> {
    return new Promise((resolve) => {
      const feed = this.connection(
        (data) => stdout.write(data),
        () => resolve(),
      );
      stdin.on("data", (chunk: Buffer) => feed(chunk));
      stdin.on("end", () => resolve());
    });
  }

  /** Listen for TCP connections; resolves with the bound server. */
  serveTcp(host: string, port: number): Promise<net.Server> {
    const server = net.createServer((socket) => {
      const feed = this.connection(
        (data) => socket.write(data),
        () => socket.destroy(),
      );
      socket.on("data", feed);
      socket.on("error", () => socket.destroy());
    });
    return new Promise((resolve, reject) => {
      server.once("error", reject);
      server.listen(port, host, () => resolve(server));
    });
  }
}
