/**
 * Server configuration from flags and an optional JSON config file.
 * Flags override file values; every file key has a matching flag.
 *
 *   --config <path>       JSON file with the keys below (snake_case)
 *   --listen <host:port>  TCP listen address
 *   --stdio               speak frames on stdin/stdout instead
 *   --backend <name>      "conformance" (default) or "real-model"
 *   --model <id>          model identifier for the real-model backend
 *   --patch <HxWxC>       negotiated patch shape, default 64x64x4
 *   --steps <N>           schedule length, default 50
 *   --beta-start <x>      default 0.004
 *   --beta-end <x>        default 0.35
 *   --mean <x>            conformance clean-data mean, default 0
 *   --variance <x>        conformance clean-data variance, default 1
 */

import * as fs from "fs";
import { parseArgs } from "util";

import { CONFIG_DEFAULTS, ServerConfig } from "./server";

export class ConfigError extends Error {}

interface RawConfig {
  listen?: string;
  stdio?: boolean;
  backend?: string;
  model?: string;
  patch?: string | number[];
  steps?: number | string;
  beta_start?: number | string;
  beta_end?: number | string;
  mean?: number | string;
  variance?: number | string;
}

const FILE_KEYS = new Set([
  "listen",
  "stdio",
  "backend",
  "model",
  "patch",
  "steps",
  "beta_start",
  "beta_end",
  "mean",
  "variance",
]);

function parsePatch(value: string | number[]): [number, number, number] {
  const parts =
    typeof value === "string" ? value.split("x").map((p) => Number(p)) : value.map(Number);
  if (parts.length !== 3 || parts.some((d) => !Number.isInteger(d) || d < 1)) {
    throw new ConfigError(`patch must be three positive integers HxWxC, got ${JSON.stringify(value)}`);
  }
  return [parts[0], parts[1], parts[2]];
}

function parseNumber(key: string, value: number | string): number {
  const num = typeof value === "number" ? value : Number(value);
  if (!Number.isFinite(num)) {
    throw new ConfigError(`${key} must be a number, got ${JSON.stringify(value)}`);
  }
  return num;
}

function parseInteger(key: string, value: number | string): number {
  const num = parseNumber(key, value);
  if (!Number.isInteger(num) || num < 1) {
    throw new ConfigError(`${key} must be a positive integer, got ${JSON.stringify(value)}`);
  }
  return num;
}

function loadFile(path: string): RawConfig {
  let doc: unknown;
  try {
    doc = JSON.parse(fs.readFileSync(path, "utf-8"));
  } catch (exc) {
    throw new ConfigError(`config file ${path}: ${exc instanceof Error ? exc.message : exc}`);
  }
  if (doc === null || typeof doc !== "object" || Array.isArray(doc)) {
    throw new ConfigError(`config file ${path} must hold a JSON object`);
  }
  for (const key of Object.keys(doc)) {
    if (!FILE_KEYS.has(key)) {
      throw new ConfigError(`unknown config key ${JSON.stringify(key)}`);
    }
  }
  return doc as RawConfig;
}

/** Parse argv (no leading node/script) into a validated ServerConfig. */
export function loadServerConfig(argv: string[]): ServerConfig {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        config: { type: "string" },
        listen: { type: "string" },
        stdio: { type: "boolean" },
        backend: { type: "string" },
        model: { type: "string" },
        patch: { type: "string" },
        steps: { type: "string" },
        "beta-start": { type: "string" },
        "beta-end": { type: "string" },
        mean: { type: "string" },
        variance: { type: "string" },
      },
      allowPositionals: false,
    });
  } catch (exc) {
    throw new ConfigError(exc instanceof Error ? exc.message : String(exc));
  }
  const flags = parsed.values;
  const raw: RawConfig = flags.config ? loadFile(flags.config) : {};

  if (flags.listen !== undefined) raw.listen = flags.listen;
  if (flags.stdio !== undefined) raw.stdio = flags.stdio;
  if (flags.backend !== undefined) raw.backend = flags.backend;
  if (flags.model !== undefined) raw.model = flags.model;
  if (flags.patch !== undefined) raw.patch = flags.patch;
  if (flags.steps !== undefined) raw.steps = flags.steps;
  if (flags["beta-start"] !== undefined) raw.beta_start = flags["beta-start"];
  if (flags["beta-end"] !== undefined) raw.beta_end = flags["beta-end"];
  if (flags.mean !== undefined) raw.mean = flags.mean;
  if (flags.variance !== undefined) raw.variance = flags.variance;

  if (raw.stdio && raw.listen) {
    throw new ConfigError("choose one transport: --stdio or --listen, not both");
  }
  if (!raw.stdio && !raw.listen) {
    throw new ConfigError("a transport is required: --stdio or --listen <host:port>");
  }
  if (raw.listen !== undefined) {
    const colon = raw.listen.lastIndexOf(":");
    const port = colon < 0 ? NaN : Number(raw.listen.slice(colon + 1));
    if (colon < 1 || !Number.isInteger(port) || port < 0 || port > 65535) {
      throw new ConfigError(`listen address must be host:port, got ${JSON.stringify(raw.listen)}`);
    }
  }
  const backend = raw.backend ?? CONFIG_DEFAULTS.backend;
  if (backend !== "conformance" && backend !== "real-model") {
    throw new ConfigError(`backend must be "conformance" or "real-model", got ${JSON.stringify(backend)}`);
  }

  const config: ServerConfig = {
    listen: raw.stdio ? null : raw.listen ?? null,
    backend,
    model: raw.model ?? CONFIG_DEFAULTS.model,
    patch: raw.patch !== undefined ? parsePatch(raw.patch) : [...CONFIG_DEFAULTS.patch],
    steps: raw.steps !== undefined ? parseInteger("steps", raw.steps) : CONFIG_DEFAULTS.steps,
    betaStart:
      raw.beta_start !== undefined
        ? parseNumber("beta_start", raw.beta_start)
        : CONFIG_DEFAULTS.betaStart,
    betaEnd:
      raw.beta_end !== undefined ? parseNumber("beta_end", raw.beta_end) : CONFIG_DEFAULTS.betaEnd,
    mean: raw.mean !== undefined ? parseNumber("mean", raw.mean) : CONFIG_DEFAULTS.mean,
    variance:
      raw.variance !== undefined
        ? parseNumber("variance", raw.variance)
        : CONFIG_DEFAULTS.variance,
  };
  if (!(config.variance > 0)) {
    throw new ConfigError(`variance must be strictly positive, got ${config.variance}`);
  }
  return config;
}

/** Split a validated listen address into host and port. */
export function splitListen(listen: string): { host: string; port: number } {
  const colon = listen.lastIndexOf(":");
  return { host: listen.slice(0, colon), port: Number(listen.slice(colon + 1)) };
}
