import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { describe, expect, it } from "vitest";

import { ConfigError, loadServerConfig, splitListen } from "../src/config";

function writeConfig(doc: object): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-config-"));
  const file = path.join(dir, "server.json");
  fs.writeFileSync(file, JSON.stringify(doc));
  return file;
}

describe("server config", () => {
  it("fills defaults around an explicit transport", () => {
    const config = loadServerConfig(["--stdio"]);
    expect(config).toEqual({
      listen: null,
      backend: "conformance",
      model: "",
      patch: [64, 64, 4],
      steps: 50,
      betaStart: 0.004,
      betaEnd: 0.35,
      mean: 0.0,
      variance: 1.0,
    });
  });

  it("parses every flag", () => {
    const config = loadServerConfig([
      "--listen", "127.0.0.1:9000",
      "--backend", "conformance",
      "--model", "toy",
      "--patch", "4x3x2",
      "--steps", "40",
      "--beta-start", "0.01",
      "--beta-end", "0.2",
      "--mean", "0.3",
      "--variance", "0.25",
    ]);
    expect(config.listen).toBe("127.0.0.1:9000");
    expect(config.patch).toEqual([4, 3, 2]);
    expect(config.steps).toBe(40);
    expect(config.betaStart).toBe(0.01);
    expect(config.betaEnd).toBe(0.2);
    expect(config.mean).toBe(0.3);
    expect(config.variance).toBe(0.25);
    expect(splitListen(config.listen as string)).toEqual({ host: "127.0.0.1", port: 9000 });
  });

  it("reads a config file and lets flags override it", () => {
    const file = writeConfig({ stdio: true, steps: 10, patch: [8, 8, 1], mean: 0.5 });
    const config = loadServerConfig(["--config", file, "--steps", "20"]);
    expect(config.listen).toBeNull();
    expect(config.steps).toBe(20);
    expect(config.patch).toEqual([8, 8, 1]);
    expect(config.mean).toBe(0.5);
  });

  const rejected: Array<[string, string[]]> = [
    ["missing transport", []],
    ["both transports", ["--stdio", "--listen", "h:1"]],
    ["malformed listen address", ["--listen", "9000"]],
    ["malformed patch", ["--stdio", "--patch", "4x3"]],
    ["fractional steps", ["--stdio", "--steps", "2.5"]],
    ["unknown backend", ["--stdio", "--backend", "gpu"]],
    ["nonpositive variance", ["--stdio", "--variance", "0"]],
    ["unknown flag", ["--stdio", "--threads", "4"]],
  ];

  for (const [name, argv] of rejected) {
    it(`rejects ${name}`, () => {
      expect(() => loadServerConfig(argv)).toThrow(ConfigError);
    });
  }

  it("rejects an unknown config file key", () => {
    const file = writeConfig({ stdio: true, step: 10 });
    expect(() => loadServerConfig(["--config", file])).toThrow(/unknown config key "step"/);
  });

  it("rejects an unreadable config file", () => {
    expect(() => loadServerConfig(["--config", "/nonexistent/server.json"])).toThrow(ConfigError);
  });
});
