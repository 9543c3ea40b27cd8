/**
 * Entry point. Diagnostics go to stderr; stdout is reserved for frames
 * in stdio mode.
 *
 * Exit codes: 0 clean shutdown, 2 configuration error.
 */

import { ConfigError, loadServerConfig, splitListen } from "./config";
import { BridgeServer } from "./server";

async function main(): Promise<number> {
  let server: BridgeServer;
  try {
    const config = loadServerConfig(process.argv.slice(2));
    if (config.backend === "real-model") {
      // extension point: wire a real denoiser in here, keeping the frame
      // contract identical to the conformance backend
      throw new ConfigError(
        "the real-model backend needs an external diffusion runtime, which is not bundled; " +
          "use --backend conformance",
      );
    }
    server = new BridgeServer(config);
  } catch (exc) {
    if (exc instanceof ConfigError) {
      process.stderr.write(`config error: ${exc.message}\n`);
      return 2;
    }
    throw exc;
  }

  if (server.config.listen === null) {
    await server.serveStdio(process.stdin, process.stdout);
    return 0;
  }
  const { host, port } = splitListen(server.config.listen);
  const tcp = await server.serveTcp(host, port);
  const bound = tcp.address();
  if (bound !== null && typeof bound === "object") {
    process.stderr.write(`listening on ${bound.address}:${bound.port}\n`);
  }
  await new Promise<void>((resolve) => tcp.once("close", () => resolve()));
  return 0;
}

main().then(
  (code) => {
    process.exitCode = code;
  },
  (exc) => {
    process.stderr.write(`fatal: ${exc instanceof Error ? (exc.stack ?? exc.message) : exc}\n`);
    process.exitCode = 1;
  },
);
