/** Spawning helpers around the core CLI. */

import { spawnSync } from "node:child_process";

import { CliError } from "./errors.js";

/**
 * Resolve the CLI invocation. `AFFCUT_CLI` may hold a full command line
 * (for example "python3 -m affcut.cli"); the default expects `affcut` on
 * the PATH.
 */
export function cliCommand(): string[] {
  const env = process.env.AFFCUT_CLI;
  if (env && env.trim().length > 0) {
    return env.trim().split(/\s+/);
  }
  return ["affcut"];
}

export function runCli(args: string[], input?: string): string {
  const [command, ...prefix] = cliCommand();
  const proc = spawnSync(command, [...prefix, ...args], {
    input,
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw new CliError(`failed to launch ${command}: ${proc.error.message}`, null);
  }
  if (proc.status !== 0) {
    const detail = (proc.stderr || proc.stdout || "").trim();
    throw new CliError(`affcut ${args[0]} failed: ${detail}`, proc.status);
  }
  return proc.stdout;
}
