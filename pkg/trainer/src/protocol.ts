/** Client side of the simulator's newline-delimited JSON protocol.
 *
 * Spawns `sim serve --config <path>` and exchanges one JSON object per
 * line over the child's stdio. Requests are answered strictly in order,
 * so replies are matched to callers with a FIFO queue.
 */
import { spawn, type ChildProcessByStdio } from "node:child_process";
import type { Readable, Writable } from "node:stream";
import { createInterface, type Interface } from "node:readline";

export interface ObsPayload {
  data: number[];
  shape: [number, number];
  metadata: {
    num_users: number;
    history_len: number;
    num_layers: number;
    future_window: number;
    [key: string]: unknown;
  };
}

export interface AccumulatorInfo {
  quality_sum_db: number;
  variation_sum_db: number;
  stall_sum_s: number;
  gop_count: number;
}

export interface StepReply {
  obs: ObsPayload;
  rewards: number[];
  done: boolean;
  info: {
    accumulators: AccumulatorInfo[];
    multipliers: { mu0: number; mu1: number };
    [key: string]: unknown;
  };
}

export class ProtocolError extends Error {
  constructor(public code: string, message: string) {
    super(`${code}: ${message}`);
  }
}

type Reply = Record<string, unknown>;

export class EnvClient {
  private proc: ChildProcessByStdio<Writable, Readable, null>;
  private lines: Interface;
  private pending: Array<{
    resolve: (reply: Reply) => void;
    reject: (err: Error) => void;
  }> = [];

  constructor(configPath: string, simCommand: string[] = ["sim"]) {
    const [cmd, ...prefix] = simCommand;
    this.proc = spawn(cmd, [...prefix, "serve", "--config", configPath], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    this.lines = createInterface({ input: this.proc.stdout });
    this.lines.on("line", (line) => {
      const waiter = this.pending.shift();
      if (!waiter) return;
      let reply: Reply;
      try {
        reply = JSON.parse(line) as Reply;
      } catch (err) {
        waiter.reject(err as Error);
        return;
      }
      const error = reply["error"] as { code: string; message: string } | undefined;
      if (error) waiter.reject(new ProtocolError(error.code, error.message));
      else waiter.resolve(reply);
    });
    this.proc.on("exit", () => {
      for (const waiter of this.pending.splice(0)) {
        waiter.reject(new Error("environment server exited"));
      }
    });
  }

  private request(msg: Record<string, unknown>): Promise<Reply> {
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.proc.stdin.write(JSON.stringify(msg) + "\n");
    });
  }

  async reset(seed: number): Promise<ObsPayload> {
    const reply = await this.request({ cmd: "reset", seed });
    return reply["obs"] as ObsPayload;
  }

  async step(layers: number[], placements: number[]): Promise<StepReply> {
    const reply = await this.request({ cmd: "step", layers, placements });
    return reply as unknown as StepReply;
  }

  async updateMultipliers(): Promise<{ mu0: number; mu1: number }> {
    const reply = await this.request({ cmd: "update_multipliers" });
    return { mu0: reply["mu0"] as number, mu1: reply["mu1"] as number };
  }

  async close(): Promise<void> {
    try {
      await this.request({ cmd: "close" });
    } finally {
      this.proc.stdin.end();
    }
  }
}

/** Per-user observation rows from a flat payload. */
export function obsRows(obs: ObsPayload): number[][] {
  const [n, width] = obs.shape;
  const rows: number[][] = [];
  for (let i = 0; i < n; i += 1) {
    rows.push(obs.data.slice(i * width, (i + 1) * width));
  }
  return rows;
}
