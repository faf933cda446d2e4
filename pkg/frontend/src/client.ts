import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import readline from "node:readline";

import {
  BridgeReply,
  BridgeRequestError,
  BridgeTransportError,
  DecodedMessage,
  WatermarkConfig,
} from "./types.js";

const PROTOCOL_VERSION = 1;

interface Pending {
  resolve: (reply: BridgeReply) => void;
  reject: (err: Error) => void;
}

export interface SpawnOptions {
  /** command to launch the core; defaults to the installed CLI via python */
  command?: string;
  args?: string[];
  cwd?: string;
}

/**
 * Client for one bridge subprocess. The protocol is strictly
 * request/response, so requests are serialized through a FIFO of pending
 * resolvers; callers needing parallelism spawn more clients.
 */
export class BridgeClient {
  private readonly child: ChildProcessWithoutNullStreams;
  private readonly pending: Pending[] = [];
  private exited = false;
  private exitCode: number | null = null;

  private constructor(child: ChildProcessWithoutNullStreams) {
    this.child = child;
    const lines = readline.createInterface({ input: child.stdout });
    lines.on("line", (line) => this.onLine(line));
    child.on("exit", (code) => {
      this.exited = true;
      this.exitCode = code;
      this.failAllPending(new BridgeTransportError(`server exited with code ${code}`));
    });
    child.on("error", (err) => {
      this.failAllPending(new BridgeTransportError(`spawn failed: ${err.message}`));
    });
  }

  /** Launch the server without handshaking; for protocol-level tests. */
  static spawnRaw(options: SpawnOptions = {}): BridgeClient {
    const command = options.command ?? "python3";
    const args = options.args ?? ["-m", "tokenmark.cli", "serve"];
    const child = spawn(command, args, { cwd: options.cwd, stdio: "pipe" });
    return new BridgeClient(child);
  }

  static async spawn(options: SpawnOptions = {}): Promise<BridgeClient> {
    const client = BridgeClient.spawnRaw(options);
    const hello = await client.sendRaw(JSON.stringify({ hello: PROTOCOL_VERSION }));
    if ((hello as { hello?: number }).hello !== PROTOCOL_VERSION) {
      await client.shutdown();
      throw new BridgeTransportError(`handshake refused: ${JSON.stringify(hello)}`);
    }
    return client;
  }

  private onLine(line: string): void {
    const waiter = this.pending.shift();
    if (!waiter) {
      return; // unsolicited line; protocol forbids it, nothing to pair it with
    }
    try {
      waiter.resolve(JSON.parse(line) as BridgeReply);
    } catch (err) {
      waiter.reject(new BridgeTransportError(`unparseable reply: ${line}`));
    }
  }

  private failAllPending(err: Error): void {
    while (this.pending.length > 0) {
      this.pending.shift()!.reject(err);
    }
  }

  /** Write one raw line and await the paired reply line. */
  sendRaw(line: string): Promise<BridgeReply> {
    if (this.exited) {
      return Promise.reject(new BridgeTransportError("server already exited"));
    }
    return new Promise<BridgeReply>((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.child.stdin.write(line + "\n");
    });
  }

  private async request(body: Record<string, unknown>): Promise<BridgeReply> {
    const reply = await this.sendRaw(JSON.stringify(body));
    const error = (reply as { error?: { kind: string; detail?: string } }).error;
    if (error) {
      throw new BridgeRequestError(error);
    }
    return reply;
  }

  /** Register a config + message; returns the session id. */
  async open(config: WatermarkConfig, messageHex: string): Promise<string> {
    const reply = await this.request({ op: "open", config, message_hex: messageHex });
    return reply.session as string;
  }

  /** One step's composite watermarked distribution. */
  async reweight(session: string, probs: number[], context: number[]): Promise<number[]> {
    const reply = await this.request({ op: "reweight", session, probs, context });
    return reply.probs as number[];
  }

  /** Recover the message from a bare token sequence. */
  async detect(session: string, tokens: number[]): Promise<DecodedMessage> {
    const reply = await this.request({ op: "detect", session, tokens });
    return reply as unknown as DecodedMessage;
  }

  async close(session: string): Promise<void> {
    await this.request({ op: "close", session });
  }

  /** End stdin and wait for the server to exit; returns its exit code. */
  shutdown(): Promise<number | null> {
    if (this.exited) {
      return Promise.resolve(this.exitCode);
    }
    return new Promise((resolve) => {
      this.child.once("exit", (code) => resolve(code));
      this.child.stdin.end();
    });
  }

  get running(): boolean {
    return !this.exited;
  }
}
