// Wire types for the stdio watermarking bridge. One JSON object per line,
// strictly request/response; floats are shortest round-trip decimals.

export interface WatermarkConfig {
  /** hex-encoded secret, at least 16 bytes */
  secret_key: string;
  vocab_size: number;
  message_bits: number;
  segment_bits: number;
  num_segments: number;
  num_layers: number;
  context_window: number;
  sampling_seed: number;
}

export interface DecodedMessage {
  bits_hex: string;
  margins: number[];
  evidence_count: number[];
}

export interface BridgeErrorBody {
  kind: string;
  detail?: string;
}

export type BridgeReply = Record<string, unknown>;

/** Error object sent by the server; the session stays usable afterwards. */
export class BridgeRequestError extends Error {
  readonly kind: string;
  readonly detail: string;

  constructor(body: BridgeErrorBody) {
    super(`${body.kind}: ${body.detail ?? ""}`);
    this.name = "BridgeRequestError";
    this.kind = body.kind;
    this.detail = body.detail ?? "";
  }
}

/** Transport-level failure: process died, handshake refused, stream closed. */
export class BridgeTransportError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "BridgeTransportError";
  }
}
