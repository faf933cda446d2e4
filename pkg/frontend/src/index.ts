export { BridgeClient, type SpawnOptions } from "./client.js";
export {
  BridgeRequestError,
  BridgeTransportError,
  type BridgeReply,
  type DecodedMessage,
  type WatermarkConfig,
} from "./types.js";
