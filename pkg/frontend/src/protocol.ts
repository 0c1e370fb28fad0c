// Realtime frame types; one JSON object per message, discriminated by kind.

import { Story, StoryEvent } from "./model.js";
import { OperationWire } from "./ops.js";

export interface HelloFrame {
  kind: "hello";
  client_name: string;
}

export interface SubscribeFrame {
  kind: "subscribe";
  story_id: string;
  have_revision?: number;
}

export interface OpFrame {
  kind: "op";
  operation: OperationWire;
}

export interface WelcomeFrame {
  kind: "welcome";
  actor_id: string;
}

export interface SnapshotFrame {
  kind: "snapshot";
  event_seq: number;
  outstanding_count: number;
  revision: number;
  story: Story;
}

export interface OpsSinceFrame {
  kind: "ops_since";
  ops: { operation: OperationWire; revision: number }[];
  revision: number;
}

export interface AckFrame {
  kind: "ack";
  operation: OperationWire;
  revision: number;
}

export interface RemoteOpFrame {
  kind: "remote_op";
  operation: OperationWire;
  revision: number;
}

export interface RequestUpdateFrame {
  kind: "request_update";
  events: StoryEvent[];
  outstanding_count: number;
}

export interface ErrorFrame {
  kind: "error";
  code: string;
  detail: string;
}

export type ServerFrame =
  | WelcomeFrame
  | SnapshotFrame
  | OpsSinceFrame
  | AckFrame
  | RemoteOpFrame
  | RequestUpdateFrame
  | ErrorFrame;

export type ClientFrame = HelloFrame | SubscribeFrame | OpFrame;

export function parseServerFrame(raw: string): ServerFrame {
  const frame = JSON.parse(raw);
  if (!frame || typeof frame !== "object" || typeof frame.kind !== "string") {
    throw new Error("malformed server frame");
  }
  return frame as ServerFrame;
}

export function encodeFrame(frame: ClientFrame): string {
  return JSON.stringify(frame);
}
