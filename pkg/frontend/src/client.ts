// The collaboration reducer: one client replica of one story.
//
// All state changes funnel through handleFrame (server messages) and
// localEdit/requestRevert (user intents). Local edits apply optimistically
// and rebase against the server stream; one op is in flight at a time;
// reverts skip the optimistic path and land via their materialized ack.
// On base_too_old the client silently resubscribes from a snapshot and
// replays its unacked local ops.

import { Story, StoryEvent, applyEvent, normalizeStory } from "./model.js";
import { OperationWire, applyOp, asNoop, transformOp } from "./ops.js";
import { ClientFrame, ServerFrame, encodeFrame } from "./protocol.js";

export type SendFn = (text: string) => void;

export interface ClientCallbacks {
  onChange?: (client: CollabClient) => void;
  onStatus?: (status: string) => void;
}

let serial = 0;

export class CollabClient {
  story: Story | null = null;
  actorId: string | null = null;
  confirmed = 0;
  eventSeq = 0;
  pending: OperationWire[] = [];
  bypass = new Set<string>();
  status = "connecting";
  outstanding = 0;

  private inflight = false;
  private readonly send: SendFn;
  private readonly callbacks: ClientCallbacks;

  constructor(
    readonly storyId: string,
    readonly clientName: string,
    send: SendFn,
    callbacks: ClientCallbacks = {},
  ) {
    this.send = send;
    this.callbacks = callbacks;
  }

  start(): void {
    this.sendFrame({ kind: "hello", client_name: this.clientName });
  }

  private sendFrame(frame: ClientFrame): void {
    this.send(encodeFrame(frame));
  }

  private setStatus(status: string): void {
    this.status = status;
    this.callbacks.onStatus?.(status);
  }

  private changed(): void {
    this.callbacks.onChange?.(this);
  }

  // -- inbound ---------------------------------------------------------------

  handleFrame(frame: ServerFrame): void {
    switch (frame.kind) {
      case "welcome":
        this.actorId = frame.actor_id;
        this.sendFrame({ kind: "subscribe", story_id: this.storyId });
        return;
      case "snapshot": {
        this.story = normalizeStory(frame.story);
        this.confirmed = frame.revision;
        this.eventSeq = frame.event_seq;
        this.outstanding = frame.outstanding_count;
        this.inflight = false;
        this.replayPending();
        this.setStatus("live");
        this.pump();
        this.changed();
        return;
      }
      case "ops_since": {
        for (const entry of frame.ops) {
          this.absorbRemote(entry.revision, entry.operation);
        }
        this.inflight = false;
        this.setStatus("live");
        this.pump();
        this.changed();
        return;
      }
      case "remote_op":
        this.absorbRemote(frame.revision, frame.operation);
        this.changed();
        return;
      case "ack":
        this.handleAck(frame.revision, frame.operation);
        this.pump();
        this.changed();
        return;
      case "request_update": {
        for (const event of frame.events) {
          if (event.seq <= this.eventSeq || !this.story) continue;
          this.eventSeq = event.seq;
          this.story = applyEvent(this.story, event);
        }
        this.outstanding = frame.outstanding_count;
        this.changed();
        return;
      }
      case "error":
        if (frame.code === "base_too_old") {
          // silent resync: fresh snapshot, then replay unacked local ops
          this.inflight = false;
          this.setStatus("resync");
          this.sendFrame({ kind: "subscribe", story_id: this.storyId });
          return;
        }
        if (this.inflight && this.pending.length > 0) {
          // the head op was refused outright; drop it rather than wedge
          this.pending.shift();
          this.inflight = false;
          this.pump();
        }
        this.setStatus(`error:${frame.code}`);
        return;
    }
  }

  private absorbRemote(revision: number, op: OperationWire): void {
    if (!this.story || revision <= this.confirmed) return; // duplicate delivery
    if (revision !== this.confirmed + 1) {
      // gap: force a resync rather than guessing
      this.setStatus("resync");
      this.sendFrame({ kind: "subscribe", story_id: this.storyId, have_revision: this.confirmed });
      return;
    }
    let incoming = op;
    const rebased: OperationWire[] = [];
    for (const p of this.pending) {
      rebased.push(transformOp(p, incoming));
      incoming = transformOp(incoming, p);
    }
    this.pending = rebased;
    this.story = applyOp(this.story, incoming);
    this.confirmed = revision;
  }

  private handleAck(revision: number, op: OperationWire): void {
    if (this.bypass.has(op.op_id)) {
      this.bypass.delete(op.op_id);
      this.inflight = false;
      this.pending = this.pending.filter((p) => p.op_id !== op.op_id);
      if (revision > this.confirmed) this.absorbRemote(revision, op);
      return;
    }
    if (this.pending.length === 0 || this.pending[0].op_id !== op.op_id) {
      return; // stale duplicate ack
    }
    this.pending.shift();
    this.inflight = false;
    if (revision === this.confirmed + 1 && this.story) {
      this.confirmed = revision;
      this.story = { ...this.story, revision };
    }
  }

  private replayPending(): void {
    if (!this.story) return;
    const survivors: OperationWire[] = [];
    for (const op of this.pending) {
      if (this.bypass.has(op.op_id)) {
        survivors.push(op); // reverts carry no local effect to replay
        continue;
      }
      try {
        this.story = { ...applyOp(this.story, op), revision: this.story.revision };
        survivors.push(op);
      } catch {
        // the op no longer makes sense against the resynced state
      }
    }
    this.pending = survivors;
  }

  private pump(): void {
    if (this.inflight || this.pending.length === 0 || this.status === "connecting") return;
    const head = { ...this.pending[0], base_revision: this.confirmed };
    this.inflight = true;
    this.sendFrame({ kind: "op", operation: head });
  }

  // -- local intents ------------------------------------------------------------

  nextOpId(): string {
    serial += 1;
    return `${this.actorId ?? "pre"}-${Date.now().toString(36)}-${serial}`;
  }

  localEdit(payload: Record<string, unknown>): OperationWire | null {
    if (!this.story || !this.actorId) return null;
    const op: OperationWire = {
      actor: this.actorId,
      base_revision: this.confirmed,
      op_id: this.nextOpId(),
      ...payload,
    } as OperationWire;
    try {
      // optimistic apply; the ack confirms the revision slot later
      this.story = { ...applyOp(this.story, op), revision: this.story.revision };
    } catch (err) {
      return null; // invalid against current state: never send it
    }
    this.pending.push(op);
    this.pump();
    this.changed();
    return op;
  }

  requestRevert(sectionId: string, targetRevision: number): OperationWire | null {
    if (!this.story || !this.actorId) return null;
    const op: OperationWire = {
      actor: this.actorId,
      base_revision: this.confirmed,
      kind: "revert_section",
      op_id: this.nextOpId(),
      section_id: sectionId,
      target_revision: targetRevision,
    };
    this.bypass.add(op.op_id);
    this.pending.push(op);
    this.pump();
    return op;
  }

  quiesced(): boolean {
    return this.pending.length === 0 && this.bypass.size === 0;
  }
}
