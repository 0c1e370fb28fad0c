"""Network-mode fuzz: the same SimClient logic driven over live websockets
against a running server. Real concurrency, so only the convergence
verdict is meaningful, not the trace. Two phases: every client generates
and gets its own ops acked, then (once the server revision is final) all
clients drain the stream to the same revision and hashes are compared."""
from __future__ import annotations

import asyncio
import hashlib
import json
import random
import time
import urllib.request

from .errors import StorypadError
from .events import StoryEvent
from .model import Story, canonical_json, story_hash
from .ops import op_from_dict
from .server import protocol


def _http_json(method: str, url: str, body: dict | None = None) -> dict:
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    req.add_header("content-type", "application/json")
    with urllib.request.urlopen(req, timeout=10) as resp:
        return json.loads(resp.read().decode())


class _NetClient:
    def __init__(self, index: int, base_url: str, story_id: str, seed: int):
        self.index = index
        self.base_url = base_url
        self.story_id = story_id
        self.ws_url = base_url.replace("http://", "ws://").replace("https://", "wss://") + "/ws"
        self.rng = random.Random(seed)
        self.ws = None
        self.sim = None
        self.request_actions = 0

    async def connect(self) -> None:
        import websockets

        from .sim import SimClient

        self.ws = await websockets.connect(self.ws_url)
        await self.ws.send(protocol.encode_frame(protocol.hello(f"net{self.index}")))
        welcome = json.loads(await self.ws.recv())
        await self.ws.send(protocol.encode_frame(protocol.subscribe(self.story_id)))
        snap = json.loads(await self.ws.recv())
        sim = SimClient(welcome["actor_id"], Story.from_dict(snap["story"]), snap["revision"], self.rng)
        sim.event_seq = snap.get("event_seq", 0)
        self.sim = sim

    async def close(self) -> None:
        if self.ws is not None:
            await self.ws.close()

    def _dispatch(self, frame: dict) -> None:
        kind = frame.get("kind")
        if kind == protocol.REMOTE_OP:
            self.sim.on_remote_op(frame["revision"], op_from_dict(frame["operation"]))
        elif kind == protocol.ACK:
            self.sim.on_ack(frame["revision"], op_from_dict(frame["operation"]))
        elif kind == protocol.REQUEST_UPDATE:
            for raw in frame["events"]:
                self.sim.on_event(StoryEvent.from_dict(raw))
        elif kind == protocol.ERROR:
            raise StorypadError(f"server error: {frame.get('code')}: {frame.get('detail')}")

    async def _drain_available(self) -> None:
        while True:
            try:
                raw = await asyncio.wait_for(self.ws.recv(), timeout=0.005)
            except asyncio.TimeoutError:
                return
            self._dispatch(json.loads(raw))

    async def generate_phase(self, ops_target: int) -> None:
        made = 0
        deadline = time.monotonic() + 120
        while made < ops_target or not self.sim.quiesced():
            await self._drain_available()
            if made < ops_target and self.sim.can_generate():
                if self.rng.random() < 0.10:
                    await asyncio.get_running_loop().run_in_executor(None, self._request_action)
                else:
                    self.sim.generate_edit()
                made += 1
            frame = self.sim.next_frame()
            if frame is not None:
                await self.ws.send(protocol.encode_frame(protocol.op_frame(frame)))
            elif made >= ops_target:
                await asyncio.sleep(0.005)
            if time.monotonic() > deadline:
                raise StorypadError(f"client {self.index} stalled in generate phase")

    async def catch_up(self, final_revision: int) -> None:
        deadline = time.monotonic() + 60
        while self.sim.confirmed < final_revision:
            raw = await asyncio.wait_for(self.ws.recv(), timeout=30)
            self._dispatch(json.loads(raw))
            if time.monotonic() > deadline:
                raise StorypadError(f"client {self.index} stalled catching up")
        await self._drain_available()  # trailing request_update frames

    def _request_action(self) -> None:
        sim, rng = self.sim, self.rng
        self.request_actions += 1
        url = f"{self.base_url}/stories/{self.story_id}"
        try:
            sub = rng.random()
            if sub < 0.3:
                _http_json("POST", f"{url}/offers", {"display_name": f"Helper {sim.actor}", "actor_id": sim.actor})
                return
            if sub < 0.65:
                live = list(sim.story.live_sections())
                body = {
                    "requester_name": f"Req {sim.actor}",
                    "recipient": "@neighbor",
                    "request_text": f"improve {rng.randint(0, 99)}",
                }
                if live and rng.random() < 0.8:
                    body["section_id"] = rng.choice(live).id
                _http_json("POST", f"{url}/requests", body)
                return
            open_requests = [r.id for r in sim.story.requests if r.status == "open"]
            if open_requests:
                action = "fulfill" if sub < 0.85 else "dismiss"
                _http_json("POST", f"{url}/requests/{rng.choice(open_requests)}/{action}", {})
        except Exception:
            pass  # races against other clients: the server said no, fine


def run_network_fuzz(clients: int, ops_per_client: int, seed: int, server_url: str):
    from .sim import FuzzReport

    base = server_url.rstrip("/")
    try:
        created = _http_json("POST", f"{base}/stories", {"topic": "Network Fuzz", "creator_name": "runner"})
    except Exception as exc:
        return FuzzReport(
            converged=False, mode="network", clients=clients, ops_per_client=ops_per_client,
            seed=seed, error=f"server_unreachable: {exc}",
        )
    story_id = created["story_id"]
    net = [_NetClient(i, base, story_id, seed * 1000 + i) for i in range(clients)]

    async def go():
        await asyncio.gather(*(c.connect() for c in net))
        try:
            await asyncio.gather(*(c.generate_phase(ops_per_client) for c in net))
            final = _http_json("GET", f"{base}/stories/{story_id}.json")["story"]["revision"]
            await asyncio.gather(*(c.catch_up(final) for c in net))
        finally:
            await asyncio.gather(*(c.close() for c in net), return_exceptions=True)

    start = time.monotonic()
    try:
        asyncio.run(go())
    except Exception as exc:
        return FuzzReport(
            converged=False, mode="network", clients=clients, ops_per_client=ops_per_client,
            seed=seed, error=f"{type(exc).__name__}: {exc}",
        )
    elapsed = time.monotonic() - start

    server_story = _http_json("GET", f"{base}/stories/{story_id}.json")["story"]
    server_hash = hashlib.sha256(canonical_json(server_story)).hexdigest()
    hashes = {c.sim.actor: story_hash(c.sim.story) for c in net}
    return FuzzReport(
        converged=all(h == server_hash for h in hashes.values()),
        mode="network",
        clients=clients,
        ops_per_client=ops_per_client,
        seed=seed,
        server_hash=server_hash,
        state_hashes=hashes,
        final_revision=server_story["revision"],
        ops_applied=server_story["revision"],
        request_actions=sum(c.request_actions for c in net),
        elapsed_s=elapsed,
    )
