"""HTTP + realtime gateway.

Routes (core):
    POST /stories                   create; 201 {story_id, edit_url, ...}
    GET  /stories/{id}.json         {"story": canonical story, "views": {...}}
    GET  /stories/{id}/view         read-only HTML (counts a first_party view)
    GET  /stories/{id}/edit         edit bootstrap page
    GET  /stories/{id}/embed.js     copy-paste loader -> live framed story
    GET  /stories/{id}/embed        the framed live view (counts an embed view)
    GET  /stories/{id}/export.html  deterministic static export
    GET  /r/{token}                 request link: redirect / terminal page
    GET  /healthz
    WS   /ws                        realtime session (see protocol.py)

plus the recruitment/history/suggestion endpoints the web client uses.
Sessions are concurrent; every story mutation funnels through that story's
Room task.
"""
from __future__ import annotations

import argparse
import asyncio
import secrets
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse, RedirectResponse, Response
from fastapi.staticfiles import StaticFiles

from .. import headline as headline_mod
from .. import media as media_mod
from ..config import ServerConfig
from ..errors import (
    CorruptStore,
    MalformedOperation,
    NotFound,
    StorypadError,
    UnknownToken,
)
from ..model import REQUEST_OPEN, Story
from ..persistence import Store
from ..recruitment import FileNotifier, TokenIndex
from ..service import StoryService
from . import pages, protocol
from .rooms import Room, Subscriber

_HTTP_CODES = {
    "not_found": 404,
    "unknown_token": 404,
    "unknown_section": 404,
    "unknown_request": 404,
    "already_resolved": 409,
    "base_too_old": 409,
    "corrupt_store": 500,
    "io_failure": 500,
}


def _http_error(exc: StorypadError) -> JSONResponse:
    return JSONResponse(
        {"code": exc.code, "detail": exc.detail}, status_code=_HTTP_CODES.get(exc.code, 400)
    )


class Gateway:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.store = Store(config.data_dir, fsync=config.fsync)
        self.rooms: dict[str, Room] = {}
        self.token_index = TokenIndex()
        notifications = config.notifications_path or str(Path(config.data_dir) / "notifications.jsonl")
        Path(config.data_dir).mkdir(parents=True, exist_ok=True)
        self.notifier = FileNotifier(notifications)
        self.headline_catalog = headline_mod.load_catalog(config.template_path)
        self.media_rules = media_mod.load_rules(config.rules_path)
        self.fetcher: media_mod.Fetcher | None = None

    # -- story lifecycle ---------------------------------------------------------

    def _service_kwargs(self) -> dict:
        return {
            "token_index": self.token_index,
            "notifier": self.notifier,
            "base_url": self.config.base_url,
            "snapshot_interval": self.config.snapshot_interval,
        }

    def open_existing(self) -> None:
        for story_id in self.store.story_ids():
            if story_id in self.rooms:
                continue
            try:
                service = StoryService.open(
                    self.store, story_id, rebase_window=self.config.rebase_window, **self._service_kwargs()
                )
            except (NotFound, CorruptStore):
                continue  # unreadable story directories don't block the rest
            self.rooms[story_id] = Room(service, queue_depth=self.config.queue_depth)

    def create_story(self, topic: str, creator_name: str) -> Room:
        creator = "u" + secrets.token_urlsafe(8)
        service = StoryService.create(
            topic,
            creator,
            store=self.store,
            rebase_window=self.config.rebase_window,
            **self._service_kwargs(),
        )
        room = Room(service, queue_depth=self.config.queue_depth)
        self.rooms[service.story.id] = room
        return room

    def room(self, story_id: str) -> Room:
        room = self.rooms.get(story_id)
        if room is None:
            raise NotFound(f"no story {story_id!r}")
        return room

    async def shutdown(self) -> None:
        for room in self.rooms.values():
            await room.stop()


def build_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    gateway = Gateway(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        gateway.open_existing()
        yield
        await gateway.shutdown()

    app = FastAPI(title="storypad", lifespan=lifespan)
    app.state.gateway = gateway
    base = config.base_url.rstrip("/")

    static_dir = config.static_dir
    if static_dir and Path(static_dir).is_dir():
        app.mount("/static", StaticFiles(directory=static_dir), name="static")

    @app.exception_handler(StorypadError)
    async def on_error(_request: Request, exc: StorypadError):
        return _http_error(exc)

    def story_urls(story: Story) -> dict:
        return {
            "edit_url": f"{base}/stories/{story.id}/edit",
            "embed_snippet": pages.embed_snippet(story.id, base),
            "json_url": f"{base}/stories/{story.id}.json",
            "story_id": story.id,
            "view_url": f"{base}/stories/{story.id}/view",
        }

    # -- HTTP ----------------------------------------------------------------

    @app.get("/healthz")
    async def healthz():
        return {"ok": True, "stories": len(gateway.rooms)}

    @app.post("/stories", status_code=201)
    async def create_story(body: dict):
        topic = str(body.get("topic", ""))
        creator_name = str(body.get("creator_name", "")).strip()
        room = gateway.create_story(topic, creator_name or "anonymous")

        def seed_contributor():
            if creator_name:
                actor = room.service.story.contributors[0][0]
                from .. import events as ev

                room.service._emit(ev.CONTRIBUTOR_SEEN, {"actor": actor, "display_name": creator_name})

        await room.call(seed_contributor)
        return story_urls(room.service.story)

    @app.get("/stories/{story_id}.json")
    async def story_json(story_id: str):
        room = gateway.room(story_id)
        story = room.service.story
        return Response(
            protocol.encode_frame({"story": story.to_dict(), "views": dict(room.service.views)}),
            media_type="application/json",
        )

    @app.get("/stories/{story_id}/view")
    async def story_view(story_id: str):
        room = gateway.room(story_id)
        await room.record_view("first_party")
        return HTMLResponse(pages.read_only_page(room.service.story, f"{base}/stories/{story_id}/edit"))

    @app.get("/stories/{story_id}/edit")
    async def story_edit(story_id: str):
        room = gateway.room(story_id)
        await room.record_view("first_party")
        return HTMLResponse(pages.edit_page(room.service.story, base))

    @app.get("/stories/{story_id}/embed")
    async def story_embed_frame(story_id: str):
        room = gateway.room(story_id)
        await room.record_view("embed")
        return HTMLResponse(pages.edit_page(room.service.story, base, embed=True))

    @app.get("/stories/{story_id}/embed.js")
    async def story_embed_js(story_id: str):
        gateway.room(story_id)  # 404 before serving script
        return PlainTextResponse(pages.embed_js(story_id, base), media_type="application/javascript")

    @app.get("/stories/{story_id}/export.html")
    async def story_export(story_id: str):
        room = gateway.room(story_id)
        await room.record_view("export")
        return HTMLResponse(pages.export_page(room.service.story))

    @app.get("/r/{token}")
    async def request_link(token: str):
        for room in gateway.rooms.values():
            if token in room.service.token_index:
                story_id, request, section_id = room.service.resolve_token(token)
                if request.status == REQUEST_OPEN:
                    fragment = f"#section-{section_id}" if section_id else ""
                    return RedirectResponse(
                        f"{base}/stories/{story_id}/edit{fragment}", status_code=302
                    )
                return HTMLResponse(pages.request_terminal_page(request.status, request.topic))
        raise UnknownToken("no request issued for this token")

    @app.get("/stories/{story_id}/suggestions")
    async def suggestions(story_id: str, count: int = 5, n_hint: int | None = None):
        room = gateway.room(story_id)
        story = room.service.story
        if n_hint is None and story.live_sections():
            n_hint = len(story.live_sections())
        return {
            "headlines": headline_mod.suggest(
                story.topic, count, n_hint, catalog=gateway.headline_catalog
            )
        }

    @app.post("/stories/{story_id}/offers")
    async def add_offer(story_id: str, body: dict):
        room = gateway.room(story_id)
        actor = str(body.get("actor_id") or "u" + secrets.token_urlsafe(8))
        await room.add_offer(actor, str(body.get("display_name", "")))
        return {
            "actor_id": actor,
            "suggested_recipients": room.service.suggested_recipients(),
        }

    @app.post("/stories/{story_id}/requests", status_code=201)
    async def create_request(story_id: str, body: dict):
        room = gateway.room(story_id)
        request, link = await room.create_request(
            str(body.get("requester_name", "someone")),
            str(body.get("recipient", "")),
            str(body.get("request_text", "")),
            body.get("topic"),
            body.get("section_id"),
        )
        return {"link": link, "request": request.to_dict()}

    @app.post("/stories/{story_id}/requests/{request_id}/fulfill")
    async def fulfill(story_id: str, request_id: str):
        room = gateway.room(story_id)
        request = await room.resolve_request(request_id, "fulfilled")
        return {"request": request.to_dict()}

    @app.post("/stories/{story_id}/requests/{request_id}/dismiss")
    async def dismiss(story_id: str, request_id: str):
        room = gateway.room(story_id)
        request = await room.resolve_request(request_id, "dismissed")
        return {"request": request.to_dict()}

    @app.get("/stories/{story_id}/history/{section_id}")
    async def section_history(story_id: str, section_id: str):
        room = gateway.room(story_id)
        snaps = await room.call(lambda: room.service.engine.section_history(section_id))
        return {
            "snapshots": [
                {"revision": rev, "section": section.to_dict() if section else None}
                for rev, section in snaps
            ]
        }

    @app.post("/media/resolve")
    async def media_resolve(body: dict):
        embed = media_mod.resolve(str(body.get("url", "")), gateway.fetcher, rules=gateway.media_rules)
        return {"media": embed.to_dict()}

    # -- realtime -----------------------------------------------------------------

    @app.websocket("/ws")
    async def realtime(ws: WebSocket):
        await ws.accept()
        actor_id: str | None = None
        client_name = ""
        sub: Subscriber | None = None
        room: Room | None = None
        writer: asyncio.Task | None = None

        async def write_loop(subscriber: Subscriber):
            while True:
                frame = await subscriber.queue.get()
                if frame is None or subscriber.dead:
                    await ws.close(code=1013)  # slow consumer: try again later
                    return
                await ws.send_text(protocol.encode_frame(frame))

        try:
            while True:
                raw = await ws.receive_text()
                try:
                    frame = protocol.parse_client_frame(raw)
                except ValueError:
                    await ws.close(code=1002)
                    return

                if frame["kind"] == protocol.HELLO:
                    client_name = str(frame.get("client_name", "")).strip() or "anonymous"
                    actor_id = "u" + secrets.token_urlsafe(8)
                    await ws.send_text(protocol.encode_frame(protocol.welcome(actor_id)))
                    continue

                if frame["kind"] == protocol.SUBSCRIBE:
                    if actor_id is None:
                        await ws.close(code=1002)  # hello must come first
                        return
                    target = gateway.rooms.get(str(frame.get("story_id", "")))
                    if target is None:
                        await ws.send_text(
                            protocol.encode_frame(protocol.error("not_found", "no such story"))
                        )
                        continue
                    if room is not None and sub is not None:
                        room.unsubscribe(sub.session_id)
                        sub.dead = True
                        sub.queue.put_nowait(None)
                    if writer is not None:
                        writer.cancel()
                    room = target
                    sub = Subscriber(session_id=next(room._ids), actor_id=actor_id)
                    catch_up = await room.call(room.subscribe_fn(sub, frame.get("have_revision")))
                    await ws.send_text(protocol.encode_frame(catch_up))
                    writer = asyncio.get_running_loop().create_task(write_loop(sub))
                    continue

                # op
                if room is None or sub is None or actor_id is None:
                    await ws.close(code=1002)  # subscribe before op
                    return
                try:
                    op = protocol.operation_of(frame)
                except MalformedOperation:
                    await ws.close(code=1002)
                    return
                try:
                    await room.call(room.submit_fn(sub.session_id, op, client_name))
                except StorypadError as exc:
                    # exactly one ack or error per client op; BaseTooOld tells
                    # the client to resubscribe from a snapshot
                    room._push(sub, protocol.error(exc.code, exc.detail))
        except WebSocketDisconnect:
            pass
        finally:
            if room is not None and sub is not None:
                room.unsubscribe(sub.session_id)
            if writer is not None:
                writer.cancel()

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="storypad-server")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--bind", default=None, help="host:port")
    parser.add_argument("--base-url", default=None)
    args = parser.parse_args(argv)

    overrides: dict = {"data_dir": args.data_dir, "base_url": args.base_url}
    if args.bind:
        host, _, port = args.bind.rpartition(":")
        overrides["bind_host"] = host or "127.0.0.1"
        overrides["bind_port"] = int(port)
    config = ServerConfig.load(args.config, **overrides)

    import uvicorn

    uvicorn.run(build_app(config), host=config.bind_host, port=config.bind_port, log_level="info")
    return 0


if __name__ == "__main__":
    main()
