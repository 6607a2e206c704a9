"""HTTP face of the session engine, consumed by the trainer UI.

Payloads are JSON; images travel as base64-encoded binary PGM bytes and
actions as their 5-hex-digit encodings. Each session serializes its own
mutations behind a lock; the CNN is shared read-only across sessions.
"""

from __future__ import annotations

import base64
import json
import threading
import time
import uuid

from fastapi import FastAPI, HTTPException, Request

from xtamer.expressions import ACTION_CATALOG, decode_action, encode_action, led_layout
from xtamer.faces import EmotionLabel, IdentityParams, parse_pgm, pgm_bytes, render_face
from xtamer.session import (
    InteractionTimeoutError,
    NoPendingInteractionError,
    PendingInteractionError,
    Session,
    SessionConfig,
    _g12,
)


def _decode_image(payload: dict):
    if "image" in payload and payload["image"] is not None:
        try:
            raw = base64.b64decode(payload["image"], validate=True)
        except Exception as exc:
            raise HTTPException(422, f"image is not valid base64: {exc}") from exc
        try:
            return parse_pgm(raw, source="<request image>")
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
    return None


def _record_doc(record) -> dict:
    return json.loads(record.to_json_line())


def _summaries_doc(summaries) -> list[dict]:
    return [{"epoch": s["epoch"], "avg_cost": _g12(s["avg_cost"]),
             "accuracy": _g12(s["accuracy"])} for s in summaries]


class _SessionBox:
    """One live session plus the lock serializing its mutations."""

    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()


def create_app(cnn, base_config: SessionConfig | None = None) -> FastAPI:
    """Build the API around a loaded CNN and a default session config."""
    base_config = base_config or SessionConfig()
    app = FastAPI(title="xtamer", version="0.1.0")
    boxes: dict[str, _SessionBox] = {}
    registry_lock = threading.Lock()

    display_identity = IdentityParams.from_seed(base_config.seed)
    catalog_doc = []
    for action in ACTION_CATALOG:
        emotion = EmotionLabel(action.action_id)
        thumb = pgm_bytes(render_face(display_identity, emotion))
        catalog_doc.append({
            "action_id": action.action_id,
            "emotion": emotion.name.lower(),
            "encoding": encode_action(action),
            "layout": led_layout(action),
            "thumbnail": base64.b64encode(thumb).decode("ascii"),
        })

    def _box(session_id: str) -> _SessionBox:
        with registry_lock:
            box = boxes.get(session_id)
        if box is None:
            raise HTTPException(404, f"no session {session_id!r}")
        return box

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.body()
        overrides = json.loads(body) if body else {}
        if not isinstance(overrides, dict):
            raise HTTPException(422, "config overrides must be a JSON object")
        try:
            config = SessionConfig.from_dict({**base_config.to_dict(), **overrides})
            session = Session(config, cnn, wall_clock=time.time)
            purity = session.calibrate()
        except (ValueError, FileNotFoundError) as exc:
            raise HTTPException(422, str(exc)) from exc
        session_id = uuid.uuid4().hex[:12]
        with registry_lock:
            boxes[session_id] = _SessionBox(session)
        return {"id": session_id, "phase": session.phase, "purity": _g12(purity)}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        box = _box(session_id)
        with box.lock:
            s = box.session
            pending = None
            if s.pending is not None:
                pending = {
                    "index": s.pending.index,
                    "emotion": s.pending.emotion,
                    "bmu": [s.pending.bmu.row, s.pending.bmu.col],
                    "action": encode_action(s.pending.action),
                    "predicted": [_g12(p) for p in s.pending.predicted],
                }
            return {
                "phase": s.phase,
                "purity": None if s.purity is None else _g12(s.purity),
                "interactions": len(s.records),
                "discarded": s.discarded,
                "epochs_completed": len(s.epoch_summaries),
                "interactions_per_epoch": s.config.interactions_per_epoch,
                "pending": pending,
                "last_record": _record_doc(s.records[-1]) if s.records else None,
            }

    @app.post("/sessions/{session_id}/present")
    def present(session_id: str, payload: dict):
        box = _box(session_id)
        image = _decode_image(payload)
        emotion = payload.get("emotion")
        with box.lock:
            try:
                turn = box.session.present(image=image, emotion=emotion)
            except PendingInteractionError as exc:
                raise HTTPException(409, str(exc)) from exc
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from exc
            return {
                "index": turn.index,
                "emotion": turn.emotion,
                "bmu": [turn.bmu.row, turn.bmu.col],
                "action": encode_action(turn.action),
                "predicted": [_g12(p) for p in turn.predicted],
            }

    @app.post("/sessions/{session_id}/reward")
    def reward(session_id: str, payload: dict):
        box = _box(session_id)
        mode = payload.get("mode")
        if mode == "mimic":
            mode_kwargs = {"image": _decode_image(payload),
                           "emotion": payload.get("emotion")}
        elif mode == "direct":
            mode_kwargs = {"value": payload.get("value")}
        else:
            raise HTTPException(422, f"mode must be 'mimic' or 'direct', got {mode!r}")
        with box.lock:
            try:
                record = box.session.reward(mode, **mode_kwargs)
            except NoPendingInteractionError as exc:
                raise HTTPException(409, str(exc)) from exc
            except InteractionTimeoutError as exc:
                raise HTTPException(410, str(exc)) from exc
            except (ValueError, TypeError) as exc:
                raise HTTPException(422, str(exc)) from exc
            return _record_doc(record)

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str):
        box = _box(session_id)
        with box.lock:
            s = box.session
            return {
                "purity": None if s.purity is None else _g12(s.purity),
                "epochs": _summaries_doc(s.epoch_summaries),
                "interactions": len(s.records),
                "discarded": s.discarded,
            }

    @app.get("/catalog")
    def catalog():
        return {"actions": catalog_doc}

    @app.get("/render/{encoding}")
    def render(encoding: str):
        try:
            action = decode_action(encoding)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        return {"encoding": encoding.upper(), "action_id": action.action_id,
                "layout": led_layout(action)}

    return app
