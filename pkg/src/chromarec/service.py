"""HTTP facade over documents, recommendations, and recoloring.

Documents are held in memory under server-issued ids with a sliding
expiry; every response that changes a document carries the updated
serialized form, its palettes, and a rendered preview, so clients never
re-derive state.  Error mapping: invalid documents are 400, unknown ids
404, kind conflicts (such as replacing the image of a text element) 409,
and semantically bad requests (slots, codes, counts) 422.
"""

from __future__ import annotations

import base64
import binascii
import threading
import time
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .color import ColorCode, lab_to_srgb, quantize_lab
from .document import (
    DocumentParseError,
    GraphicDocument,
    RasterImage,
    parse_document,
    render_preview,
    replace_image_element,
    serialize_document,
)
from .model import Checkpoint
from .palette import extract_multi_palette
from .recolor import apply_color
from .recommend import SlotRef, recommend

__all__ = ["create_app"]

MAX_DOCUMENTS = 256


class RecommendRequest(BaseModel):
    slots: list[str] = Field(min_length=1)
    n: int = 5
    mode: str = "simultaneous"
    exclude: list[str] = ()
    frequency_penalty: float = 0.0


class RecolorRequest(BaseModel):
    slot: str
    code: str


class ImageRequest(BaseModel):
    png: str  # base64


class FavoriteRequest(BaseModel):
    slot: str
    code: str


class RequestProblem(ValueError):
    """Maps straight to a 422 response."""


class _Entry:
    def __init__(self, doc: GraphicDocument):
        self.doc = doc
        self.favorites: list[dict] = []
        self.lock = threading.Lock()
        self.touched = time.monotonic()


class _Store:
    """TTL-bound in-memory documents keyed by issued ids."""

    def __init__(self, ttl_seconds: float, clock=time.monotonic):
        self.ttl = ttl_seconds
        self.clock = clock
        self._entries: dict[str, _Entry] = {}
        self._lock = threading.Lock()

    def _evict(self):
        now = self.clock()
        dead = [k for k, e in self._entries.items() if now - e.touched > self.ttl]
        for k in dead:
            del self._entries[k]
        while len(self._entries) > MAX_DOCUMENTS:
            oldest = min(self._entries, key=lambda k: self._entries[k].touched)
            del self._entries[oldest]

    def put(self, doc: GraphicDocument) -> str:
        with self._lock:
            self._evict()
            doc_id = uuid.uuid4().hex[:12]
            self._entries[doc_id] = _Entry(doc)
            self._entries[doc_id].touched = self.clock()
            return doc_id

    def get(self, doc_id: str) -> _Entry:
        with self._lock:
            self._evict()
            entry = self._entries.get(doc_id)
            if entry is None:
                raise KeyError(doc_id)
            entry.touched = self.clock()
            return entry


def _palette_payload(doc: GraphicDocument) -> dict:
    palettes = extract_multi_palette(doc)
    out = {}
    for group in ("image", "svg", "text"):
        palette = palettes.group(group)
        out[group] = [
            {
                "slot": f"{group}:{i}",
                "code": quantize_lab(color).text(),
                "hex": lab_to_srgb(color).to_hex(),
                "weight": weight,
            }
            for i, (color, weight) in enumerate(zip(palette.colors, palette.weights))
        ]
    return out


def _doc_payload(doc_id: str, doc: GraphicDocument) -> dict:
    preview = render_preview(doc)
    return {
        "id": doc_id,
        "document": serialize_document(doc),
        "palettes": _palette_payload(doc),
        "preview": base64.b64encode(preview.to_png()).decode("ascii"),
    }


def create_app(checkpoint: Checkpoint, frontend_dir=None, ttl_seconds: float = 3600.0,
               clock=time.monotonic) -> FastAPI:
    """Build the application around a trained checkpoint."""
    app = FastAPI(title="chromarec", version="0.1.0")
    store = _Store(ttl_seconds, clock)

    @app.exception_handler(RequestProblem)
    async def _problem(request: Request, exc: RequestProblem):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def _missing(request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": f"unknown id {exc.args[0]!r}"})

    @app.exception_handler(DocumentParseError)
    async def _bad_doc(request: Request, exc: DocumentParseError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/status")
    def status():
        return {
            "status": "ok",
            "model": {
                "d_model": checkpoint.config.d_model,
                "layers": checkpoint.config.n_layers,
                "heads": checkpoint.config.n_heads,
                "segment_embeddings": checkpoint.config.use_segment_embeddings,
                "position_embeddings": checkpoint.config.use_position_embeddings,
            },
            "vocabulary": checkpoint.vocab.size,
        }

    @app.post("/documents")
    def upload(document: dict):
        doc = parse_document(document)
        doc_id = store.put(doc)
        return _doc_payload(doc_id, doc)

    @app.get("/documents/{doc_id}")
    def fetch(doc_id: str):
        entry = store.get(doc_id)
        return _doc_payload(doc_id, entry.doc)

    @app.put("/documents/{doc_id}/elements/{element_id}/image")
    def replace_image(doc_id: str, element_id: str, body: ImageRequest):
        entry = store.get(doc_id)
        try:
            raw = base64.b64decode(body.png, validate=True)
            raster = RasterImage.from_png(raw)
        except (binascii.Error, ValueError) as exc:
            raise DocumentParseError(f"image payload is not a PNG: {exc}", "$.png")
        with entry.lock:
            try:
                entry.doc = replace_image_element(entry.doc, element_id, raster)
            except ValueError as exc:
                return JSONResponse(status_code=409, content={"detail": str(exc)})
            return _doc_payload(doc_id, entry.doc)

    @app.post("/documents/{doc_id}/recommend")
    def recommend_slots(doc_id: str, body: RecommendRequest):
        entry = store.get(doc_id)
        try:
            recs = recommend(
                checkpoint, entry.doc, body.slots, n=body.n, mode=body.mode,
                exclude=body.exclude, frequency_penalty=body.frequency_penalty,
            )
        except ValueError as exc:
            raise RequestProblem(str(exc))
        return {"id": doc_id, "recommendations": [r.to_dict() for r in recs]}

    @app.post("/documents/{doc_id}/recolor")
    def recolor(doc_id: str, body: RecolorRequest):
        entry = store.get(doc_id)
        with entry.lock:
            try:
                code = ColorCode.parse(body.code)
                entry.doc = apply_color(entry.doc, body.slot, code)
            except ValueError as exc:
                raise RequestProblem(str(exc))
            return _doc_payload(doc_id, entry.doc)

    @app.post("/documents/{doc_id}/favorites")
    def add_favorite(doc_id: str, body: FavoriteRequest):
        entry = store.get(doc_id)
        try:
            SlotRef.parse(body.slot)
            ColorCode.parse(body.code)
        except ValueError as exc:
            raise RequestProblem(str(exc))
        record = {"slot": body.slot, "code": body.code}
        with entry.lock:
            if record not in entry.favorites:
                entry.favorites.append(record)
            return {"id": doc_id, "favorites": list(entry.favorites)}

    @app.get("/documents/{doc_id}/favorites")
    def list_favorites(doc_id: str):
        entry = store.get(doc_id)
        return {"id": doc_id, "favorites": list(entry.favorites)}

    if frontend_dir is not None:
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
