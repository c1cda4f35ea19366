"""HTTP contract of the document service."""

import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from chromarec.color import ColorCode, display_rgb
from chromarec.document import parse_document, serialize_document
from chromarec.service import create_app


@pytest.fixture(scope="module")
def client(demo_checkpoint):
    return TestClient(create_app(demo_checkpoint))


@pytest.fixture()
def doc_body(demo_corpus):
    return serialize_document(demo_corpus.test_docs[0])


def _upload(client, body):
    response = client.post("/documents", json=body)
    assert response.status_code == 200, response.text
    return response.json()


def test_status_reports_the_model(client):
    data = client.get("/status").json()
    assert data["status"] == "ok"
    assert data["model"]["segment_embeddings"] is True
    assert data["vocabulary"] > 3


def test_upload_returns_document_palettes_and_preview(client, doc_body):
    data = _upload(client, doc_body)
    assert set(data) == {"id", "document", "palettes", "preview"}
    assert parse_document(data["document"]) == parse_document(doc_body)
    png = base64.b64decode(data["preview"])
    image = Image.open(io.BytesIO(png))
    assert image.size == (120, 80)
    for group in ("image", "svg", "text"):
        slots = data["palettes"][group]
        assert len(slots) == 2
        assert slots[0]["weight"] >= slots[1]["weight"]
        assert slots[0]["slot"] == f"{group}:0"
        ColorCode.parse(slots[0]["code"])
        assert slots[0]["hex"].startswith("#")


def test_fetch_round_trips(client, doc_body):
    doc_id = _upload(client, doc_body)["id"]
    data = client.get(f"/documents/{doc_id}")
    assert data.status_code == 200
    assert data.json()["id"] == doc_id
    assert client.get("/documents/nope").status_code == 404


def test_invalid_document_is_400_with_path(client, doc_body):
    body = dict(doc_body)
    del body["canvas"]
    response = client.post("/documents", json=body)
    assert response.status_code == 400
    assert "canvas" in response.json()["detail"]


def test_unparseable_body_is_422(client):
    response = client.post(
        "/documents", content=b"not json", headers={"content-type": "application/json"}
    )
    assert response.status_code == 422


def test_recommend_contract(client, doc_body):
    doc_id = _upload(client, doc_body)["id"]
    response = client.post(
        f"/documents/{doc_id}/recommend", json={"slots": ["svg:1", "text:0"], "n": 3}
    )
    assert response.status_code == 200
    recs = response.json()["recommendations"]
    assert [r["slot"] for r in recs] == ["svg:1", "text:0"]
    for rec in recs:
        assert len(rec["candidates"]) == 3
        assert [c["rank"] for c in rec["candidates"]] == [1, 2, 3]
        probs = [c["probability"] for c in rec["candidates"]]
        assert probs == sorted(probs, reverse=True)

    top = recs[0]["candidates"][0]["code"]
    filtered = client.post(
        f"/documents/{doc_id}/recommend",
        json={"slots": ["svg:1"], "n": 3, "exclude": [top]},
    ).json()["recommendations"][0]
    assert top not in [c["code"] for c in filtered["candidates"]]


@pytest.mark.parametrize(
    "body",
    [
        {"slots": ["svg:7"]},
        {"slots": ["banner:0"]},
        {"slots": ["svg:4"]},  # pad slot
        {"slots": ["svg:1"], "n": 0},
        {"slots": ["svg:1"], "mode": "other"},
        {"slots": []},
    ],
)
def test_recommend_rejects_bad_requests(client, doc_body, body):
    doc_id = _upload(client, doc_body)["id"]
    response = client.post(f"/documents/{doc_id}/recommend", json=body)
    assert response.status_code == 422


def test_recommend_unknown_document_is_404(client):
    response = client.post("/documents/missing/recommend", json={"slots": ["svg:1"]})
    assert response.status_code == 404


def test_replace_image_changes_only_the_image_palette(client, doc_body):
    uploaded = _upload(client, doc_body)
    doc_id = uploaded["id"]
    element_id = next(
        el["id"] for el in doc_body["elements"] if el["kind"] == "imageElement"
    )
    tone_a = display_rgb(ColorCode(3, 9, 9))
    tone_b = display_rgb(ColorCode(11, 7, 5))
    pixels = np.empty((10, 10, 3), dtype=np.uint8)
    pixels[:6] = (tone_a.r, tone_a.g, tone_a.b)
    pixels[6:] = (tone_b.r, tone_b.g, tone_b.b)
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    response = client.put(
        f"/documents/{doc_id}/elements/{element_id}/image",
        json={"png": base64.b64encode(buf.getvalue()).decode("ascii")},
    )
    assert response.status_code == 200, response.text
    data = response.json()
    got = {slot["code"] for slot in data["palettes"]["image"]}
    assert got == {"3_9_9", "11_7_5"}
    assert data["palettes"]["svg"] == uploaded["palettes"]["svg"]
    assert data["palettes"]["text"] == uploaded["palettes"]["text"]


def test_replace_image_error_mapping(client, doc_body):
    doc_id = _upload(client, doc_body)["id"]
    text_id = next(el["id"] for el in doc_body["elements"] if el["kind"] == "textElement")
    png = {"png": base64.b64encode(b"not a png").decode("ascii")}
    assert (
        client.put(f"/documents/{doc_id}/elements/{text_id}/image", json=png).status_code
        == 400
    )
    raster = base64.b64decode(
        next(el for el in doc_body["elements"] if el["kind"] == "imageElement")["raster"]
    )
    good = {"png": base64.b64encode(raster).decode("ascii")}
    assert (
        client.put(f"/documents/{doc_id}/elements/{text_id}/image", json=good).status_code
        == 409
    )
    assert (
        client.put(f"/documents/{doc_id}/elements/ghost/image", json=good).status_code
        == 404
    )
    bad64 = {"png": "@@@not base64@@@"}
    assert (
        client.put(f"/documents/{doc_id}/elements/{text_id}/image", json=bad64).status_code
        == 400
    )


def test_recolor_persists(client, doc_body):
    doc_id = _upload(client, doc_body)["id"]
    recs = client.post(
        f"/documents/{doc_id}/recommend", json={"slots": ["svg:1"], "n": 2}
    ).json()["recommendations"]
    code = recs[0]["candidates"][1]["code"]
    response = client.post(
        f"/documents/{doc_id}/recolor", json={"slot": "svg:1", "code": code}
    )
    assert response.status_code == 200, response.text
    assert response.json()["palettes"]["svg"][1]["code"] == code
    again = client.get(f"/documents/{doc_id}").json()
    assert again["palettes"]["svg"][1]["code"] == code


def test_recolor_with_the_current_code_keeps_the_preview(client, doc_body):
    uploaded = _upload(client, doc_body)
    doc_id = uploaded["id"]
    for group in ("svg", "image", "text"):
        slot = uploaded["palettes"][group][0]
        response = client.post(
            f"/documents/{doc_id}/recolor",
            json={"slot": slot["slot"], "code": slot["code"]},
        )
        assert response.status_code == 200, response.text
        assert response.json()["preview"] == uploaded["preview"]


@pytest.mark.parametrize(
    "body",
    [
        {"slot": "svg:1", "code": "99_0_0"},
        {"slot": "svg:1", "code": "0_0_0"},  # valid grid cell, not displayable
        {"slot": "svg:4", "code": "8_8_8"},
        {"slot": "what", "code": "8_8_8"},
    ],
)
def test_recolor_rejects_bad_requests(client, doc_body, body):
    doc_id = _upload(client, doc_body)["id"]
    assert client.post(f"/documents/{doc_id}/recolor", json=body).status_code == 422


def test_favorites_are_idempotent(client, doc_body):
    doc_id = _upload(client, doc_body)["id"]
    fav = {"slot": "svg:1", "code": "8_8_8"}
    first = client.post(f"/documents/{doc_id}/favorites", json=fav)
    second = client.post(f"/documents/{doc_id}/favorites", json=fav)
    assert first.status_code == second.status_code == 200
    assert second.json()["favorites"] == [fav]
    other = {"slot": "text:0", "code": "12_8_10"}
    client.post(f"/documents/{doc_id}/favorites", json=other)
    listed = client.get(f"/documents/{doc_id}/favorites").json()["favorites"]
    assert listed == [fav, other]
    bad = {"slot": "svg:1", "code": "nope"}
    assert client.post(f"/documents/{doc_id}/favorites", json=bad).status_code == 422


def test_documents_expire(demo_checkpoint, doc_body):
    now = [0.0]
    app = create_app(demo_checkpoint, ttl_seconds=10.0, clock=lambda: now[0])
    with TestClient(app) as client:
        doc_id = _upload(client, doc_body)["id"]
        now[0] = 5.0
        assert client.get(f"/documents/{doc_id}").status_code == 200
        now[0] = 16.0  # refreshed at 5.0, expires at 15.0
        assert client.get(f"/documents/{doc_id}").status_code == 404


def test_openapi_lists_the_contract(client):
    paths = client.get("/openapi.json").json()["paths"]
    for route in (
        "/documents",
        "/documents/{doc_id}",
        "/documents/{doc_id}/recommend",
        "/documents/{doc_id}/recolor",
        "/documents/{doc_id}/favorites",
        "/documents/{doc_id}/elements/{element_id}/image",
        "/status",
    ):
        assert route in paths
