"""Document parsing, compositing, and serialization."""

from __future__ import annotations

import base64
import json

import numpy as np
import pytest

from chromarec.color import RgbColor
from chromarec.document import (
    DocumentParseError,
    Element,
    GraphicDocument,
    RasterImage,
    collect_text_colors,
    composite_group,
    group_elements,
    parse_document,
    render_preview,
    replace_image_element,
    serialize_document,
)


def solid_raster(w, h, rgb):
    return RasterImage(np.full((h, w, 3), rgb, dtype=np.uint8))


def doc_json(elements, width=100, height=100):
    return json.dumps({"canvas": {"width": width, "height": height}, "elements": elements})


def background(color="#ff0000", w=100, h=100, opacity=1.0, el_id="bg"):
    return {
        "id": el_id,
        "kind": "coloredBackground",
        "position": {"x": 0, "y": 0},
        "size": {"w": w, "h": h},
        "opacity": opacity,
        "colors": [color],
    }


def image_element(raster, el_id="img", x=0, y=0, w=10, h=10, kind="imageElement"):
    return {
        "id": el_id,
        "kind": kind,
        "position": {"x": x, "y": y},
        "size": {"w": w, "h": h},
        "opacity": 1.0,
        "colors": [],
        "raster": base64.b64encode(raster.to_png()).decode(),
    }


def test_single_red_background_gives_exact_pixel_count():
    doc = parse_document(doc_json([background()]))
    pixels = composite_group(group_elements(doc)["svg"])
    assert pixels.shape == (10000, 3)
    assert np.all(pixels == (255, 0, 0))


def test_multi_color_fill_splits_area_within_one_pixel():
    el = {
        "id": "s",
        "kind": "svgElement",
        "position": {"x": 0, "y": 0},
        "size": {"w": 11, "h": 7},
        "opacity": 1.0,
        "colors": ["#112233", "#445566", "#778899"],
    }
    doc = parse_document(doc_json([el]))
    pixels = composite_group(group_elements(doc)["svg"])
    assert pixels.shape[0] == 77
    colors, counts = np.unique(pixels, axis=0, return_counts=True)
    assert len(colors) == 3
    assert all(abs(c - 77 / 3) <= 1 for c in counts)


def test_nearly_transparent_elements_are_skipped():
    doc = parse_document(doc_json([background(), background("#00ff00", opacity=0.04, el_id="ghost")]))
    pixels = composite_group(group_elements(doc)["svg"])
    assert np.all(pixels == (255, 0, 0))


def test_image_raster_resampled_to_element_size():
    raster = solid_raster(4, 4, (10, 20, 30))
    doc = parse_document(doc_json([image_element(raster, w=8, h=6), background()]))
    pixels = composite_group(group_elements(doc)["image"])
    assert pixels.shape == (48, 3)
    assert np.all(pixels == (10, 20, 30))


def test_text_colors_are_area_weighted_declared_fills():
    els = [
        background(),
        {
            "id": "t1",
            "kind": "textElement",
            "position": {"x": 0, "y": 0},
            "size": {"w": 40, "h": 10},
            "opacity": 1.0,
            "colors": ["#000000"],
        },
        {
            "id": "t2",
            "kind": "textElement",
            "position": {"x": 0, "y": 20},
            "size": {"w": 10, "h": 10},
            "opacity": 1.0,
            "colors": ["#ffffff"],
        },
    ]
    doc = parse_document(doc_json(els))
    collected = collect_text_colors(doc)
    assert (RgbColor(0, 0, 0), 400.0) in collected
    assert (RgbColor(255, 255, 255), 100.0) in collected


def test_grouping_covers_all_five_kinds():
    raster = solid_raster(2, 2, (1, 2, 3))
    els = [
        background(),
        image_element(raster, el_id="i1"),
        image_element(raster, el_id="m1", kind="maskElement"),
        {"id": "s1", "kind": "svgElement", "position": {"x": 0, "y": 0},
         "size": {"w": 5, "h": 5}, "opacity": 1.0, "colors": ["#0000ff"]},
        {"id": "t1", "kind": "textElement", "position": {"x": 0, "y": 0},
         "size": {"w": 5, "h": 5}, "opacity": 1.0, "colors": ["#00ff00"]},
    ]
    groups = group_elements(parse_document(doc_json(els)))
    assert [e.id for e in groups["image"]] == ["i1", "m1"]
    assert [e.id for e in groups["svg"]] == ["bg", "s1"]
    assert [e.id for e in groups["text"]] == ["t1"]


def test_serialize_parse_roundtrip_preserves_everything():
    raster = RasterImage(np.arange(48, dtype=np.uint8).reshape(4, 4, 3))
    els = [background(), image_element(raster, w=4, h=4)]
    doc = parse_document(doc_json(els))
    again = parse_document(serialize_document(doc))
    assert again == doc


@pytest.mark.parametrize(
    "mutate,path_fragment",
    [
        (lambda d: d["elements"][0].pop("id"), "elements[0]"),
        (lambda d: d["elements"][0].update(kind="sticker"), "kind"),
        (lambda d: d["elements"][0].update(opacity=1.5), "opacity"),
        (lambda d: d["elements"][0].update(colors=["#12345"]), "colors[0]"),
        (lambda d: d["canvas"].pop("width"), "canvas"),
        (lambda d: d.update(elements=[]), "elements"),
    ],
)
def test_parse_errors_carry_json_paths(mutate, path_fragment):
    data = json.loads(doc_json([background()]))
    mutate(data)
    with pytest.raises(DocumentParseError) as err:
        parse_document(json.dumps(data))
    assert path_fragment in str(err.value)


def test_raster_required_on_image_and_forbidden_elsewhere():
    bad_img = {
        "id": "i",
        "kind": "imageElement",
        "position": {"x": 0, "y": 0},
        "size": {"w": 4, "h": 4},
        "opacity": 1.0,
        "colors": [],
    }
    with pytest.raises(DocumentParseError, match="raster"):
        parse_document(doc_json([bad_img]))
    bad_bg = background()
    bad_bg["raster"] = base64.b64encode(solid_raster(2, 2, (0, 0, 0)).to_png()).decode()
    with pytest.raises(DocumentParseError, match="raster"):
        parse_document(doc_json([bad_bg]))


def test_geometry_clamped_to_canvas():
    el = background(w=500, h=500)
    el["position"] = {"x": 60, "y": -10}
    doc = parse_document(doc_json([el]))
    parsed = doc.elements[0]
    assert parsed.x == 60 and parsed.y == 0
    assert parsed.w == 40 and parsed.h == 100


def test_raster_path_resolution(tmp_path):
    raster = solid_raster(3, 3, (9, 9, 9))
    (tmp_path / "a.png").write_bytes(raster.to_png())
    el = image_element(raster, w=3, h=3)
    el["raster"] = "a.png"
    doc = parse_document(doc_json([el, background()]), base_dir=tmp_path)
    assert doc.element("img").raster == raster
    with pytest.raises(DocumentParseError, match="base directory"):
        parse_document(doc_json([el, background()]))


def test_non_png_raster_rejected(tmp_path):
    import io
    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", (2, 2)).save(buf, format="JPEG")
    el = {
        "id": "i",
        "kind": "imageElement",
        "position": {"x": 0, "y": 0},
        "size": {"w": 2, "h": 2},
        "opacity": 1.0,
        "raster": base64.b64encode(buf.getvalue()).decode(),
    }
    with pytest.raises(DocumentParseError, match="PNG"):
        parse_document(doc_json([el]))


def test_crello_style_export_is_accepted():
    raster = solid_raster(2, 2, (5, 6, 7))
    data = {
        "canvas_width": 50,
        "canvas_height": 40,
        "elements": [
            {"type": "background", "left": 0, "top": 0, "width": 50, "height": 40,
             "opacity": 1.0, "color": "#aabbcc"},
            {"type": "image", "left": 5, "top": 5, "width": 2, "height": 2,
             "image": base64.b64encode(raster.to_png()).decode()},
            {"type": "text", "left": 1, "top": 1, "width": 10, "height": 4,
             "color": ["#010203"]},
        ],
    }
    doc = parse_document(json.dumps(data))
    assert (doc.width, doc.height) == (50, 40)
    kinds = [e.kind for e in doc.elements]
    assert kinds == ["coloredBackground", "imageElement", "textElement"]
    assert doc.elements[1].raster == raster


def test_replace_image_element_keeps_geometry():
    raster = solid_raster(4, 4, (1, 1, 1))
    doc = parse_document(doc_json([image_element(raster, x=3, y=4, w=4, h=4), background()]))
    swapped = replace_image_element(doc, "img", solid_raster(2, 2, (200, 0, 0)))
    el = swapped.element("img")
    assert (el.x, el.y, el.w, el.h) == (3.0, 4.0, 4.0, 4.0)
    assert np.all(el.raster.pixels == (200, 0, 0))
    with pytest.raises(KeyError):
        replace_image_element(doc, "nope", raster)
    with pytest.raises(ValueError, match="not an image"):
        replace_image_element(doc, "bg", raster)


def test_preview_paints_in_z_order():
    els = [
        background("#000000"),
        {"id": "s", "kind": "svgElement", "position": {"x": 10, "y": 10},
         "size": {"w": 20, "h": 20}, "opacity": 1.0, "colors": ["#ff0000"]},
    ]
    preview = render_preview(parse_document(doc_json(els)))
    assert preview.width == 100 and preview.height == 100
    assert tuple(preview.pixels[0, 0]) == (0, 0, 0)
    assert tuple(preview.pixels[15, 15]) == (255, 0, 0)
