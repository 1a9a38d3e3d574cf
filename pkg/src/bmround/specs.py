"""JSON formats for bodies, norm fields and curve families.

Bodies::

    {"type": "polygon", "vertices": [[x, y], ...]}   full symmetric vertex list
    {"type": "radial", "samples": [r0, r1, ...]}     r(k pi / n), k < n
    {"type": "lp", "p": 3}                           l^p unit ball; "inf" allowed

Norm fields::

    {"nx": 2, "ny": 1, "rect": [x0, y0, x1, y1], "cells": [body, body]}
    {"constant": body}

Families: see :func:`bmround.modulus.CurveFamily.from_spec`.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .geometry import BodyValidationError, SymmetricConvexBody, lp_ball, validate
from .ellipse_field import NormField

__all__ = ["parse_body", "parse_field", "load_json", "body_spec"]


def load_json(source):
    """Parse ``source`` as a JSON string, a path, or pass a dict through."""
    if isinstance(source, (dict, list)):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith(("{", "["))):
        return json.loads(Path(source).read_text())
    return json.loads(source)


def parse_body(spec) -> SymmetricConvexBody:
    spec = load_json(spec)
    kind = spec.get("type") if isinstance(spec, dict) else None
    if kind == "polygon":
        return validate(spec["vertices"])
    if kind == "radial":
        return validate(samples=spec["samples"])
    if kind == "lp":
        p = spec["p"]
        p = math.inf if isinstance(p, str) and p.lower() in ("inf", "infinity") else float(p)
        return lp_ball(p)
    raise BodyValidationError("malformed", f"unknown body spec {spec!r}")


def body_spec(body: SymmetricConvexBody) -> dict:
    return body.to_json()


def parse_field(spec) -> NormField:
    spec = load_json(spec)
    if "constant" in spec:
        rect = spec.get("rect", [0.0, 0.0, 1.0, 1.0])
        return NormField.constant(parse_body(spec["constant"]), tuple(rect))
    cells = [parse_body(c) for c in spec["cells"]]
    return NormField(int(spec["nx"]), int(spec["ny"]), tuple(spec["rect"]), tuple(cells))
