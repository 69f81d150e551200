"""Command line entry point: `plots render --spec spec.json`."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema

from .errors import PlotError
from .render import FigureKind, PlotSpec, render

SPEC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": [k.value for k in FigureKind]},
        "inputs": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "output": {"type": "string"},
        "labels": {"type": "array", "items": {"type": "string"}},
        "title": {"type": "string"},
        "style": {"type": "object"},
    },
    "required": ["kind", "inputs", "output"],
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    render_cmd = sub.add_parser("render", help="render one figure from a JSON spec")
    render_cmd.add_argument("--spec", required=True)
    args = parser.parse_args(argv)

    try:
        doc = json.loads(Path(args.spec).read_text())
        jsonschema.validate(doc, SPEC_SCHEMA)
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    try:
        out = render(PlotSpec.from_dict(doc))
    except PlotError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
