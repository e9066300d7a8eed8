"""Byte-stable JSON rendering for reports.

Keys are sorted and floats are printed with 9 significant digits, so the
same report always serializes to the same bytes regardless of dict
construction order or platform float repr quirks.
"""

from __future__ import annotations

import json


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    if isinstance(value, int):
        return str(value)
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        items = ", ".join(
            f"{_render(str(k))}: {_render(v)}" for k, v in sorted(value.items())
        )
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def canonical_json(value) -> str:
    """Serialize with sorted keys and fixed float formatting; ends with \\n."""
    return _render(value) + "\n"
