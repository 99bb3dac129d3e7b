"""Small helpers for reading human-friendly time values.

All internal arithmetic is done in seconds; these parsers only exist at the
boundaries (CLI flags, config files) where "2.5us" is nicer to type than
2.5e-6.
"""

from __future__ import annotations

_SCALES = {
    "s": 1.0,
    "ms": 1e-3,
    "us": 1e-6,
    "µs": 1e-6,  # micro sign
    "μs": 1e-6,  # greek mu
    "ns": 1e-9,
}


def parse_time(value: str | float | int) -> float:
    """Parse a time value into seconds.

    Accepts plain numbers (interpreted as seconds) or strings with an
    optional unit suffix: "2.5us", "1.2 ms", "3e-6", "150ns".
    """
    if isinstance(value, (int, float)):
        return float(value)
    text = value.strip()
    for suffix in sorted(_SCALES, key=len, reverse=True):
        if text.endswith(suffix):
            number = text[: -len(suffix)].strip()
            return float(number) * _SCALES[suffix]
    return float(text)


def format_time(seconds: float) -> str:
    """Render seconds with a readable unit suffix."""
    magnitude = abs(seconds)
    if magnitude == 0.0:
        return "0s"
    if magnitude >= 1.0:
        return f"{seconds:g}s"
    if magnitude >= 1e-3:
        return f"{seconds * 1e3:g}ms"
    if magnitude >= 1e-6:
        return f"{seconds * 1e6:g}us"
    return f"{seconds * 1e9:g}ns"
