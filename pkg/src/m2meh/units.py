"""Unit parsing and conversion at configuration boundaries.

Everything inside the package is SI: watts, seconds, hertz, bits, joules,
linear channel gains.  Config files may carry values either as bare SI
numbers or as strings with a unit suffix ("500 mW", "-104 dBm", "18 kHz",
"10 kbit", "3 m").
"""

from __future__ import annotations


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError("dBm undefined for non-positive power")
    import math

    return 10.0 * math.log10(watts) + 30.0

def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


# Multiplicative suffixes, all mapping to SI base units.
_SUFFIXES = {
    "w": 1.0,
    "mw": 1e-3,
    "uw": 1e-6,
    "nw": 1e-9,
    "kw": 1e3,
    "hz": 1.0,
    "khz": 1e3,
    "mhz": 1e6,
    "ghz": 1e9,
    "s": 1.0,
    "ms": 1e-3,
    "us": 1e-6,
    "min": 60.0,
    "bit": 1.0,
    "kbit": 1e3,
    "mbit": 1e6,
    "km": 1.0,  # distances are kept in km (the path-loss model wants km)
    "m": 1e-3,
    "j": 1.0,
    "mj": 1e-3,
}


def parse_quantity(value: float | int | str) -> float:
    """Parse a config value into SI units (distances into km).

    Accepts bare numbers (already SI) or "<number> <suffix>" strings.
    "dBm" and "dB" convert to watts / linear gain respectively.
    """
    if isinstance(value, (int, float)):
        return float(value)
    text = value.strip().lower().replace("_", " ")
    parts = text.split()
    if len(parts) == 1:
        # allow "10kbit" without a space
        for i, ch in enumerate(text):
            if not (ch.isdigit() or ch in "+-.e"):
                parts = [text[:i], text[i:]]
                break
    if len(parts) == 1:
        return float(parts[0])
    if len(parts) != 2:
        raise ValueError(f"cannot parse quantity {value!r}")
    num, suffix = float(parts[0]), parts[1]
    if suffix == "dbm":
        return dbm_to_w(num)
    if suffix == "db":
        return db_to_linear(num)
    if suffix not in _SUFFIXES:
        raise ValueError(f"unknown unit suffix {suffix!r} in {value!r}")
    return num * _SUFFIXES[suffix]
