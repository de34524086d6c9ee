"""Engineering-notation number parsing for config files."""

import re

# decimal exponent per prefix; values are built as "<number>e<exp>" so that
# "4.7p" parses to exactly the float nearest 4.7e-12
PREFIXES = {
    "f": -15,
    "p": -12,
    "n": -9,
    "u": -6,
    "µ": -6,
    "μ": -6,
    "m": -3,
    "c": -2,
    "": 0,
    "k": 3,
    "M": 6,
    "G": 9,
}

# unit names are accepted and discarded; the prefix letter always wins, so
# "0.1m" is 0.1 milli, write lengths as "10c" / "10cm" or as plain numbers
_UNITS = ("ohm", "Ohm", "Ω", "Hz", "F", "s", "A", "V", "m", "%")

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PATTERN = re.compile(
    rf"^\s*({_NUMBER})\s*([fpnuµμmckMG]?)\s*({'|'.join(map(re.escape, _UNITS))})?\s*$"
)


def parse_eng(value):
    """Parse ``value`` as a float, accepting SI prefixes such as ``"4.7p"`` or ``"7.5 kOhm"``.

    Numbers pass through unchanged. A trailing ``%`` divides by 100.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"not a number: {value!r}")
    m = _PATTERN.match(value)
    if m is None:
        raise ValueError(f"cannot parse engineering value {value!r}")
    number, prefix, unit = m.groups()
    if unit == "m" and prefix == "":
        # "10m" alone reads as milli, never metres
        prefix, unit = "m", None
    mantissa, _, exp = number.lower().partition("e")
    out = float(f"{mantissa}e{int(exp or 0) + PREFIXES[prefix]}")
    if unit == "%":
        out /= 100.0
    return out


def format_eng(value, unit=""):
    """Format a float with the closest SI prefix (three significant digits)."""
    if value == 0:
        return f"0{unit}"
    for prefix, scale in (("G", 1e9), ("M", 1e6), ("k", 1e3), ("", 1.0), ("m", 1e-3),
                          ("u", 1e-6), ("n", 1e-9), ("p", 1e-12), ("f", 1e-15)):
        if abs(value) >= scale:
            return f"{value / scale:.3g}{prefix}{unit}"
    return f"{value:.3g}{unit}"
