"""Number handling and tolerance policy.

All probabilities and payoffs run in one of two arithmetic modes:

* float mode (default): IEEE doubles, with the centralized tolerances below;
* rational mode: ``fractions.Fraction`` everywhere, comparisons exact.

Mode is a property of the *values*, not a global switch: a structure built
from Fractions stays exact through every pure operation.  The CLI selects
the parse mode via ``ACKLAB_MODE``.
"""

from __future__ import annotations

import math
from decimal import Decimal, InvalidOperation
from fractions import Fraction

# Centralized tolerance constants.  Validation is strict, algebraic identity
# checks allow LP-pivot noise, polytope comparisons allow direction-sampling
# noise on top of that.
VALIDATION_TOL = 1e-12
ALGEBRA_TOL = 1e-10
POLYTOPE_TOL = 1e-6
REFINE_TOL = 1e-9  # float-mode belief-equality threshold during refinement


def is_exact(x) -> bool:
    return isinstance(x, (Fraction, int)) and not isinstance(x, bool)


def all_exact(values) -> bool:
    return all(is_exact(v) for v in values)


def to_float(x) -> float:
    return float(x)


def parse_number(raw, exact: bool):
    """Parse a JSON-level number (int, float, or string) into the requested mode.

    Strings may be decimal ("0.125") or rational ("1/3"); rational strings are
    the only way to express non-dyadic, non-decimal values exactly.
    """
    if isinstance(raw, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(raw, str):
        raw = raw.strip()
        if "/" in raw:
            num, den = raw.split("/", 1)
            frac = Fraction(int(num), int(den))
        else:
            try:
                frac = Fraction(Decimal(raw))
            except InvalidOperation as exc:
                raise ValueError(f"cannot parse number {raw!r}") from exc
        return frac if exact else float(frac)
    if isinstance(raw, int):
        return Fraction(raw) if exact else float(raw)
    if isinstance(raw, float):
        if exact:
            # Floats are binary-exact, so Fraction(raw) is faithful.
            return Fraction(raw)
        return raw
    raise TypeError(f"unsupported number type {type(raw)!r}")


def format_number(x) -> str:
    """Serialize a probability for JSON.

    Exact values with a finite decimal expansion become decimal strings;
    other rationals use the "p/q" form.  Floats use repr (round-trips).
    """
    if isinstance(x, Fraction):
        den = x.denominator
        while den % 2 == 0:
            den //= 2
        while den % 5 == 0:
            den //= 5
        if den == 1:
            return str(Decimal(x.numerator) / Decimal(x.denominator))
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def close(a, b, tol=ALGEBRA_TOL) -> bool:
    """Equality, exact when both operands are exact."""
    if is_exact(a) and is_exact(b):
        return a == b
    return abs(float(a) - float(b)) <= tol


def ge(a, b, tol=VALIDATION_TOL) -> bool:
    """a >= b, with slack `tol` in float mode and none in exact mode."""
    if is_exact(a) and is_exact(b):
        return a >= b
    return float(a) >= float(b) - tol


def gt(a, b, tol=VALIDATION_TOL) -> bool:
    if is_exact(a) and is_exact(b):
        return a > b
    return float(a) > float(b) - tol


def quantize_key(x, quantum=REFINE_TOL):
    """Deterministic hashable key for grouping nearly-equal floats.

    Exact values key on themselves, so rational-mode classes are exact.
    Float-mode buckets are a documented approximation: values closer than
    `quantum` may or may not share a bucket depending on boundary position.
    """
    if is_exact(x):
        return Fraction(x)
    return round(float(x) / quantum)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**12)


def npow(base, k: int):
    """base**k preserving exactness."""
    if is_exact(base):
        return Fraction(base) ** k
    return float(base) ** k


def isfinite(x) -> bool:
    if is_exact(x):
        return True
    return math.isfinite(float(x))
