"""
Input validation utilities
"""
import difflib
import math
import numbers


def _is_number(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def validate_positive(value, allow_zero=False):
    """Validate a finite positive number"""
    if not _is_number(value) or not math.isfinite(value):
        return False, f"expected a finite number, got {value!r}"
    if value < 0 or (value == 0 and not allow_zero):
        return False, f"must be {'non-negative' if allow_zero else 'positive'}, got {value}"
    return True, None


def validate_int(value, minimum=None):
    """Validate an integer with an optional lower bound"""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if not (_is_number(value) and float(value).is_integer()):
            return False, f"expected an integer, got {value!r}"
    if minimum is not None and value < minimum:
        return False, f"must be at least {minimum}, got {value}"
    return True, None


def validate_bool(value):
    if not isinstance(value, bool):
        return False, f"expected true or false, got {value!r}"
    return True, None


def validate_vector(value, length):
    """Validate a list of finite numbers of the given length"""
    if not isinstance(value, (list, tuple)):
        return False, f"expected a list of {length} numbers"
    if len(value) != length:
        return False, f"expected {length} entries, got {len(value)}"
    if not all(_is_number(v) and math.isfinite(v) for v in value):
        return False, "entries must be finite numbers"
    return True, None


def validate_positive_list(value):
    """Validate a non-empty list of positive numbers"""
    if not isinstance(value, (list, tuple)) or not value:
        return False, "expected a non-empty list of positive numbers"
    for entry in value:
        ok, _ = validate_positive(entry)
        if not ok:
            return False, f"entries must be positive, got {entry!r}"
    return True, None


def validate_choice(value, choices):
    if value not in choices:
        return False, f"expected one of {', '.join(choices)}, got {value!r}"
    return True, None


def suggest_key(key, allowed):
    """' (did you mean "x"?)' for the closest allowed key, or an empty string"""
    matches = difflib.get_close_matches(str(key), list(allowed), n=1, cutoff=0.6)
    return f' (did you mean "{matches[0]}"?)' if matches else ''
