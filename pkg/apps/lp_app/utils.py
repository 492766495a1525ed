import re
from typing import List

import numpy as np

from apps.lp_app.domain import LinearProgram, Sense

_SENSE_SYMBOLS = {Sense.GE: ">=", Sense.LE: "<=", Sense.EQ: "="}
_UNSAFE_NAME = re.compile(r"[^A-Za-z0-9_.]")
_LINE_WIDTH = 78


def _number(value: float) -> str:
    return repr(float(value))


def _safe_name(name: str, fallback: str) -> str:
    cleaned = _UNSAFE_NAME.sub("_", name) if name else ""
    if not cleaned or cleaned[0].isdigit() or cleaned[0] in ".eE":
        return fallback
    return cleaned


def _linear_terms(pairs, names: List[str]) -> str:
    parts = []
    for j, value in pairs:
        if value == 0.0:
            continue
        sign = "-" if value < 0 else "+"
        parts.append(f"{sign} {_number(abs(value))} {names[j]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def _wrap(prefix: str, body: str) -> List[str]:
    lines, current = [], prefix
    for token in body.split(" "):
        if len(current) + len(token) + 1 > _LINE_WIDTH and current.strip():
            lines.append(current.rstrip())
            current = "   "
        current += token + " "
    lines.append(current.rstrip())
    return lines


def to_lp_format(lp: LinearProgram) -> str:
    """
    Render a linear program in CPLEX-LP text, minimisation form.

    Variable and row names are sanitised to the characters the format accepts; unnamed entities
    fall back to ``x<j>`` and ``r<i>``. Numbers are written with ``repr`` so the dump is lossless.

    :param lp: Program to render.
    :type lp: LinearProgram
    :return: The LP document, newline-terminated.
    :rtype: str
    """
    names = []
    seen = set()
    for j in range(lp.n_vars):
        name = _safe_name(lp.var_name(j), f"x{j}")
        if name in seen:
            name = f"{name}_{j}"
        seen.add(name)
        names.append(name)

    objective = [(j, c) for j, c in enumerate(lp.objective)]
    lines = [f"\\ {lp.name}", "Minimize"]
    lines.extend(_wrap(" obj: ", _linear_terms(objective, names)))

    lines.append("Subject To")
    for i, row in enumerate(lp.rows):
        label = _safe_name(row.name, f"r{i}")
        body = f"{_linear_terms(row.coeffs, names)} {_SENSE_SYMBOLS[row.sense]} {_number(row.rhs)}"
        lines.extend(_wrap(f" {label}_{i}: ", body))

    lines.append("Bounds")
    for j in range(lp.n_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            lines.append(f" {names[j]} free")
        elif lo == hi:
            lines.append(f" {names[j]} = {_number(lo)}")
        elif not np.isfinite(lo):
            lines.append(f" -inf <= {names[j]} <= {_number(hi)}")
        elif np.isfinite(hi):
            lines.append(f" {_number(lo)} <= {names[j]} <= {_number(hi)}")
        elif lo != 0.0:
            lines.append(f" {names[j]} >= {_number(lo)}")
    lines.append("End")
    return "\n".join(lines) + "\n"
