"""Deterministic JSON/CSV artifacts: 17 significant digits, big integers as strings."""
from __future__ import annotations

import datetime as _dt
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from . import __version__

SAFE_INT = 2 ** 53
TIMESTAMP_KEY = "generated_at"


def _float_text(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    s = format(x, ".17g")
    # keep floats recognizable as floats on re-parse
    if all(c in "-0123456789" for c in s):
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    """Map numpy scalars, Fractions and dataclasses onto JSON-ready Python values."""
    if hasattr(obj, "to_dict") and callable(obj.to_dict):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits and integers beyond 2^53 as strings."""
    out: list[str] = []

    def emit(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if v is None:
            out.append("null")
        elif v is True:
            out.append("true")
        elif v is False:
            out.append("false")
        elif isinstance(v, int):
            out.append(json.dumps(str(v)) if abs(v) >= SAFE_INT else str(v))
        elif isinstance(v, float):
            out.append(_float_text(v))
        elif isinstance(v, str):
            out.append(json.dumps(v))
        elif isinstance(v, dict):
            if not v:
                out.append("{}")
                return
            out.append("{\n")
            for n, (k, x) in enumerate(v.items()):
                out.append(pad + json.dumps(k) + ": ")
                emit(x, level + 1)
                out.append(",\n" if n < len(v) - 1 else "\n")
            out.append(end + "}")
        elif isinstance(v, list):
            if not v:
                out.append("[]")
                return
            if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
                out.append("[")
                for n, x in enumerate(v):
                    emit(x, level + 1)
                    if n < len(v) - 1:
                        out.append(", ")
                out.append("]")
                return
            out.append("[\n")
            for n, x in enumerate(v):
                out.append(pad)
                emit(x, level + 1)
                out.append(",\n" if n < len(v) - 1 else "\n")
            out.append(end + "]")
        else:
            raise TypeError(f"cannot serialize {type(v).__name__}")

    emit(_plain(obj), 0)
    return "".join(out) + "\n"


def loads(text: str) -> Any:
    return json.loads(text)


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; echoed into every artifact."""

    subcommand: str
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, **{k: self.options[k] for k in sorted(self.options)}}


def artifact(config: RunConfig, result: Any, ok: Optional[bool] = None,
             timestamp: Optional[str] = None) -> dict:
    doc = {
        "tool": f"fklab {__version__}",
        "run_config": config.to_dict(),
        TIMESTAMP_KEY: timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if ok is not None:
        doc["pass"] = bool(ok)
    doc["result"] = result
    return doc


def strip_timestamp(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != TIMESTAMP_KEY}


def emit_report(doc: dict, path: Optional[str]) -> str:
    """Write the JSON artifact to path (or return it for stdout); errors name the path."""
    text = dumps(doc)
    if path:
        try:
            d = os.path.dirname(os.path.abspath(path))
            os.makedirs(d, exist_ok=True)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as e:
            raise OSError(f"cannot write report to {path}: {e.strerror or e}") from e
    return text


def write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise OSError(f"cannot read {path}: {e.strerror or e}") from e


__all__ = ["dumps", "loads", "RunConfig", "artifact", "strip_timestamp", "emit_report", "write_text",
           "read_text", "TIMESTAMP_KEY"]
