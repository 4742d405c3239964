"""CSV trace files.

Layout::

    # rate_hz=10000.0
    # unit=volts
    # seed=0
    # t0_s=0.0
    # meta={"f_mod": 300.0, ...}
    t_s,value
    0.000000000000e+00,1.234567890123e-03
"""
from __future__ import annotations

import io
import json

import numpy as np

from .signal import SignalTrace

FMT = "%.12e"


class TraceFormatError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_trace_csv(trace: SignalTrace, path) -> None:
    meta = _jsonable(trace.meta)
    header = [
        f"# rate_hz={trace.rate!r}",
        f"# unit={trace.unit}",
        f"# seed={json.dumps(meta.get('seed'))}",
        f"# t0_s={trace.t0!r}",
        f"# meta={json.dumps(meta, sort_keys=True)}",
        "t_s,value",
    ]
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack([trace.times, trace.samples]), fmt=FMT, delimiter=",")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(header) + "\n")
        fh.write(buf.getvalue())


def read_trace_csv(path) -> SignalTrace:
    header = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                if line.strip() != "t_s,value":
                    raise TraceFormatError(f"{path}: expected column header 't_s,value'")
                break
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
        else:
            raise TraceFormatError(f"{path}: no data section")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    try:
        rate = float(header["rate_hz"])
        unit = header["unit"]
        t0 = float(header.get("t0_s", 0.0))
        meta = json.loads(header.get("meta", "{}"))
    except (KeyError, ValueError) as exc:
        raise TraceFormatError(f"{path}: bad header ({exc})") from None
    if data.shape[1] != 2 or data.shape[0] < 1:
        raise TraceFormatError(f"{path}: expected two columns t_s,value")
    return SignalTrace(data[:, 1], rate, t0, unit, meta)
