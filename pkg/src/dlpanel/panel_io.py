"""Panel CSV input/output and deterministic JSON report serialisation.

CSV layout (long format, UTF-8, '.' decimals): header ``i,t,y,x1..xK``;
one row per (i, t) pair with t running from 1-L to T.  Rows with t <= 0
supply the pre-sample response lags (their covariate cells are ignored
and written as 0).  JSON output emits every float with 17 significant
digits so reports round-trip exactly and identical runs produce identical
bytes.
"""
from __future__ import annotations

import csv
import math
import re
from pathlib import Path

import numpy as np

from .model import PanelData

_X_NAME = re.compile(r"^x([1-9][0-9]*)$")


def save_panel(panel: PanelData, path) -> None:
    """Write a panel to CSV in the long layout described above."""
    n, t, p_x = panel.n_units, panel.n_periods, panel.p_x
    L = panel.n_init_lags
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "t", "y"] + [f"x{k + 1}" for k in range(p_x)])
        zeros = ["0"] * p_x
        for i in range(n):
            for back in range(L - 1, -1, -1):
                # period -back; y_init column `back` holds it
                writer.writerow([i + 1, -back, _fmt(panel.y_init[i, back])]
                                + zeros)
            for tt in range(t):
                writer.writerow([i + 1, tt + 1, _fmt(panel.y[i, tt])]
                                + [_fmt(v) for v in panel.x[i, tt]])


def load_panel(path) -> PanelData:
    """Read a panel from CSV.

    Raises
    ------
    ValueError
        On missing columns, duplicate or missing (i, t) pairs, or
        non-numeric cells; messages carry the offending row number.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV file") from None
        header = [h.strip() for h in header]
        for required in ("i", "t", "y"):
            if required not in header:
                raise ValueError(f"missing required column {required!r}")
        x_cols = {}
        for pos, name in enumerate(header):
            if name in ("i", "t", "y"):
                continue
            m = _X_NAME.match(name)
            if not m:
                raise ValueError(f"unrecognised column {name!r}")
            k = int(m.group(1))
            if k in x_cols:
                raise ValueError(f"duplicate column {name!r}")
            x_cols[k] = pos
        p_x = len(x_cols)
        if p_x == 0:
            raise ValueError("no covariate columns x1..xK found")
        if sorted(x_cols) != list(range(1, p_x + 1)):
            raise ValueError("covariate columns must be named x1..xK "
                             "without gaps")
        i_pos, t_pos, y_pos = (header.index(c) for c in ("i", "t", "y"))
        x_order = [x_cols[k] for k in range(1, p_x + 1)]

        cells = {}
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"row {rownum}: expected {len(header)} "
                                 f"cells, got {len(row)}")
            try:
                unit = int(row[i_pos])
                period = int(row[t_pos])
                yval = float(row[y_pos])
                xvals = [float(row[k]) for k in x_order]
            except ValueError:
                raise ValueError(f"row {rownum}: non-numeric cell") from None
            if not math.isfinite(yval) or not all(map(math.isfinite, xvals)):
                raise ValueError(f"row {rownum}: non-finite value")
            key = (unit, period)
            if key in cells:
                raise ValueError(f"row {rownum}: duplicate pair (i={unit}, "
                                 f"t={period})")
            cells[key] = (yval, xvals)

    if not cells:
        raise ValueError("CSV contains no data rows")
    units = sorted({u for u, _ in cells})
    periods = sorted({t for _, t in cells})
    t_max = max(periods)
    t_min = min(periods)
    if t_max < 1:
        raise ValueError("no observation rows with t >= 1")
    L = max(0, 1 - t_min)
    expected = [(u, t) for u in units for t in range(t_min, t_max + 1)]
    for key in expected:
        if key not in cells:
            raise ValueError(f"missing pair (i={key[0]}, t={key[1]})")
    if len(cells) != len(expected):
        extra = sorted(set(cells) - set(expected))
        raise ValueError(f"unexpected pairs outside the balanced grid: "
                         f"{extra[:3]}")

    n = len(units)
    y = np.empty((n, t_max))
    x = np.empty((n, t_max, p_x))
    y_init = np.zeros((n, L))
    for ui, u in enumerate(units):
        for period in range(t_min, t_max + 1):
            yval, xvals = cells[(u, period)]
            if period >= 1:
                y[ui, period - 1] = yval
                x[ui, period - 1, :] = xvals
            else:
                y_init[ui, -period] = yval  # column k holds period -k
    return PanelData(y=y, x=x, y_init=y_init)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _to_json(obj, indent: int) -> str:
    pad = " " * indent
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        escaped = escaped.replace("\n", "\\n").replace("\t", "\\t")
        return f'"{escaped}"'
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return "null"
        return _fmt(v)
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [_to_json(v, indent + 2) for v in obj]
        if not items:
            return "[]"
        inner = (",\n" + pad + "  ").join(items)
        return "[\n" + pad + "  " + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        items = []
        for key, val in obj.items():
            items.append(f'"{key}": ' + _to_json(val, indent + 2))
        if not items:
            return "{}"
        inner = (",\n" + pad + "  ").join(items)
        return "{\n" + pad + "  " + inner + "\n" + pad + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj) -> str:
    """Serialise to JSON with floats at 17 significant digits."""
    return _to_json(obj, 0) + "\n"


def save_json(obj, path) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")
