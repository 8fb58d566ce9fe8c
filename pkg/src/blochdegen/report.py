"""Deterministic JSON and CSV emission.

Reports are written once, at the end of a run, with sorted keys and
repr-exact floats so that identical configs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import IoFailure

BANDS_HEADER = ("k_index", "k_frac_1", "k_frac_2", "k_frac_3", "band_index", "energy_ha")
SCAN_HEADER = ("lambda", "delta_pt_ha", "delta_exact_ha", "residual_ha")


def to_jsonable(obj):
    """Plain Python types only; complex -> [re, im], non-finite floats -> None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def render_json(payload: dict) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def bands_rows(path_rows, n_bands: int):
    for index, (k, energies) in enumerate(path_rows):
        for band in range(min(n_bands, len(energies))):
            yield (index, float(k[0]), float(k[1]), float(k[2]), band, float(energies[band]))


def write_outputs(out_dir, files: dict) -> list[Path]:
    """Write {name: text or bytes} into out_dir; returns the paths written."""
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, content in sorted(files.items()):
            path = out / name
            if isinstance(content, bytes):
                path.write_bytes(content)
            else:
                path.write_text(content)
            written.append(path)
    except OSError as exc:
        raise IoFailure(f"cannot write to {out}: {exc}") from exc
    return written
