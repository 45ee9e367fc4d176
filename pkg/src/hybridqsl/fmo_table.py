"""Site energies and excitonic couplings of one apo-FMO subunit (cm^-1)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import AsymmetricTable, OverrideShapeMismatch

N_SITES = 7

# diagonal: site energies E_n; off-diagonal: couplings V_nm (BChl 1..7)
_TABLE = (
    (12410.0, -87.7, 5.5, -5.9, 6.7, -13.7, -9.9),
    (-87.7, 12530.0, 30.8, 8.2, 0.7, 11.8, 4.3),
    (5.5, 30.8, 12210.0, -53.5, -2.2, -9.6, 6.0),
    (-5.9, 8.2, -53.5, 12320.0, -70.7, -17.0, -63.3),
    (6.7, 0.7, -2.2, -70.7, 12480.0, 81.1, -1.3),
    (-13.7, 11.8, -9.6, -17.0, 81.1, 12630.0, 39.7),
    (-9.9, 4.3, 6.0, -63.3, -1.3, 39.7, 12440.0),
)


def fmo_table(path: str | Path | None = None) -> np.ndarray:
    """Return the 7x7 site table in cm^-1 (a fresh copy).

    Parameters
    ----------
    path : str or Path, optional
        Whitespace- or comma-delimited text file replacing the built-in
        values. It must hold a symmetric 7x7 table; ``#`` starts a comment.
    """
    if path is None:
        return np.array(_TABLE)
    text = Path(path).read_text()
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([float(x) for x in line.replace(",", " ").split()])
    if len(rows) != N_SITES or any(len(r) != N_SITES for r in rows):
        shape = (len(rows), max((len(r) for r in rows), default=0))
        raise OverrideShapeMismatch(f"site table override must be {N_SITES}x{N_SITES}, got {shape}")
    table = np.array(rows)
    if not np.allclose(table, table.T, rtol=0, atol=1e-12):
        raise AsymmetricTable("site table override is not symmetric")
    return table
