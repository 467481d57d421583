"""Legacy ASCII VTK export of cell fields on the structured half-model mesh."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .materials import MaterialParams
from .mesh import MU0, Mesh
from .spaces import DofLayout


def write_vtk(
    path: str | Path,
    mesh: Mesh,
    cell_data: dict[str, np.ndarray],
    title: str = "foilwind fields",
) -> Path:
    """One snapshot as a version-3.0 unstructured grid with cell scalars."""
    path = Path(path)
    for name, values in cell_data.items():
        if len(values) != mesh.n_cells:
            raise ValueError(f"cell field {name!r} has {len(values)} entries, "
                             f"mesh has {mesh.n_cells} cells")
    lines = [
        "# vtk DataFile Version 3.0",
        title[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines += [f"{r:.9e} {z:.9e} 0.0" for r, z in mesh.nodes]
    lines.append(f"CELLS {mesh.n_cells} {5 * mesh.n_cells}")
    lines += ["4 " + " ".join(str(n) for n in quad) for quad in mesh.quads]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += ["9"] * mesh.n_cells
    lines.append(f"CELL_DATA {mesh.n_cells}")
    for name, values in cell_data.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [f"{v:.9e}" for v in np.asarray(values, dtype=float)]
    path.write_text("\n".join(lines) + "\n")
    return path


def snapshot_fields(
    u: np.ndarray, mesh: Mesh, layout: DofLayout, materials: MaterialParams
) -> dict[str, np.ndarray]:
    """Cell scalars for export: normalized current density and flux magnitude.

    ``j_norm`` is the azimuthal current density over the engineering critical
    current density (zero outside the winding); ``b_mag`` is |b| from the
    cell-center field.
    """
    uf = u[: layout.n_field_dofs]
    x = layout.curl_basis @ uf
    j_norm = np.zeros(mesh.n_cells)
    coil = mesh.coil_cells
    j_norm[coil] = np.abs(x[coil]) / mesh.area[coil] / materials.jc_engineering()

    xe = layout.basis @ uf
    e = mesh.cell_edges
    h_r = (xe[e[:, 0]] + xe[e[:, 1]]) / (2.0 * mesh.dr)
    h_z = (xe[e[:, 2]] + xe[e[:, 3]]) / (2.0 * mesh.dz)
    b_mag = MU0 * np.hypot(h_r, h_z)
    return {"j_norm": j_norm, "b_mag": b_mag}
