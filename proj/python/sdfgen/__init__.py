"""Signed distance fields from meshes and a two-stage generative model over them.

Grids are numpy arrays indexed [z, y, x] on the canonical lattice spanning
[-0.5, 0.5]^3, positive inside.
"""

from ._sdfgen import (
    SdfgenError,
    ShapeGenerator,
    __version__,
    eikonal_residual,
    extract_surface,
    load_mesh,
    low_pass,
    make_icosphere,
    marching_cubes,
    mesh_stats,
    mesh_to_sdf,
    normalize_mesh,
    read_sdf,
    split_bands,
    synth_dataset,
    train_hfg,
    train_lfg,
    winding_number,
    write_sdf,
)

__all__ = [
    "SdfgenError",
    "ShapeGenerator",
    "__version__",
    "eikonal_residual",
    "extract_surface",
    "load_mesh",
    "low_pass",
    "make_icosphere",
    "marching_cubes",
    "mesh_stats",
    "mesh_to_sdf",
    "normalize_mesh",
    "read_sdf",
    "split_bands",
    "synth_dataset",
    "train_hfg",
    "train_lfg",
    "winding_number",
    "write_sdf",
]
