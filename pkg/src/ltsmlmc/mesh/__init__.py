from .channel import (
    BBAR,
    TOTAL_AREA,
    ChannelGeometry,
    apply_channel_transform,
    build_channel_mesh,
    transform_vertices,
)
from .graded import GradedMeshParams, build_graded_lshape, graded_layer_table, layer_widths
from .interval import Mesh1D, MeshHierarchy, build_hierarchy, build_refined_interval, coarse_to_fine_ratio
from .io import dump_mesh, load_mesh
from .trimesh import MeshError, TriMesh

__all__ = [
    "BBAR",
    "TOTAL_AREA",
    "ChannelGeometry",
    "GradedMeshParams",
    "Mesh1D",
    "MeshError",
    "MeshHierarchy",
    "TriMesh",
    "apply_channel_transform",
    "build_channel_mesh",
    "build_graded_lshape",
    "build_hierarchy",
    "build_refined_interval",
    "coarse_to_fine_ratio",
    "dump_mesh",
    "graded_layer_table",
    "layer_widths",
    "load_mesh",
    "transform_vertices",
]
