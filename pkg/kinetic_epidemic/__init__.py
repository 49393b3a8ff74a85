"""
Multiscale kinetic epidemic simulator: commuters move by discrete-velocity
kinetic transport, non-commuters diffuse locally, both on unstructured
two-dimensional meshes.

Submodules are imported on demand so that `--threads` can configure the
numerical libraries before numpy loads.
"""

__version__ = "0.1.0"
