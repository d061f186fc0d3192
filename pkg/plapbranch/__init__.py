"""plapbranch - p-Laplacian eigenvalue branches on planar rectangles and triangles."""

__version__ = "0.1.0"
