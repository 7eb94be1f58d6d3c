"""shoremap: stereo close-range photogrammetry toolkit for shoreline
elevation mapping.

Library modules: geometry (primitives), camera (pinhole + distortion),
calibration (checkerboard intrinsics), stereo (disparity + point clouds),
georectify (GCP homography + warping), registration (similarity
alignment), surface (TIN/DSM), formats (file I/O), cli (pipeline
commands).
"""

__version__ = "0.1.0"
