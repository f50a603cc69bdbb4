"""
BoBNet: localize target structures in 3D volumes by detecting them in 2D slices
of three orthogonal planes and fusing the detections into bounding boxes.
"""

__version__ = "0.1.0"
__description__ = "Bounding-box localization of structures in 3D volumes"
