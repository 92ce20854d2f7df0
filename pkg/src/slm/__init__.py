"""Whole-body skin lesion mapping engine.

Maps per-image 2D lesion detections from a cylindrical multi-camera rig
onto a reconstructed 3D body mesh, fuses multi-view sightings into unique
3D lesions, and tracks lesions across scans taken at different times.
"""

__version__ = "0.1.0"
