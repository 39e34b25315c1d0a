"""Spherical scanpath toolkit.

Subpackages and modules:

- ``sphere``: coordinate transforms, great-circle distance, gnomonic
  projections, and the equirectangular pixel convention.
- ``timewarp``: hard and soft dynamic time warping on the sphere, with
  analytic gradients.
- ``metrics``: the scanpath-similarity suite and evaluation protocols.
- ``gan``: desk-scale conditional GAN for scanpath generation.
- ``behavior``: aggregate maps, spherical KDE, exploration-time and
  inter-observer congruency analyses.
- ``io`` / ``thumbnail`` / ``cli``: file formats, the panning-viewport
  thumbnail application, and the command-line entry points.
"""

from .sphere import GazePoint, Scanpath, ScanpathSet

__all__ = ["GazePoint", "Scanpath", "ScanpathSet"]
__version__ = "0.1.0"
