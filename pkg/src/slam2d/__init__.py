"""2D SLAM workbench: simulation, mapping, localization, and graph optimization."""

from __future__ import annotations

__version__ = "0.1.0"
