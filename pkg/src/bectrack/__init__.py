"""Continuous unsharp measurement of a double-well Bose-Einstein condensate.

Conditioned quantum trajectories, synthetic homodyne records, full-state
estimation slaved to the record, and diagnostics on the Bloch sphere.
"""

__version__ = "0.1.0"
