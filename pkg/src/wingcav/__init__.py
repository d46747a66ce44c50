"""Winged Fabry-Perot cavity QED workbench.

Computes resonant modes (complex frequency, Q, mode volume) of a winged
confocal cavity with a 2D scalar frequency-domain solver, models multilayer
dielectric mirrors with transfer matrices, and simulates the resulting
dissipative Jaynes-Cummings system from a single configuration file.
"""

__version__ = "0.1.0"
