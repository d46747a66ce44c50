"""Physical constants (SI)."""

C_LIGHT = 299792458.0  # m/s
