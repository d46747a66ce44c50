import numpy as np
import pytest

from wingcav.fdfd import PmlParams, find_modes
from wingcav.geometry import CavityParams, build_geometry, grid_for_cavity

L_REF = 0.01


def winged_params(d_over_l, **kw):
    L = kw.pop("L", L_REF)
    return CavityParams(L=L, h=0.5 * L, d=d_over_l * L, l_pml=0.4 * L, **kw)


@pytest.fixture(scope="session")
def cavity_solution():
    """Shared solve of the d = 0.2L winged cavity (moderate resolution)."""
    params = winged_params(0.2)
    grid = grid_for_cavity(params, 30, 45.2e9)
    mat = build_geometry(params, grid)
    modes = find_modes(mat, PmlParams(width=params.l_pml),
                       2 * np.pi * 45.2e9, 10, seed=1)
    return params, mat, modes
