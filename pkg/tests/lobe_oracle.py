"""Independent continuum oracle for the full master equation.

The generator is quadratic, so a Gaussian lobe rho = exp(-Q(u, v)) with a
complex quadratic exponent stays Gaussian; the exponent coefficients obey
closed ODEs that we integrate with an off-the-shelf ODE solver.  This path
shares no code with the spectral split-step integrator, so agreement
between the two is a strong correctness check.

Writing Q = a20 u^2 + a02 v^2 + a11 uv + a10 u + a01 v + a00 with
u = x - y and v = x + y, the equation

    drho/dt = i (2 hbar / m) d2/dudv rho - 2 gamma u d/du rho - D u^2 rho

gives, with ik = i * 2 hbar / m:

    a20' = -(ik 2 a20 a11 + 4 gamma a20 - D)
    a02' = -(ik 2 a02 a11)
    a11' = -(ik (4 a20 a02 + a11^2) + 2 gamma a11)
    a10' = -(ik (2 a20 a01 + a11 a10) + 2 gamma a10)
    a01' = -(ik (2 a02 a10 + a11 a01))
    a00' = -(ik (a10 a01 - a11))
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp


def lobe_rhs(t, y, kappa, gamma, d_value):
    a20, a02, a11, a10, a01, a00 = y.reshape(6, -1)
    ik = 1j * kappa
    da20 = -(ik * 2.0 * a20 * a11 + 4.0 * gamma * a20 - d_value)
    da02 = -(ik * 2.0 * a02 * a11)
    da11 = -(ik * (4.0 * a20 * a02 + a11 ** 2) + 2.0 * gamma * a11)
    da10 = -(ik * (2.0 * a20 * a01 + a11 * a10) + 2.0 * gamma * a10)
    da01 = -(ik * (2.0 * a02 * a10 + a11 * a01))
    da00 = -(ik * (a10 * a01 - a11))
    return np.concatenate([da20, da02, da11, da10, da01, da00])


def cat_lobes(halfwidth: float, delta_x: float) -> np.ndarray:
    """Exponent coefficients for the four lobes of an even two-branch state."""
    lobes = []
    for ci in (0.5 * delta_x, -0.5 * delta_x):
        for cj in (0.5 * delta_x, -0.5 * delta_x):
            a20 = a02 = 1.0 / (8.0 * halfwidth ** 2)
            a11 = 0.0
            a10 = -(ci - cj) / (4.0 * halfwidth ** 2)
            a01 = -(ci + cj) / (4.0 * halfwidth ** 2)
            a00 = (ci ** 2 + cj ** 2) / (4.0 * halfwidth ** 2)
            lobes.append([a20, a02, a11, a10, a01, a00])
    return np.array(lobes, dtype=complex).T.reshape(-1)


def _rho_at(y, u, v):
    a20, a02, a11, a10, a01, a00 = y.reshape(6, -1)
    return complex(np.sum(np.exp(
        -(a20 * u * u + a02 * v * v + a11 * u * v + a10 * u + a01 * v + a00))))


class CatOracle:
    """Exact coherence trajectory of a two-branch state under the full
    equation, measured exactly like the grid probe: |rho| at the fixed
    off-diagonal point (dx/2, -dx/2) over the geometric mean of the
    mirrored diagonal values."""

    def __init__(self, halfwidth, delta_x, hbar, mass, gamma, d_value):
        self.delta_x = delta_x
        self.args = (2.0 * hbar / mass, gamma, d_value)
        self.y0 = cat_lobes(halfwidth, delta_x)

    def coherence(self, times) -> np.ndarray:
        out = np.empty(len(times))
        sol = solve_ivp(lobe_rhs, (0.0, max(times[-1], 1e-300)), self.y0,
                        t_eval=times, rtol=1e-11, atol=1e-13,
                        args=self.args, method="DOP853")
        dx = self.delta_x
        for idx in range(sol.y.shape[1]):
            y = sol.y[:, idx]
            num = abs(_rho_at(y, dx, 0.0))
            den = np.sqrt(_rho_at(y, 0.0, dx).real
                          * _rho_at(y, 0.0, -dx).real)
            out[idx] = num / den
        return out
