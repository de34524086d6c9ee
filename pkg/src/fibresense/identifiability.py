"""Local identifiability of lumped ladder parameters from multi-tone impedance.

The sensitivity matrix stacks ``Re Z_1`` rows then ``Im Z_1`` rows (one per
tone) against log-parameters ``(ln R_1..ln R_n, ln C_1..ln C_n)``. Full column
rank at a generic point means the parameters are locally unique given
noise-free measurements.
"""

from dataclasses import dataclass

import numpy as np

from .ladder import rc_ladder_impedance
from .reconstruction.lsq import impedance_and_log_jacobian


@dataclass
class SensitivityMatrix:
    values: np.ndarray  # (2 * n_tones, 2 * n)
    freqs: np.ndarray
    n: int
    log_scaled: bool = True

    @property
    def column_names(self):
        return [f"R{i + 1}" for i in range(self.n)] + [f"C{i + 1}" for i in range(self.n)]

    @property
    def row_names(self):
        return [f"re@{f:g}" for f in self.freqs] + [f"im@{f:g}" for f in self.freqs]


@dataclass
class IdentifiabilityResult:
    rank: int
    n_params: int
    identifiable: bool
    singular_values: np.ndarray
    tol: float

    @property
    def condition_number(self):
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")

    def summary(self):
        verdict = "identifiable" if self.identifiable else "not identifiable"
        return f"{verdict}, rank {self.rank}/{self.n_params}"


def _theta(model, strains):
    r, c = model.params(strains)
    return np.concatenate([r, c])


def sensitivity_jacobian(model, strains, freqs, method="fd", rel_step=1e-6, log_scaled=True):
    """Sensitivity of ``(Re Z, Im Z)`` to every R and C.

    ``method="fd"`` uses central differences with a relative step per
    parameter; ``method="analytic"`` differentiates the ladder recursion in
    forward mode. With ``log_scaled`` columns are ``dZ / d ln(theta)``,
    otherwise ``dZ / d theta``.
    """
    f = np.asarray(freqs, dtype=float)
    if f.size == 0:
        raise ValueError("no frequencies")
    theta = _theta(model, strains)
    if np.any(theta <= 0):
        raise ValueError("parameters must be strictly positive")
    n = model.n
    w = 2 * np.pi * f
    if method == "analytic":
        _, dz = impedance_and_log_jacobian(theta[:n], theta[n:], w, model.joint_r)
        if not log_scaled:
            dz = dz / theta
    elif method == "fd":
        if not 0 < rel_step < 1 or np.any(theta * rel_step == 0):
            raise ValueError("finite-difference step underflows")
        dz = np.empty((len(w), 2 * n), dtype=complex)
        for k in range(2 * n):
            h = theta[k] * rel_step
            up = theta.copy()
            dn = theta.copy()
            up[k] += h
            dn[k] -= h
            zu = rc_ladder_impedance(up[:n], up[n:], w, model.joint_r)
            zd = rc_ladder_impedance(dn[:n], dn[n:], w, model.joint_r)
            dz[:, k] = (zu - zd) / (2 * h)
        if log_scaled:
            dz = dz * theta
    else:
        raise ValueError(f"unknown method {method!r}")
    return SensitivityMatrix(np.vstack([dz.real, dz.imag]), f, n, log_scaled)


def numerical_rank_tol(shape):
    """Relative tolerance for a matrix known to working precision."""
    return max(shape) * np.finfo(float).eps


def local_identifiability(jac, tol=None):
    """Rank test with relative singular-value tolerance ``tol``.

    ``tol`` defaults to ``max(rows, cols) * machine epsilon``, appropriate to
    the analytic Jacobian. For a finite-difference Jacobian pass a tolerance
    above its truncation error (``~1e-8`` for a ``1e-6`` step).
    """
    vals = jac.values if isinstance(jac, SensitivityMatrix) else np.asarray(jac)
    if not np.all(np.isfinite(vals)):
        raise ValueError("Jacobian has non-finite entries")
    s = np.linalg.svd(vals, compute_uv=False)
    if tol is None:
        tol = numerical_rank_tol(vals.shape)
    rank = int(np.count_nonzero(s > tol * s[0])) if s.size and s[0] > 0 else 0
    n_params = vals.shape[1]
    return IdentifiabilityResult(rank, n_params, rank == n_params, s, tol)


def identify(model, freqs, strains=None, method="analytic", tol=None):
    """Jacobian at ``strains`` (rest by default) followed by the rank test.

    Duplicate frequencies are merged since they carry no new information.
    """
    f = np.unique(np.asarray(freqs, dtype=float))
    jac = sensitivity_jacobian(model, strains, f, method=method)
    return jac, local_identifiability(jac, tol)
