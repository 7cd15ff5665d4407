"""Quadrature-built level shift operators and dense spectral tools.

The oracle assembles ``Lambda_e`` from its second-order integral
representation rather than from the closed forms:

* the dephasing part is diagonal, with entries built from the member's
  total spins and two reservoir numbers (the positive-frequency integral
  of ``u G1(u)`` and the infrared constant);
* the exchange part sums over every two-step path
  ``(sigma, tau) -> one flip -> second flip`` that returns to the group.
  Each path carries a resolvent ``lim_{eps->0} int w(u) / (u - alpha + i eps)``
  which is split into ``-i pi w(alpha)`` plus a principal value.

Densities are evaluated from the literal definitions, independently of the
helpers used by :mod:`qubitbath.resonance`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy.linalg import subspace_angles
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateBasisError, EigensolverError, InvalidInputError
from .quadrature import integrate, pv_integral
from .register import EnergyGroup, RegisterParams, config_energies
from .reservoir import FormFactor, angular_density
from .resonance import LevelShiftData, spectral_projections

MAX_DIM = 256
RESIDUAL_REL = 1e-8
COND_LIMIT = 1e12


def _literal_weight(ff: FormFactor, beta: float, sign: int) -> Callable[[np.ndarray], np.ndarray]:
    """``u^2 G(|u|) / |1 - exp(sign beta u)|`` straight from the definition."""

    def weight(u):
        u = np.asarray(u, dtype=float)
        au = np.abs(u)
        safe = np.where(au == 0.0, 1.0, au)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            dens = u * u * angular_density(ff, safe) / np.abs(1.0 - np.exp(sign * beta * u))
        # u -> 0: u^2 G(u) / (beta |u|) -> lim u G(u) / beta
        limit = _infrared(ff) / beta
        out = np.where(au == 0.0, limit, dens)
        return np.where(np.isfinite(out), out, 0.0)

    return weight


def _infrared(ff: FormFactor) -> float:
    u = 1e-150
    return float(u * angular_density(ff, u))


def _support(ff: FormFactor, beta: float, tol: float) -> float:
    """Half-width beyond which the literal weights are negligible."""
    s = ff.cutoff_scale
    scale = max(ff.amplitude, 1e-300) * max(1.0, 1.0 / beta)
    u = s
    while scale * (1.0 + u) ** (2 * ff.p + 3) * math.exp(-2.0 * u * u / (s * s)) * s > 1e-2 * tol:
        u += 0.05 * s
    return u


class OracleKernels:
    """Memoised reservoir integrals for one ``(form1, form2, beta)`` triple.

    Parameters
    ----------
    form1, form2 : FormFactor
    beta : float
    tol : float
        Absolute tolerance of every quadrature.
    """

    def __init__(self, form1: FormFactor, form2: FormFactor, beta: float, tol: float = 1e-10):
        self.form1 = form1
        self.form2 = form2
        self.beta = float(beta)
        self.tol = float(tol)
        self.infrared = _infrared(form1)
        self.positive_moment = self._positive_moment()
        self._weights = {s: _literal_weight(form2, self.beta, s) for s in (-1, 1)}
        self._half_width = _support(form2, self.beta, tol)
        self._cache: dict[tuple[float, int], complex] = {}

    def _positive_moment(self) -> float:
        ff = self.form1
        if ff.amplitude == 0.0:
            return 0.0
        top = _support(ff, 1.0, self.tol)
        value, _ = integrate(lambda u: u * angular_density(ff, u), 0.0, top, self.tol)
        return value

    def weight(self, u, sign: int):
        return self._weights[sign](u)

    def resolvent(self, alpha: float, sign: int) -> complex:
        """``lim_{eps->0+} int w_sign(u) / (u - alpha + i eps) du``."""
        key = (float(alpha), int(sign))
        if key not in self._cache:
            if self.form2.amplitude == 0.0:
                self._cache[key] = 0j
            else:
                w = self._weights[sign]
                half = max(self._half_width, abs(alpha) + self.form2.cutoff_scale)
                pv = pv_integral(w, alpha, (-half, half), self.tol)
                self._cache[key] = complex(-1j * math.pi * float(w(np.array([alpha]))[0]) + pv)
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class NumericLevelShift:
    e_value: float
    matrix: np.ndarray
    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_dual_vectors: np.ndarray
    residuals: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def numeric_matrix(
    group: EnergyGroup,
    params: RegisterParams,
    kernels: OracleKernels,
) -> np.ndarray:
    """Quadrature-built ``Lambda_e`` in the lexicographic member basis."""
    configs, energies = config_energies(params)
    n = params.n
    d = group.size
    position = {
        (int(s), int(t)): i for i, (s, t) in enumerate(zip(group.sigma_idx, group.tau_idx))
    }
    spin_sum = configs.sum(axis=1).astype(float)

    dephasing = np.zeros((d, d), dtype=complex)
    thermal = 1j * math.pi * kernels.infrared / kernels.beta
    for i, (s, t) in enumerate(zip(group.sigma_idx, group.tau_idx)):
        ss, st = spin_sum[s], spin_sum[t]
        dephasing[i, i] = -0.5 * ((ss**2 - st**2) * kernels.positive_moment - (ss - st) ** 2 * thermal)

    exchange = np.zeros((d, d), dtype=complex)
    if params.lambda2 != 0.0:
        bits = [1 << (n - 1 - j) for j in range(n)]
        moves = [("L", bit) for bit in bits] + [("R", bit) for bit in bits]
        for i, (s, t) in enumerate(zip(group.sigma_idx, group.tau_idx)):
            e_member = energies[s] - energies[t]
            for first, b1 in moves:
                s1, t1 = (s ^ b1, t) if first == "L" else (s, t ^ b1)
                alpha = e_member - (energies[s1] - energies[t1])
                for second, b2 in moves:
                    s2, t2 = (s1 ^ b2, t1) if second == "L" else (s1, t1 ^ b2)
                    m = position.get((int(s2), int(t2)))
                    if m is None:
                        continue
                    # outer flip on the left uses |1-e^{-beta u}|, on the right |1-e^{beta u}|
                    sign = -1 if second == "L" else 1
                    coeff = 1.0 if first == second else -1.0
                    exchange[m, i] += -0.5 * coeff * kernels.resolvent(alpha, sign)

    return params.lambda1**2 * dephasing + params.lambda2**2 * exchange


def build_level_shift_numeric(
    group: EnergyGroup,
    params: RegisterParams,
    quad_tol: float = 1e-10,
    kernels: OracleKernels | None = None,
) -> NumericLevelShift:
    """Assemble ``Lambda_e`` by quadrature and diagonalise it."""
    if kernels is None:
        kernels = OracleKernels(params.form1, params.form2, params.beta, quad_tol)
    matrix = numeric_matrix(group, params, kernels)
    values, vectors = eig_dense_nonhermitian(matrix)
    duals = dual_basis(vectors)
    residuals = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
    return NumericLevelShift(
        e_value=group.e_value,
        matrix=matrix,
        eigenvalues=values,
        right_vectors=vectors,
        left_dual_vectors=duals,
        residuals=residuals,
    )


def eig_dense_nonhermitian(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and unit right eigenvectors (as columns), sorted by (Im, Re) descending."""
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError("matrix must be square")
    if a.shape[0] > MAX_DIM:
        raise InvalidInputError(f"dense eigensolver limited to dimension {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise EigensolverError("matrix has non-finite entries")
    try:
        values, vectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"LAPACK eigensolver did not converge: {exc}") from exc
    order = np.lexsort((-values.real, -values.imag))
    values, vectors = values[order], vectors[:, order]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    norm = np.linalg.norm(a, 2)
    residuals = np.linalg.norm(a @ vectors - vectors * values, axis=0)
    if np.any(residuals > RESIDUAL_REL * norm + 1e-300):
        raise EigensolverError(
            f"eigenpair residual {residuals.max():.3g} exceeds {RESIDUAL_REL:g} * |A| = {RESIDUAL_REL * norm:.3g}"
        )
    return values, vectors


def dual_basis(right_vectors) -> np.ndarray:
    """Vectors ``w_r`` (columns) with ``<v_r, w_r'> = delta_rr'`` inside ``span{v_r}``.

    Accepts a ``d x k`` array of column vectors or a sequence of vectors.
    """
    v = np.asarray(right_vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2 or v.shape[1] > v.shape[0] or v.shape[1] == 0:
        raise InvalidInputError("need between 1 and d vectors of length d")
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegenerateBasisError(f"basis condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    if v.shape[0] == v.shape[1]:
        return np.linalg.inv(v).conj().T
    gram = v.conj().T @ v
    return v @ np.linalg.inv(gram)


def level_shift_from_matrix(e_value: float, matrix: np.ndarray) -> LevelShiftData:
    """Spectral data of an arbitrary level shift matrix via the dense solver."""
    values, vectors = eig_dense_nonhermitian(matrix)
    duals = dual_basis(vectors)
    etas, etas_dual = vectors.T.copy(), duals.T.copy()
    q_deltas, qs = spectral_projections(values, etas, etas_dual)
    return LevelShiftData(
        e_value=e_value,
        matrix=np.asarray(matrix, dtype=complex),
        deltas=values,
        etas=etas,
        etas_dual=etas_dual,
        q_deltas=q_deltas,
        q_projections=qs,
        branches=tuple(str(k) for k in range(values.size)),
        source="numeric",
    )


@dataclass(frozen=True)
class CrosscheckReport:
    group_e: float
    max_eig_dev: float
    max_entry_dev: float
    max_subspace_angle: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "group_e": self.group_e,
            "max_eig_dev": self.max_eig_dev,
            "max_entry_dev": self.max_entry_dev,
            "max_subspace_angle": self.max_subspace_angle,
            "pass": self.passed,
        }


def match_eigenvalues(a: Sequence[complex], b: Sequence[complex]) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-weight pairing of two eigenvalue multisets; returns index arrays."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise InvalidInputError("eigenvalue multisets differ in size")
    rows, cols = linear_sum_assignment(np.abs(a[:, None] - b[None, :]))
    return rows, cols


def crosscheck(closed: LevelShiftData, numeric: NumericLevelShift, tol: float = 1e-6) -> CrosscheckReport:
    """Compare closed-form and quadrature level shifts of the same group."""
    if closed.matrix.shape != numeric.matrix.shape:
        raise InvalidInputError(
            f"dimension mismatch: {closed.matrix.shape} vs {numeric.matrix.shape}"
        )
    rows, cols = match_eigenvalues(closed.deltas, numeric.eigenvalues)
    dev = np.abs(closed.deltas[rows] - numeric.eigenvalues[cols])
    max_dev = float(dev.max()) if dev.size else 0.0
    entry = float(np.max(np.abs(closed.matrix - numeric.matrix))) if closed.dim else 0.0

    # angle between the closed eigenspace of each distinct shift and the
    # span of the numeric vectors paired with it
    angle = 0.0
    for q_delta in closed.q_deltas:
        sel = np.abs(closed.deltas[rows] - q_delta) <= 1e-12 * max(1.0, abs(q_delta))
        if not sel.any() or sel.all():
            continue
        a = closed.etas[rows[sel]].T
        b = numeric.right_vectors[:, cols[sel]]
        angle = max(angle, float(np.max(subspace_angles(a, b))))
    return CrosscheckReport(
        group_e=float(closed.e_value),
        max_eig_dev=max_dev,
        max_entry_dev=entry,
        max_subspace_angle=angle,
        passed=bool(max_dev <= tol),
    )


def plemelj_split(f, alpha: float, domain: tuple[float, float], tol: float = 1e-10) -> complex:
    """``-i pi f(alpha) + PV int f(u)/(u - alpha) du``."""
    fa = float(np.asarray(f(np.array([alpha])))[0])
    return complex(-1j * math.pi * fa + pv_integral(f, alpha, domain, tol))


def regularised_resolvent(f, alpha: float, eps: float, domain: tuple[float, float], tol: float = 1e-10) -> complex:
    """``int f(u) / (u - alpha + i eps) du`` at finite ``eps``."""
    lo, hi = domain
    fa = float(np.asarray(f(np.array([alpha])))[0])

    def smooth(u):
        return (f(u) - fa) / (u - alpha + 1j * eps)

    pts = [alpha + k * eps for k in (-100, -10, -1, 0, 1, 10, 100)]
    value, _ = integrate(smooth, lo, hi, tol, breakpoints=pts)
    return complex(value + fa * (np.log(hi - alpha + 1j * eps) - np.log(lo - alpha + 1j * eps)))


def plemelj_extrapolation(
    f,
    alpha: float,
    domain: tuple[float, float],
    eps_values: Sequence[float] = (4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3),
    tol: float = 1e-10,
) -> tuple[complex, np.ndarray]:
    """Polynomial extrapolation of the finite-``eps`` resolvents to ``eps = 0``."""
    eps = np.asarray(eps_values, dtype=float)
    values = np.array([regularised_resolvent(f, alpha, e, domain, tol) for e in eps])
    coeffs = np.polyfit(eps, values, deg=eps.size - 1)
    return complex(coeffs[-1]), values
