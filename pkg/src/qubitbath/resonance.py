"""Closed-form level shift operators, resonance energies and decay rates.

For a non-interacting register (J = 0) the level shift operator of a group
acts on the ``2^n0``-dimensional span of its members. Writing the members
as products over the sites where ``sigma_j = tau_j``, with per-site basis
``(|++>, |-->)``, it takes the form

    Lambda_e = s I + sum_k  I x ... x M^{mu_k} x ... x I,

    M^j = [[a + i b_j c_j, -i b_j c_j],
           [-i b_j,         -a + i b_j]],

where ``s = i l1^2 y1 + l2^2 (x2 + i y2)``. Its eigenvectors are tensor
products of the 2x2 eigenvectors, which makes every quantity explicit.
"""

from __future__ import annotations

import cmath
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import GenericityError, InvalidInputError
from .register import (
    EnergyGroup,
    RegisterParams,
    SpectralTable,
    all_configs,
    energy_diff,
    group_structure,
    spins_to_str,
)
from .reservoir import CouplingScalars, thermal_weight

log = logging.getLogger(__name__)

ZERO_REL = 1e-12
OSCILLATORY_IM = 1e-14
PROJECTION_REL = 1e-12


def site_matrix(a: float, b: float, c: float) -> np.ndarray:
    """The 2x2 single-site block ``M^j``."""
    return np.array(
        [[a + 1j * b * c, -1j * b * c], [-1j * b, -a + 1j * b]],
        dtype=complex,
    )


def _printed_roots(a: float, b: float, c: float) -> tuple[complex, complex]:
    # the radical as typeset in the source formula, kept for comparison only
    centre = 0.5j * b * (c + 1)
    rad = cmath.sqrt(-(b**2) * (c + 1) ** 2 + 4 * a * (a - 1j * b * (c - 1)))
    return centre + 0.5 * rad, centre - 0.5 * rad


def _branch_key(z: complex) -> tuple[float, float]:
    return (z.imag, z.real)


@dataclass(frozen=True, eq=False)
class SiteCoefficients:
    """Per-site data for one group: the block ``M^j`` and its eigensystem.

    ``xi_plus``/``xi_minus`` are unit right eigenvectors; the duals satisfy
    ``<xi^s, xi_dual^s'> = delta_ss'`` with the inner product antilinear in
    its first slot. ``kappa_*`` is the normalisation constant evaluated from
    its printed closed form and is a diagnostic only.
    """

    site: int
    a: float
    b: float
    c: float
    z_plus: complex
    z_minus: complex
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    xi_dual_plus: np.ndarray
    xi_dual_minus: np.ndarray
    kappa_plus: float
    kappa_minus: float
    printed_root_deviation: float

    @property
    def matrix(self) -> np.ndarray:
        return site_matrix(self.a, self.b, self.c)

    def branch(self, sign: int) -> tuple[complex, np.ndarray, np.ndarray]:
        if sign > 0:
            return self.z_plus, self.xi_plus, self.xi_dual_plus
        return self.z_minus, self.xi_minus, self.xi_dual_minus


def _site_eigensystem(a: float, b: float, c: float):
    e1 = np.array([1.0 + 0j, 0.0])
    e2 = np.array([0.0 + 0j, 1.0])
    if b == 0.0:
        # diagonal block diag(a, -a); label the larger real part as "+"
        if a >= 0:
            return (complex(a), e1, e1), (complex(-a), e2, e2)
        return (complex(-a), e2, e2), (complex(a), e1, e1)

    # eigenvectors are scale invariant; solve in units of max(|a|, b) so that a
    # subnormal b neither underflows the radical nor overflows the kernel vectors
    scale = max(abs(a), b)
    sa, sb = a / scale, b / scale
    trace = 1j * sb * (c + 1)
    det = -(sa**2) + 1j * sa * sb * (1 - c)
    root = cmath.sqrt(trace * trace - 4 * det)
    r1, r2 = 0.5 * (trace + root), 0.5 * (trace - root)
    big = r1 if abs(r1) >= abs(r2) else r2
    small = det / big if big != 0 else 0j
    zs = sorted((big, small), key=_branch_key, reverse=True)

    out = []
    m = site_matrix(sa, sb, c)
    for z in zs:
        shifted = m - z * np.eye(2)
        # kernel vectors from the dominant row/column; equals (1, 1 + i(z-a)/(bc)) up to scale
        row = shifted[int(np.argmax(np.abs(shifted).sum(axis=1)))]
        col = shifted[:, int(np.argmax(np.abs(shifted).sum(axis=0)))]
        xi = np.array([row[1], -row[0]])
        xi = xi * np.exp(-1j * np.angle(xi[0])) / np.linalg.norm(xi)
        left = np.array([col[1], -col[0]])
        dual = np.conj(left / (left @ xi))
        out.append((complex(z) * scale, xi, dual))
    return out[0], out[1]


def site_coefficients(
    j: int,
    params: RegisterParams,
    scalars: CouplingScalars,
    e0: int,
) -> SiteCoefficients:
    """Block ``M^j`` and its eigensystem for site ``j`` (0-based) in a group with ``e0``."""
    if not 0 <= j < params.n:
        raise InvalidInputError(f"site index {j} out of range")
    bj = float(params.b_fields[j])
    if bj <= 0:
        raise InvalidInputError("site coefficients need B_j > 0")
    beta = params.beta
    a = -(params.lambda1**2) * e0 * scalars.pv_g1
    # 4 pi l2^2 B^2 G2(2B) / (e^{2 beta B} - 1) written via the thermal weight
    b = math.pi * params.lambda2**2 * float(thermal_weight(scalars.form2, beta, 2 * bj, 1))
    c = math.exp(2 * beta * bj)
    (zp, xp, dp), (zm, xm, dm) = _site_eigensystem(a, b, c)

    def kappa(z: complex) -> float:
        if b == 0:
            return float("nan")
        return 1.0 / (1.0 + ((b * c - z.imag) ** 2 + (a - z.real) ** 2) / (b * b * c))

    printed = _printed_roots(a, b, c)
    dev = min(
        max(abs(printed[0] - zp), abs(printed[1] - zm)),
        max(abs(printed[1] - zp), abs(printed[0] - zm)),
    )
    if dev > 1e-12 * max(1.0, abs(zp), abs(zm)):
        log.debug("site %d: printed roots differ from the eigenvalues by %.3g", j, dev)
    return SiteCoefficients(
        site=j,
        a=a,
        b=b,
        c=c,
        z_plus=zp,
        z_minus=zm,
        xi_plus=xp,
        xi_minus=xm,
        xi_dual_plus=dp,
        xi_dual_minus=dm,
        kappa_plus=kappa(zp),
        kappa_minus=kappa(zm),
        printed_root_deviation=float(dev),
    )


@dataclass(frozen=True)
class RateCoefficients:
    x1: float
    y1: float
    x2: float
    y2: float
    y12: float
    y0: float

    def to_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in ("x1", "y1", "x2", "y2", "y12", "y0")}


def register_y0(params: RegisterParams, scalars: CouplingScalars) -> float:
    """``4 pi min_j B_j^2 G2(2B_j) coth(beta B_j)``."""
    return 4 * math.pi * min(scalars.site_rate(b) for b in params.b_fields)


def _require_closed_form(group: EnergyGroup, params: RegisterParams):
    if params.interacting:
        raise GenericityError("closed-form level shifts need a non-interacting register")
    return group_structure(group)


def _representative(group: EnergyGroup) -> tuple[np.ndarray, np.ndarray]:
    configs = all_configs(group.n_sites)
    return configs[group.sigma_idx[0]], configs[group.tau_idx[0]]


def rate_coefficients(
    group: EnergyGroup,
    params: RegisterParams,
    scalars: CouplingScalars,
) -> RateCoefficients:
    """Coefficients of the closed-form shift for one group.

    ``x1`` is evaluated on the first member and is a diagnostic only: its
    site sum varies across members and is carried by the blocks instead.
    ``y12`` includes the coupling constants; the others do not.
    """
    n0, mu, e0, _ = _require_closed_form(group, params)
    sigma, tau = _representative(group)
    equal = [m - 1 for m in mu]
    flipped = [j for j in range(params.n) if sigma[j] != tau[j]]

    y1 = math.pi * e0**2 * scalars.gamma_plus / (2 * params.beta)
    x1 = -e0 * scalars.pv_g1 * float(sum(sigma[j] for j in equal))
    x2 = -2.0 * sum(sigma[j] * scalars.x2_kernel(params.b_fields[j]) for j in flipped)
    y2 = 2 * math.pi * sum(scalars.site_rate(params.b_fields[j]) for j in flipped)
    y12 = 0.0
    for j in equal:
        sc = site_coefficients(j, params, scalars, e0)
        y12 += min(sc.z_plus.imag, sc.z_minus.imag)
    return RateCoefficients(
        x1=x1, y1=y1, x2=float(x2), y2=y2, y12=y12, y0=register_y0(params, scalars)
    )


@dataclass(frozen=True, eq=False)
class LevelShiftData:
    """Spectral data of one level shift operator.

    ``etas``/``etas_dual`` hold one vector per row, aligned with ``deltas``.
    ``q_projections`` are the spectral projections onto distinct eigenvalues
    ``q_deltas``; they coincide with the rank-one ``eta eta_dual^H`` when
    the spectrum is simple.
    """

    e_value: float
    matrix: np.ndarray
    deltas: np.ndarray
    etas: np.ndarray
    etas_dual: np.ndarray
    q_deltas: np.ndarray
    q_projections: tuple[np.ndarray, ...]
    branches: tuple[str, ...] = ()
    source: str = "closed"
    rates: RateCoefficients | None = None
    sites: tuple[SiteCoefficients, ...] = field(default=())

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def resonance_energies(self) -> np.ndarray:
        return self.e_value + self.deltas


def spectral_projections(
    deltas: np.ndarray, etas: np.ndarray, duals: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    """Group equal eigenvalues and sum their rank-one projections."""
    scale = max(1.0, float(np.max(np.abs(deltas)))) if deltas.size else 1.0
    tol = PROJECTION_REL * scale
    labels = -np.ones(deltas.size, dtype=int)
    reps = []
    for k, d in enumerate(deltas):
        for r, rep in enumerate(reps):
            if abs(d - rep) <= tol:
                labels[k] = r
                break
        else:
            labels[k] = len(reps)
            reps.append(d)
    projections = []
    for r in range(len(reps)):
        sel = labels == r
        projections.append(etas[sel].T @ duals[sel].conj())
    return np.array(reps, dtype=complex), tuple(projections)


def _closed_form_parts(group, params, scalars):
    n0, mu, e0, _ = _require_closed_form(group, params)
    rates = rate_coefficients(group, params, scalars)
    scalar = 1j * params.lambda1**2 * rates.y1 + params.lambda2**2 * (rates.x2 + 1j * rates.y2)
    sites = tuple(site_coefficients(m - 1, params, scalars, e0) for m in mu)
    return scalar, sites, rates


def group_deltas(
    group: EnergyGroup, params: RegisterParams, scalars: CouplingScalars
) -> np.ndarray:
    """All ``2^n0`` shifts of a group, in branch order, without building vectors."""
    scalar, sites, _ = _closed_form_parts(group, params, scalars)
    deltas = np.array([scalar], dtype=complex)
    for sc in sites:
        deltas = (deltas[:, None] + np.array([sc.z_plus, sc.z_minus])[None, :]).ravel()
    return deltas


def build_level_shift(
    group: EnergyGroup, params: RegisterParams, scalars: CouplingScalars
) -> LevelShiftData:
    """Assemble the closed-form level shift operator of a non-interacting group."""
    scalar, sites, rates = _closed_form_parts(group, params, scalars)
    n0 = len(sites)
    d = 2**n0
    matrix = scalar * np.eye(d, dtype=complex)
    for k, sc in enumerate(sites):
        matrix += np.kron(np.kron(np.eye(2**k), sc.matrix), np.eye(2 ** (n0 - k - 1)))

    deltas, etas, duals, labels = [], [], [], []
    for signs in itertools.product((1, -1), repeat=n0):
        delta = scalar
        eta = np.ones(1, dtype=complex)
        dual = np.ones(1, dtype=complex)
        for sc, s in zip(sites, signs):
            z, xi, xd = sc.branch(s)
            delta += z
            eta = np.kron(eta, xi)
            dual = np.kron(dual, xd)
        deltas.append(delta)
        etas.append(eta)
        duals.append(dual)
        labels.append("".join("+" if s > 0 else "-" for s in signs))
    deltas = np.array(deltas, dtype=complex)
    etas = np.array(etas)
    duals = np.array(duals)
    q_deltas, qs = spectral_projections(deltas, etas, duals)
    return LevelShiftData(
        e_value=group.e_value,
        matrix=matrix,
        deltas=deltas,
        etas=etas,
        etas_dual=duals,
        q_deltas=q_deltas,
        q_projections=qs,
        branches=tuple(labels),
        source="closed",
        rates=rates,
        sites=sites,
    )


@dataclass(frozen=True, eq=False)
class InteractingShift:
    """Shift of a simple resonance of an interacting register."""

    sigma: tuple[int, ...]
    tau: tuple[int, ...]
    e_value: float
    delta: complex
    x1: float
    y1: float
    x2: float
    y2: float
    v: np.ndarray
    v_prime: np.ndarray

    def level_shift(self) -> LevelShiftData:
        one = np.ones((1, 1), dtype=complex)
        deltas = np.array([self.delta])
        return LevelShiftData(
            e_value=self.e_value,
            matrix=self.delta * one,
            deltas=deltas,
            etas=one.copy(),
            etas_dual=one.copy(),
            q_deltas=deltas.copy(),
            q_projections=(one.copy(),),
            branches=("",),
            source="interacting",
        )


def flip_energies(params: RegisterParams, sigma: Sequence[int], tau: Sequence[int]):
    """Energy changes ``v_k`` (left flip) and ``v'_k`` (right flip) of each site.

    ``v_k = E(sigma^k) - E(sigma)`` is the energy cost of flipping site ``k``
    of ``sigma``; ``v'_k = E(tau) - E(tau^k)``. The diagonal ``J_kk`` is
    excluded since it does not change under a flip.
    """
    s = np.asarray(sigma, dtype=float)
    t = np.asarray(tau, dtype=float)
    sym = params.j_matrix + params.j_matrix.T
    np.fill_diagonal(sym, 0.0)
    b = params.b_fields
    v = -2 * s * (sym @ s + b)
    v_prime = 2 * t * (sym @ t + b)
    return v, v_prime


def interacting_shift(
    sigma: Sequence[int],
    tau: Sequence[int],
    params: RegisterParams,
    scalars: CouplingScalars,
    tol: float = 1e-12,
) -> InteractingShift:
    """Shift ``delta_e`` of the simple resonance attached to the pair ``(sigma, tau)``."""
    e = energy_diff(params, sigma, tau)
    if abs(e) <= tol * max(1.0, float(np.max(np.abs(params.b_fields), initial=0.0))):
        raise InvalidInputError("interacting_shift needs e != 0; use gamma0_interacting")
    s = np.asarray(sigma)
    t = np.asarray(tau)
    equal = s == t
    e0 = int((s - t).sum())
    y1 = math.pi * e0**2 * scalars.gamma_plus / (2 * params.beta)
    x1 = -e0 * scalars.pv_g1 * float(s[equal].sum())

    v, vp = flip_energies(params, sigma, tau)
    ff, beta = scalars.form2, params.beta
    y2 = 0.5 * math.pi * float(
        np.sum(thermal_weight(ff, beta, -v, -1) + thermal_weight(ff, beta, -vp, 1))
    )
    x2 = -0.5 * sum(
        scalars.exchange_kernel(vk, -1) + scalars.exchange_kernel(vpk, 1) for vk, vpk in zip(v, vp)
    )
    delta = params.lambda1**2 * (x1 + 1j * y1) + params.lambda2**2 * (x2 + 1j * y2)
    return InteractingShift(
        sigma=tuple(int(x) for x in sigma),
        tau=tuple(int(x) for x in tau),
        e_value=e,
        delta=complex(delta),
        x1=x1,
        y1=y1,
        x2=float(x2),
        y2=y2,
        v=v,
        v_prime=vp,
    )


def gamma0_interacting(params: RegisterParams, scalars: CouplingScalars) -> float:
    """Thermalisation rate of an interacting register from the ``C_{j,+-}`` formula.

    ``C_{j,+-} = sum_k (J_jk + J_kj) +- B_j`` with the sum over all ``k``.
    Terms with ``C = 0`` take their continuous limit.
    """
    sym_rows = (params.j_matrix + params.j_matrix.T).sum(axis=1)
    ff, beta = scalars.form2, params.beta
    terms = []
    for j in range(params.n):
        cp = sym_rows[j] + params.b_fields[j]
        cm = sym_rows[j] - params.b_fields[j]
        # C^2 G2(2|C|) / |1 - e^{-2 beta C}| equals a quarter of the weight at 2C
        terms.append(float(thermal_weight(ff, beta, 2 * cp, -1) + thermal_weight(ff, beta, 2 * cm, -1)))
    return math.pi * params.lambda2**2 * min(terms)


@dataclass(frozen=True, eq=False)
class GroupRate:
    e_value: float
    n0: int | None
    mu: tuple[int, ...] | None
    e0: int | None
    hamming: int | None
    deltas: np.ndarray
    gamma: float
    oscillatory: bool
    coefficients: RateCoefficients | None

    def to_dict(self) -> dict[str, Any]:
        out = {
            "e": self.e_value,
            "n0": self.n0,
            "mu": list(self.mu) if self.mu is not None else None,
            "e0": self.e0,
            "hamming": self.hamming,
            "deltas": [[float(d.real), float(d.imag)] for d in self.deltas],
            "gamma_e": self.gamma,
            "oscillatory": self.oscillatory,
        }
        if self.coefficients is not None:
            c = self.coefficients
            out["decomposition"] = {"y1": c.y1, "y2": c.y2, "y12": c.y12, "y0": c.y0}
            out["x1"] = c.x1
            out["x2"] = c.x2
        return out


@dataclass(frozen=True, eq=False)
class RateReport:
    groups: tuple[GroupRate, ...]
    y0: float | None
    gamma0_interacting: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "y0": self.y0,
            "gamma0_interacting": self.gamma0_interacting,
            "model_error": "resonance energies truncated at second order in the couplings",
            "groups": [g.to_dict() for g in self.groups],
        }


def decay_rate(e_value: float, deltas: np.ndarray) -> tuple[float, bool]:
    """Smallest imaginary part over nonzero ``e + delta`` and an oscillation flag."""
    eps = e_value + np.asarray(deltas, dtype=complex)
    nonzero = eps[np.abs(eps) > ZERO_REL * max(1.0, abs(e_value))]
    if nonzero.size == 0:
        return 0.0, True
    gamma = float(np.min(nonzero.imag))
    return gamma, bool(gamma <= OSCILLATORY_IM)


def decoherence_rates(
    table: SpectralTable,
    params: RegisterParams,
    scalars: CouplingScalars,
    shifts: Sequence[LevelShiftData] | None = None,
) -> RateReport:
    """Per-group decay rates from the leading-order resonance energies.

    Without ``shifts`` the closed forms are used, which requires a generic
    non-interacting register.
    """
    closed = not params.interacting and table.generic
    if shifts is None and not closed:
        raise GenericityError("pass precomputed shifts for interacting or non-generic registers")
    rows = []
    for k, group in enumerate(table.groups):
        deltas = shifts[k].deltas if shifts is not None else group_deltas(group, params, scalars)
        coeffs = rate_coefficients(group, params, scalars) if closed else None
        gamma, osc = decay_rate(group.e_value, deltas)
        rows.append(
            GroupRate(
                e_value=group.e_value,
                n0=group.n0,
                mu=group.mu,
                e0=group.e0,
                hamming=group.hamming,
                deltas=np.asarray(deltas),
                gamma=gamma,
                oscillatory=osc,
                coefficients=coeffs,
            )
        )
    return RateReport(
        groups=tuple(rows),
        y0=register_y0(params, scalars) if not params.interacting else None,
        gamma0_interacting=gamma0_interacting(params, scalars) if params.interacting else None,
    )


def member_label(sigma: Sequence[int], tau: Sequence[int]) -> str:
    return f"{spins_to_str(sigma)}|{spins_to_str(tau)}"
