"""Leading-order reduced dynamics, ergodic means and N-scaling sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import (
    GenericityError,
    IncompleteModelError,
    InvalidInputError,
)
from .oracle import OracleKernels, level_shift_from_matrix, numeric_matrix
from .register import (
    RegisterParams,
    SpectralTable,
    all_configs,
    build_spectral_table,
    config_energies,
)
from .reservoir import CouplingScalars
from .resonance import (
    LevelShiftData,
    ZERO_REL,
    build_level_shift,
    decay_rate,
    group_deltas,
    interacting_shift,
    register_y0,
)


@dataclass(frozen=True, eq=False)
class ReducedState:
    """Validated register density matrix, indexed by configuration index."""

    elements: np.ndarray

    def __post_init__(self):
        rho = np.array(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidInputError("density matrix must be square")
        dim = rho.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise InvalidInputError("density matrix dimension must be a power of two")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise InvalidInputError("density matrix must be Hermitian")
        if abs(np.trace(rho) - 1.0) > 1e-12:
            raise InvalidInputError("density matrix must have unit trace")
        if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -1e-10:
            raise InvalidInputError("density matrix must be positive semidefinite")
        rho.flags.writeable = False
        object.__setattr__(self, "elements", rho)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def n(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def product_plus(cls, n: int) -> "ReducedState":
        """All sites in ``(|+> + |->)/sqrt 2``; every element equals ``2^-n``."""
        dim = 2**n
        return cls(np.full((dim, dim), 1.0 / dim, dtype=complex))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, rank: int | None = None) -> "ReducedState":
        dim = 2**n
        rank = dim if rank is None else rank
        g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
        rho = g @ g.conj().T
        rho = 0.5 * (rho + rho.conj().T)
        return cls(rho / np.trace(rho).real)


@dataclass(frozen=True, eq=False)
class ResonanceModel:
    """Level shift data for every group of a spectral table, in table order."""

    table: SpectralTable
    shifts: tuple[LevelShiftData, ...]

    def __post_init__(self):
        if len(self.shifts) != len(self.table.groups):
            raise IncompleteModelError(
                f"{len(self.shifts)} level shifts supplied for {len(self.table.groups)} groups"
            )
        for g, s in zip(self.table.groups, self.shifts):
            if s.dim != g.size:
                raise IncompleteModelError(f"level shift for e={g.e_value:.6g} has wrong dimension")


def resonance_model(
    table: SpectralTable,
    params: RegisterParams,
    scalars: CouplingScalars,
    kernels: OracleKernels | None = None,
    quad_tol: float = 1e-10,
) -> ResonanceModel:
    """Level shifts for all groups.

    Pattern-consistent groups of a non-interacting register use the closed
    forms, simple resonances of an interacting register use the diagonal
    interacting shift, and anything else uses the quadrature-built matrix
    with a dense eigendecomposition.
    """
    shifts = []
    for group in table.groups:
        shift = None
        if not params.interacting:
            try:
                shift = build_level_shift(group, params, scalars)
            except (GenericityError, InvalidInputError):
                shift = None
        elif group.size == 1 and abs(group.e_value) > table.tol:
            configs = all_configs(params.n)
            sigma = configs[group.sigma_idx[0]]
            tau = configs[group.tau_idx[0]]
            shift = interacting_shift(sigma, tau, params, scalars).level_shift()
        if shift is None:
            if kernels is None:
                kernels = OracleKernels(params.form1, params.form2, params.beta, quad_tol)
            shift = level_shift_from_matrix(group.e_value, numeric_matrix(group, params, kernels))
        shifts.append(shift)
    return ResonanceModel(table=table, shifts=tuple(shifts))


@dataclass(frozen=True, eq=False)
class WeightTable:
    """Weights ``w[r, i, i']`` coupling initial element ``i'`` to element ``i``.

    ``elements[i]`` is the matrix-element index pair ``(sigma, tau)``; the
    group member carrying it is ``(tau, sigma)``.
    """

    e_value: float
    elements: tuple[tuple[int, int], ...]
    resonances: np.ndarray
    weights: np.ndarray


def resonance_weights(group, shift: LevelShiftData) -> WeightTable:
    if shift.dim != group.size:
        raise IncompleteModelError("level shift does not match the group")
    elements = tuple((int(t), int(s)) for s, t in zip(group.sigma_idx, group.tau_idx))
    weights = shift.etas_dual.conj()[:, :, None] * shift.etas[:, None, :]
    return WeightTable(
        e_value=group.e_value,
        elements=elements,
        resonances=group.e_value + shift.deltas,
        weights=weights,
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    ergodic_mean: np.ndarray
    hermiticity_dev: np.ndarray
    trace_dev: np.ndarray

    def element(self, sigma: int, tau: int) -> np.ndarray:
        return self.values[:, sigma, tau]


def _check_model(rho0: ReducedState, table: SpectralTable, model: ResonanceModel):
    if model is None or len(model.shifts) != len(table.groups):
        raise IncompleteModelError("resonance data missing for some groups")
    if rho0.dim != 2**table.n:
        raise InvalidInputError("state dimension does not match the register")


def _zero_branches(e_value: float, deltas: np.ndarray) -> np.ndarray:
    eps = e_value + deltas
    return np.abs(eps) <= ZERO_REL * max(1.0, abs(e_value))


def propagate_effective(
    rho0: ReducedState,
    table: SpectralTable,
    model: ResonanceModel,
    times: Sequence[float],
) -> Trajectory:
    """Assemble ``rho_t`` from the resonance expansion at the given times."""
    _check_model(rho0, table, model)
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size == 0:
        raise InvalidInputError("time grid is empty")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise InvalidInputError("times must be finite and nonnegative")
    if np.any(np.diff(t) < 0):
        raise InvalidInputError("times must be nondecreasing")

    rho = rho0.elements
    dim = rho0.dim
    values = np.zeros((t.size, dim, dim), dtype=complex)
    mean = np.zeros((dim, dim), dtype=complex)
    for group, shift in zip(table.groups, model.shifts):
        rows, cols = group.tau_idx, group.sigma_idx
        coef = shift.etas @ rho[rows, cols]
        eps = group.e_value + shift.deltas
        phases = np.exp(1j * np.outer(t, eps))
        values[:, rows, cols] = (phases * coef) @ shift.etas_dual.conj()
        zero = _zero_branches(group.e_value, shift.deltas)
        if zero.any():
            mean[rows, cols] = coef[zero] @ shift.etas_dual[zero].conj()

    herm = np.max(np.abs(values - values.conj().transpose(0, 2, 1)), axis=(1, 2))
    trace = np.abs(np.trace(values, axis1=1, axis2=2) - 1.0)
    return Trajectory(times=t, values=values, ergodic_mean=mean, hermiticity_dev=herm, trace_dev=trace)


def ergodic_mean(rho0: ReducedState, table: SpectralTable, model: ResonanceModel) -> np.ndarray:
    """Contribution of the ``epsilon = 0`` branches, the long-time average of ``rho_t``."""
    _check_model(rho0, table, model)
    rho = rho0.elements
    mean = np.zeros_like(rho)
    for group, shift in zip(table.groups, model.shifts):
        zero = _zero_branches(group.e_value, shift.deltas)
        if zero.any():
            rows, cols = group.tau_idx, group.sigma_idx
            coef = shift.etas[zero] @ rho[rows, cols]
            mean[rows, cols] = coef @ shift.etas_dual[zero].conj()
    return mean


def free_evolution(rho0: ReducedState, params: RegisterParams, times: Sequence[float]) -> np.ndarray:
    """``rho_t[s, t] = exp(i t (E(t) - E(s))) rho_0[s, t]`` for the uncoupled register."""
    _, energies = config_energies(params)
    phase = energies[None, :] - energies[:, None]
    t = np.asarray(times, dtype=float)
    return np.exp(1j * t[:, None, None] * phase[None]) * rho0.elements[None]


def default_time_grid(rates: Sequence[float], gap: float, num: int = 200) -> np.ndarray:
    """``0`` followed by log-spaced times from ``0.01/gamma_max`` to ``10/gamma_min``."""
    positive = np.array([r for r in rates if r > 0])
    if positive.size:
        lo, hi = 0.01 / positive.max(), 10.0 / positive.min()
    else:
        scale = gap if np.isfinite(gap) and gap > 0 else 1.0
        lo, hi = 0.01 / scale, 100.0 / scale
    if hi <= lo:
        hi = 10 * lo
    return np.concatenate([[0.0], np.geomspace(lo, hi, num - 1)])


# ---------------------------------------------------------------------------
# scaling with register size


@dataclass(frozen=True)
class FieldSampler:
    """I.i.d. uniform fields on ``[low, high]`` from a seeded generator."""

    low: float = 0.5
    high: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.low <= self.high:
            raise InvalidInputError("sampler needs 0 <= low <= high")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _max_rate(table: SpectralTable, params: RegisterParams, scalars: CouplingScalars) -> float:
    best = 0.0
    for group in table.groups:
        if abs(group.e_value) <= table.tol:
            continue
        gamma, _ = decay_rate(group.e_value, group_deltas(group, params, scalars))
        best = max(best, gamma)
    return best


def _zero_rate(table: SpectralTable, params: RegisterParams, scalars: CouplingScalars) -> float:
    group = table.groups[table.zero_group()]
    return decay_rate(0.0, group_deltas(group, params, scalars))[0]


def _slope(ns: np.ndarray, rates: np.ndarray) -> float | None:
    if ns.size < 2 or np.any(rates <= 0):
        return None
    return float(np.polyfit(np.log(ns), np.log(rates), 1)[0])


@dataclass(frozen=True)
class ScalingReport:
    n_values: tuple[int, ...]
    dephasing_max_rate: tuple[float, ...]
    dephasing_law: tuple[float, ...]
    exchange_max_rate: tuple[float, ...]
    exchange_bound: tuple[float, ...]
    zero_rate: tuple[float, ...]
    dephasing_slope: float | None
    exchange_slope: float | None
    zero_rate_spread: float
    instances: int
    seed: int

    def to_dict(self) -> dict[str, Any]:
        rows = []
        for k, n in enumerate(self.n_values):
            rows.append(
                {
                    "n": n,
                    "dephasing_max_rate": self.dephasing_max_rate[k],
                    "dephasing_law": self.dephasing_law[k],
                    "exchange_max_rate": self.exchange_max_rate[k],
                    "exchange_bound": self.exchange_bound[k],
                    "zero_rate": self.zero_rate[k],
                }
            )
        return {
            "per_n": rows,
            "dephasing_slope": self.dephasing_slope,
            "exchange_slope": self.exchange_slope,
            "zero_rate_relative_spread": self.zero_rate_spread,
            "instances": self.instances,
            "seed": self.seed,
        }


def scaling_sweep(
    base: RegisterParams,
    n_range: Sequence[int],
    sampler: FieldSampler,
    instances: int = 1,
    quad_tol: float = 1e-10,
) -> ScalingReport:
    """Largest decay rates versus register size for each coupling channel.

    For every ``N`` the fields are drawn ``instances`` times and the rates
    averaged. The dephasing channel uses ``lambda2 = 0``, the exchange
    channel ``lambda1 = 0``; the thermalisation rate uses both couplings.
    """
    ns = [int(n) for n in n_range]
    if not ns:
        raise InvalidInputError("n_range is empty")
    if any(n < 1 for n in ns):
        raise InvalidInputError("register sizes must be positive")
    if instances < 1:
        raise InvalidInputError("instances must be positive")
    scalars = CouplingScalars(base.form1, base.form2, base.beta, tol=quad_tol)
    rng = sampler.generator()
    deph, law, exch, bound, zero = [], [], [], [], []
    for n in ns:
        d_acc = e_acc = b_acc = z_acc = 0.0
        for _ in range(instances):
            b = rng.uniform(sampler.low, sampler.high, n)
            params = base.replace(j_matrix=np.zeros((n, n)), b_fields=b)
            table = build_spectral_table(params)
            d_acc += _max_rate(table, params.replace(lambda2=0.0), scalars)
            e_acc += _max_rate(table, params.replace(lambda1=0.0), scalars)
            b_acc += params.lambda2**2 * n * max(2 * np.pi * scalars.site_rate(x) for x in b)
            z_acc += _zero_rate(table, params, scalars)
        deph.append(d_acc / instances)
        exch.append(e_acc / instances)
        bound.append(b_acc / instances)
        zero.append(z_acc / instances)
        law.append(base.lambda1**2 * np.pi * scalars.gamma_plus * (2 * n) ** 2 / (2 * base.beta))
    ns_arr = np.array(ns, dtype=float)
    zero_arr = np.array(zero)
    spread = float(np.ptp(zero_arr) / zero_arr.mean()) if zero_arr.mean() > 0 else 0.0
    return ScalingReport(
        n_values=tuple(ns),
        dephasing_max_rate=tuple(float(x) for x in deph),
        dephasing_law=tuple(float(x) for x in law),
        exchange_max_rate=tuple(float(x) for x in exch),
        exchange_bound=tuple(float(x) for x in bound),
        zero_rate=tuple(float(x) for x in zero),
        dephasing_slope=_slope(ns_arr, np.array(deph)),
        exchange_slope=_slope(ns_arr, np.array(exch)),
        zero_rate_spread=spread,
        instances=instances,
        seed=sampler.seed,
    )


@dataclass(frozen=True)
class HammingRegression:
    distances: tuple[int, ...]
    mean_y2: tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "distances": list(self.distances),
            "mean_y2": list(self.mean_y2),
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
        }


def hamming_regression(
    base: RegisterParams,
    n: int,
    sampler: FieldSampler,
    instances: int = 50,
) -> HammingRegression:
    """Regress ``y2`` averaged over groups and field samples on the Hamming distance."""
    if instances < 1:
        raise InvalidInputError("instances must be positive")
    scalars = CouplingScalars(base.form1, base.form2, base.beta)
    rng = sampler.generator()
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for _ in range(instances):
        b = rng.uniform(sampler.low, sampler.high, n)
        params = base.replace(j_matrix=np.zeros((n, n)), b_fields=b, lambda1=0.0)
        table = build_spectral_table(params)
        site = np.array([scalars.site_rate(x) for x in b])
        configs = all_configs(n)
        for group in table.groups:
            if abs(group.e_value) <= table.tol:
                continue
            flipped = configs[group.sigma_idx[0]] != configs[group.tau_idx[0]]
            y2 = 2 * np.pi * site[flipped].sum()
            sums[group.hamming] = sums.get(group.hamming, 0.0) + y2
            counts[group.hamming] = counts.get(group.hamming, 0) + 1
    distances = np.array(sorted(sums), dtype=float)
    means = np.array([sums[int(d)] / counts[int(d)] for d in distances])
    if distances.size < 2:
        raise InvalidInputError("need at least two Hamming distances to regress")
    slope, intercept = np.polyfit(distances, means, 1)
    fitted = slope * distances + intercept
    ss_res = float(np.sum((means - fitted) ** 2))
    ss_tot = float(np.sum((means - means.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return HammingRegression(
        distances=tuple(int(d) for d in distances),
        mean_y2=tuple(float(m) for m in means),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
    )


def thermalization_rate(params: RegisterParams, scalars: CouplingScalars) -> float:
    """``lambda2^2 y0`` for a non-interacting register."""
    return params.lambda2**2 * register_y0(params, scalars)
