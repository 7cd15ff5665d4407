"""Register energies, Liouvillian spectrum and its grouping into energy groups.

Spin configurations are tuples of ``+1``/``-1``. Configurations are
enumerated in lexicographic order with ``+`` before ``-`` and the first site
most significant, so that the members of a group sorted by index coincide
with the Kronecker ordering of the per-site factors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import (
    AmbiguousGroupingError,
    GenericityError,
    InvalidInputError,
    ResourceLimitError,
)
from .reservoir import FormFactor

SpinConfig = tuple[int, ...]
DEFAULT_MAX_N = 8


def spins_to_str(sigma: Sequence[int]) -> str:
    return "".join("+" if s > 0 else "-" for s in sigma)


def str_to_spins(text: str) -> SpinConfig:
    if not text or any(ch not in "+-" for ch in text):
        raise InvalidInputError(f"spin string must consist of '+' and '-': {text!r}")
    return tuple(1 if ch == "+" else -1 for ch in text)


def all_configs(n: int) -> np.ndarray:
    """All ``2^n`` configurations as an integer array, in canonical order."""
    return np.array(list(itertools.product((1, -1), repeat=n)), dtype=int).reshape(2**n, n)


def config_index(sigma: Sequence[int]) -> int:
    idx = 0
    for s in sigma:
        idx = 2 * idx + (0 if s > 0 else 1)
    return idx


@dataclass(frozen=True, eq=False)
class RegisterParams:
    """Parameters of the register and its two coupling channels."""

    j_matrix: np.ndarray
    b_fields: np.ndarray
    beta: float
    lambda1: float = 0.0
    lambda2: float = 0.0
    form1: FormFactor = field(default_factory=FormFactor)
    form2: FormFactor = field(default_factory=FormFactor)

    def __post_init__(self):
        b = np.array(self.b_fields, dtype=float).reshape(-1)
        n = b.size
        if n < 1:
            raise InvalidInputError("register needs at least one site")
        j = np.array(self.j_matrix, dtype=float)
        if j.shape != (n, n):
            raise InvalidInputError(f"j_matrix must have shape ({n}, {n}); got {j.shape}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(j))):
            raise InvalidInputError("fields and couplings must be finite")
        if np.any(b < 0):
            raise InvalidInputError("b_fields must be nonnegative")
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise InvalidInputError("beta must be positive")
        for name in ("lambda1", "lambda2"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        b.flags.writeable = False
        j.flags.writeable = False
        object.__setattr__(self, "b_fields", b)
        object.__setattr__(self, "j_matrix", j)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))

    @property
    def n(self) -> int:
        return self.b_fields.size

    @property
    def interacting(self) -> bool:
        """True when some pair coupling ``J_ij + J_ji`` with ``i != j`` is nonzero."""
        sym = self.j_matrix + self.j_matrix.T
        return bool(np.any(sym[~np.eye(self.n, dtype=bool)] != 0.0))

    def replace(self, **changes) -> "RegisterParams":
        data = {
            "j_matrix": self.j_matrix,
            "b_fields": self.b_fields,
            "beta": self.beta,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "form1": self.form1,
            "form2": self.form2,
        }
        data.update(changes)
        return RegisterParams(**data)


def _as_config(params: RegisterParams, sigma: Sequence[int]) -> np.ndarray:
    s = np.asarray(sigma)
    if s.shape != (params.n,):
        raise InvalidInputError(f"configuration must have length {params.n}")
    if not np.all(np.abs(s) == 1):
        raise InvalidInputError("configuration entries must be +1 or -1")
    return s.astype(float)


def energy(params: RegisterParams, sigma: Sequence[int]) -> float:
    """``sum_ij J_ij s_i s_j + sum_j B_j s_j`` over all ordered pairs."""
    s = _as_config(params, sigma)
    return float(s @ params.j_matrix @ s + params.b_fields @ s)


def energy_diff(params: RegisterParams, sigma: Sequence[int], tau: Sequence[int]) -> float:
    return energy(params, sigma) - energy(params, tau)


def config_energies(params: RegisterParams) -> tuple[np.ndarray, np.ndarray]:
    """Configurations and their energies, using the same formula as :func:`energy`."""
    configs = all_configs(params.n)
    energies = np.array([energy(params, c) for c in configs])
    return configs, energies


@dataclass(frozen=True, eq=False)
class EnergyGroup:
    """One eigenvalue cluster of the Liouvillian.

    ``sigma_idx``/``tau_idx`` hold configuration indices of the members,
    sorted lexicographically by ``(sigma, tau)``. The structural fields are
    ``None`` when the members do not share a single difference pattern.
    """

    e_value: float
    sigma_idx: np.ndarray
    tau_idx: np.ndarray
    n_sites: int
    n0: int | None
    mu: tuple[int, ...] | None
    e0: int | None
    hamming: int | None

    @property
    def size(self) -> int:
        return self.sigma_idx.size

    @property
    def pattern_consistent(self) -> bool:
        return self.n0 is not None

    @property
    def members(self) -> list[tuple[SpinConfig, SpinConfig]]:
        configs = all_configs(self.n_sites)
        return [
            (tuple(int(x) for x in configs[s]), tuple(int(x) for x in configs[t]))
            for s, t in zip(self.sigma_idx, self.tau_idx)
        ]

    def position(self, sigma_index: int, tau_index: int) -> int:
        hits = np.nonzero((self.sigma_idx == sigma_index) & (self.tau_idx == tau_index))[0]
        if hits.size != 1:
            raise InvalidInputError("pair is not a member of this group")
        return int(hits[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "e_value": self.e_value,
            "size": self.size,
            "n0": self.n0,
            "mu": list(self.mu) if self.mu is not None else None,
            "e0": self.e0,
            "hamming": self.hamming,
            "members": [f"{spins_to_str(s)}|{spins_to_str(t)}" for s, t in self.members],
        }


@dataclass(frozen=True, eq=False)
class SpectralTable:
    n: int
    groups: tuple[EnergyGroup, ...]
    gap: float
    generic: bool
    a1_margin: float
    tol: float
    warnings: tuple[str, ...]

    def group_index(self, e_value: float) -> int:
        values = np.array([g.e_value for g in self.groups])
        k = int(np.argmin(np.abs(values - e_value)))
        if abs(values[k] - e_value) > max(self.tol, 1e-12):
            raise InvalidInputError(f"no group with e = {e_value}")
        return k

    def zero_group(self) -> int:
        return self.group_index(0.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "gap": self.gap if np.isfinite(self.gap) else None,
            "generic": self.generic,
            "a1_margin": self.a1_margin if np.isfinite(self.a1_margin) else None,
            "tol": self.tol,
            "warnings": list(self.warnings),
            "groups": {repr(g.e_value): g.to_dict() for g in self.groups},
        }


def _pattern(configs: np.ndarray, s_idx: np.ndarray, t_idx: np.ndarray):
    """Structure of a group, or ``None`` entries if members disagree."""
    diff = configs[s_idx] - configs[t_idx]
    if not np.all(diff == diff[0]):
        return None, None, None, None
    d = diff[0]
    eq = np.nonzero(d == 0)[0]
    return int(eq.size), tuple(int(k) + 1 for k in eq), int(d.sum()), int(np.abs(d).sum())


def group_structure(group: EnergyGroup) -> tuple[int, tuple[int, ...], int, int]:
    """``(n0, mu, e0, hamming)`` of a pattern-consistent group (``mu`` is 1-based)."""
    if not group.pattern_consistent:
        raise GenericityError(
            f"members of the group e={group.e_value:.6g} do not share a difference pattern"
        )
    return group.n0, group.mu, group.e0, group.hamming


def _related_by_swaps(configs, s_idx, t_idx) -> bool:
    """True if every member differs from the first only at sites where sigma = tau."""
    s0, t0 = configs[s_idx[0]], configs[t_idx[0]]
    ds = configs[s_idx] - s0
    dt = configs[t_idx] - t0
    # the same sites must change in sigma and tau, and only sites with sigma_j = tau_j
    return bool(np.all(ds == dt) and np.all((ds == 0) | (s0 == t0)))


def build_spectral_table(
    params: RegisterParams,
    tol: float | None = None,
    c0: float = 1.0,
    max_n: int = DEFAULT_MAX_N,
) -> SpectralTable:
    """Group all ``4^N`` ordered pairs by their energy difference.

    Parameters
    ----------
    params : RegisterParams
    tol : float, optional
        Cluster radius; defaults to ``1e-9 * max(1, max |e|)``.
    c0 : float
        Constant in the gap-versus-coupling margin.
    max_n : int
        Hard cap on the register size.
    """
    n = params.n
    if n > max_n:
        raise ResourceLimitError(f"N={n} exceeds the enumeration cap of {max_n}")
    configs, energies = config_energies(params)
    dim = configs.shape[0]
    e = (energies[:, None] - energies[None, :]).ravel()
    s_all = np.repeat(np.arange(dim), dim)
    t_all = np.tile(np.arange(dim), dim)
    if tol is None:
        tol = 1e-9 * max(1.0, float(np.max(np.abs(e))))
    if not tol > 0:
        raise InvalidInputError("grouping tolerance must be positive")

    order = np.argsort(e, kind="stable")
    sorted_e = e[order]
    breaks = np.nonzero(np.diff(sorted_e) > tol)[0] + 1
    chunks = np.split(np.arange(e.size), breaks)

    groups = []
    for chunk in chunks:
        idx = np.sort(order[chunk])  # index order is (sigma, tau) lexicographic
        s_idx, t_idx = s_all[idx], t_all[idx]
        n0, mu, e0, ham = _pattern(configs, s_idx, t_idx)
        s_idx.flags.writeable = False
        t_idx.flags.writeable = False
        groups.append(
            EnergyGroup(
                e_value=float(np.mean(e[idx])),
                sigma_idx=s_idx,
                tau_idx=t_idx,
                n_sites=n,
                n0=n0,
                mu=mu,
                e0=e0,
                hamming=ham,
            )
        )

    values = np.array([g.e_value for g in groups])
    gap = float(np.min(np.diff(values))) if values.size > 1 else float("inf")
    if 2.0 * tol > gap:
        raise AmbiguousGroupingError(
            f"grouping tolerance {tol:.3g} exceeds half the smallest separation {gap:.3g}"
        )

    warnings = []
    if params.interacting:
        generic = all(
            _related_by_swaps(configs, g.sigma_idx, g.tau_idx)
            for g in groups
            if g.e_value != 0.0 and abs(g.e_value) > tol
        )
    else:
        generic = all(g.pattern_consistent for g in groups)
    if not generic:
        warnings.append("generic=false: some energy group mixes distinct flip patterns")
    if gap < 10.0 * tol:
        warnings.append(f"near-degenerate spectrum: gap {gap:.3g} is within 10x the tolerance")
    a1_margin = gap - (abs(params.lambda1) + abs(params.lambda2)) * n * c0
    if a1_margin < 0:
        warnings.append(f"coupling margin is negative ({a1_margin:.3g})")

    return SpectralTable(
        n=n,
        groups=tuple(groups),
        gap=gap,
        generic=generic,
        a1_margin=a1_margin,
        tol=float(tol),
        warnings=tuple(warnings),
    )
