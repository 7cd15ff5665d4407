"""Form factors, thermal weights and the reservoir scalar kernels.

Form factors belong to the Gaussian family

    g(k) = prefactor * |k|^p * exp(-|k|^2 / cutoff_scale^2) * h(Sigma),

with ``p = -1/2 + n``. The angular density is then

    G(u) = 4 pi |h|^2 prefactor^2 u^(2p) exp(-2 u^2 / s^2).

Every integrand used downstream is built from ``|u| G(|u|)``, which equals
``4 pi |h|^2 prefactor^2 u^(2n) exp(-2u^2/s^2)`` and is smooth and even, and
from the Bose factor ``u / (1 - exp(-beta u))``, which is smooth through 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InvalidInputError
from .quadrature import integrate, pv_integral

__all__ = [
    "FormFactor",
    "ThermalEnv",
    "CouplingScalars",
    "angular_density",
    "gamma_plus",
    "radial_weight",
    "bose_factor",
    "thermal_weight",
    "x2_density",
    "tail_cutoff",
    "coupling_scalars",
    "pv_integral",
]

READINGS = ("positive", "thermal")


@dataclass(frozen=True)
class FormFactor:
    """Member of the Gaussian form-factor family.

    Parameters
    ----------
    p : float
        Half-integer infrared exponent, one of -1/2, 1/2, 3/2, ...
    prefactor : float
        Overall amplitude (nonnegative).
    cutoff_scale : float
        Gaussian ultraviolet scale ``s``.
    phase : float
        Phase ``phi`` relating the angular profile to its conjugate.
    angular_profile : complex, optional
        Constant angular profile ``h``; must satisfy ``h = exp(i phi) conj(h)``.
        Defaults to ``exp(i phi / 2)``, the unit-modulus solution.
    """

    p: float = -0.5
    prefactor: float = 1.0
    cutoff_scale: float = 1.0
    phase: float = 0.0
    angular_profile: complex | None = None

    def __post_init__(self):
        if self.angular_profile is None and np.isfinite(self.phase):
            object.__setattr__(self, "angular_profile", complex(np.exp(0.5j * self.phase)))
        n = self.p + 0.5
        if not np.isfinite(self.p) or abs(n - round(n)) > 1e-12 or round(n) < 0:
            raise InvalidInputError(f"p must be one of -1/2, 1/2, 3/2, ...; got {self.p}")
        if not np.isfinite(self.prefactor) or self.prefactor < 0:
            raise InvalidInputError("prefactor must be a finite nonnegative number")
        if not np.isfinite(self.cutoff_scale) or self.cutoff_scale <= 0:
            raise InvalidInputError("cutoff_scale must be positive")
        if not np.isfinite(self.phase):
            raise InvalidInputError("phase must be finite")
        h = complex(self.angular_profile)
        if abs(h - np.exp(1j * self.phase) * h.conjugate()) > 1e-12 * max(1.0, abs(h)):
            raise InvalidInputError(
                "angular profile h must satisfy h = exp(i*phase) * conj(h)"
            )

    @property
    def order(self) -> int:
        """Integer ``n`` with ``p = n - 1/2``."""
        return int(round(self.p + 0.5))

    @property
    def amplitude(self) -> float:
        """``4 pi |h|^2 prefactor^2``, the angular integral of ``|g|^2 / |k|^(2p) e^...``."""
        return 4.0 * math.pi * abs(complex(self.angular_profile)) ** 2 * self.prefactor**2

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "prefactor": self.prefactor,
            "cutoff_scale": self.cutoff_scale,
            "phase": self.phase,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FormFactor":
        return cls(
            p=float(data.get("p", -0.5)),
            prefactor=float(data.get("prefactor", 1.0)),
            cutoff_scale=float(data.get("cutoff_scale", 1.0)),
            phase=float(data.get("phase", 0.0)),
        )


@dataclass(frozen=True)
class ThermalEnv:
    beta: float

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise InvalidInputError("beta must be a positive finite number")


def angular_density(ff: FormFactor, u):
    """Angular density ``G(u)`` for ``u >= 0`` (``inf`` at 0 when p = -1/2)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise InvalidInputError("angular_density requires u >= 0")
    with np.errstate(divide="ignore"):
        out = ff.amplitude * u ** (2.0 * ff.p) * np.exp(-2.0 * u**2 / ff.cutoff_scale**2)
    return out if out.ndim else float(out)


def gamma_plus(ff: FormFactor) -> float:
    """Infrared constant ``lim_{u->0+} u G(u)``."""
    return ff.amplitude if ff.order == 0 else 0.0


def radial_weight(ff: FormFactor, u):
    """``|u| G(|u|)`` for any real ``u``; smooth and even."""
    u = np.asarray(u, dtype=float)
    return ff.amplitude * u ** (2 * ff.order) * np.exp(-2.0 * u**2 / ff.cutoff_scale**2)


def bose_factor(u, beta: float):
    """``u / (1 - exp(-beta u))`` with the value ``1/beta`` at ``u = 0``."""
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        den = -np.expm1(-beta * u)
        out = np.where(u == 0.0, 1.0 / beta, u / np.where(u == 0.0, 1.0, den))
    # overflow of exp(-beta u) for very negative u sends the ratio to +0
    return np.where(np.isfinite(out), out, 0.0)


def thermal_weight(ff: FormFactor, beta: float, u, sign: int):
    """``u^2 G(|u|) / |1 - exp(sign * beta * u)|`` for ``sign`` in {-1, +1}.

    ``sign = -1`` is the weight attached to flips on the left tensor factor
    and ``sign = +1`` the one attached to flips on the right factor. Their
    sum is ``u^2 G(|u|) coth(beta |u| / 2)``.
    """
    if sign not in (-1, 1):
        raise InvalidInputError("sign must be -1 or +1")
    u = np.asarray(u, dtype=float)
    return radial_weight(ff, u) * bose_factor(-sign * u, beta)


def x2_density(ff: FormFactor, beta: float, u):
    """``u^2 G(2|u|) coth(beta |u|)``, continuous at 0 with value ``R(0)/(2 beta)``."""
    u2 = 2.0 * np.asarray(u, dtype=float)
    return 0.25 * (thermal_weight(ff, beta, u2, -1) + thermal_weight(ff, beta, u2, 1))


def tail_cutoff(ff: FormFactor, beta: float, tol: float, scale: float = 1.0) -> float:
    """Half-width ``U`` beyond which thermal integrands are below ``tol / 10``.

    ``scale`` is the factor multiplying ``u`` inside the density (2 for the
    x2 kernel), so the returned bound refers to the integration variable.
    """
    s = ff.cutoff_scale / scale
    amp = max(ff.amplitude, 1e-300)
    n = ff.order
    target = 0.1 * tol / max(1.0, 1.0 / beta)
    u = s
    while amp * (scale * u + 1.0) ** (2 * n + 2) * math.exp(-2.0 * u * u / s**2) * s > target:
        u *= 1.05
    return u


class CouplingScalars:
    """Reusable scalar kernels for one pair of form factors at fixed ``beta``.

    Attributes
    ----------
    pv_g1 : float
        The principal-value inner product of ``g1`` with ``1/omega``.
    gamma_plus : float
        Infrared constant of ``g1``.

    Notes
    -----
    Kernels are memoised by pole; the memo only affects speed.
    """

    def __init__(
        self,
        form1: FormFactor,
        form2: FormFactor,
        beta: float,
        tol: float = 1e-10,
        reading: str = "positive",
    ):
        ThermalEnv(beta)
        if reading not in READINGS:
            raise InvalidInputError(f"reading must be one of {READINGS}")
        self.form1 = form1
        self.form2 = form2
        self.beta = float(beta)
        self.tol = float(tol)
        self.reading = reading
        self.gamma_plus = gamma_plus(form1)
        self.pv_g1 = self._pv_g1()
        self._x2_cache: dict[float, float] = {}
        self._exchange_cache: dict[tuple[float, int], float] = {}

    def _pv_g1(self) -> float:
        ff = self.form1
        if ff.amplitude == 0.0:
            return 0.0
        n = ff.order
        if self.reading == "positive":
            # int_0^inf u^(2n) exp(-2u^2/s^2) du in closed form
            a = 2.0 / ff.cutoff_scale**2
            return ff.amplitude * math.gamma(n + 0.5) / (2.0 * a ** (n + 0.5))
        if n == 0:
            raise InvalidInputError(
                "thermal reading of the g1 principal value diverges for p = -1/2"
            )
        beta = self.beta
        big_u = tail_cutoff(ff, beta, self.tol)

        def integrand(u):
            core = ff.amplitude * u ** (2 * n - 2) * np.exp(-2.0 * u**2 / ff.cutoff_scale**2)
            return core * bose_factor(u, beta)

        value, _ = integrate(integrand, -big_u, big_u, self.tol, breakpoints=(0.0,))
        return value

    def x2_kernel(self, pole: float) -> float:
        """``PV int u^2 G2(2|u|) coth(beta|u|) / (u - pole) du``."""
        pole = float(pole)
        if pole not in self._x2_cache:
            ff, beta = self.form2, self.beta
            if ff.amplitude == 0.0:
                self._x2_cache[pole] = 0.0
            else:
                big_u = max(tail_cutoff(ff, beta, self.tol, scale=2.0), abs(pole) + ff.cutoff_scale)
                self._x2_cache[pole] = pv_integral(
                    lambda u: x2_density(ff, beta, u), pole, (-big_u, big_u), self.tol
                )
        return self._x2_cache[pole]

    def exchange_kernel(self, v: float, sign: int) -> float:
        """``PV int u^2 G2(|u|) / |1 - exp(sign beta u)| / (u + v) du``."""
        key = (float(v), int(sign))
        if key not in self._exchange_cache:
            ff, beta = self.form2, self.beta
            if ff.amplitude == 0.0:
                self._exchange_cache[key] = 0.0
            else:
                pole = -float(v)
                big_u = max(tail_cutoff(ff, beta, self.tol), abs(pole) + ff.cutoff_scale)
                self._exchange_cache[key] = pv_integral(
                    lambda u: thermal_weight(ff, beta, u, sign), pole, (-big_u, big_u), self.tol
                )
        return self._exchange_cache[key]

    def site_rate(self, b_field: float) -> float:
        """``B^2 G2(2B) coth(beta B)``, the per-site exchange density."""
        return float(x2_density(self.form2, self.beta, b_field))


def coupling_scalars(
    ff1: FormFactor,
    ff2: FormFactor,
    env: ThermalEnv,
    params=None,
    tol: float = 1e-10,
    reading: str = "positive",
) -> CouplingScalars:
    """Build the reusable kernels for ``ff1``/``ff2`` at inverse temperature ``env.beta``.

    ``params`` is accepted for interface symmetry and is not needed: the
    kernels depend on the reservoir only, poles are supplied at call time.
    """
    return CouplingScalars(ff1, ff2, env.beta, tol=tol, reading=reading)
