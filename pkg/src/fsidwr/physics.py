"""Pointwise weak-form integrands of the stationary monolithic ALE FSI system.

Every integrand returns a *flux*: the 15 coefficients multiplying the test
jet ``(psi^v, grad psi^v, psi^u, grad psi^u, psi^p, grad psi^p)``. The
linearizations below are hand-derived directional derivatives; the tangent
``C[..., i, k] = d flux_i / d jet_k`` is assembled column by column.

Notation: ``G = grad v``, ``H = grad u``, ``F = I + H``, ``J = det F``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem.values import N_JET


class InvalidStateError(FloatingPointError):
    """The ALE map folds (det F <= 0) somewhere."""


@dataclass(frozen=True)
class FsiParameters:
    rho_f: float = 1.0e3
    nu_f: float = 1.0e-3
    rho_s: float = 1.0e3
    mu_s: float = 0.5e6
    lambda_s: float = 2.0e6
    alpha_u: float = 1.0
    alpha_p: float = 1.0e-8
    f_f: tuple = (0.0, 0.0)
    f_s: tuple = (0.0, 0.0)

    def __post_init__(self):
        if min(self.rho_f, self.nu_f, self.rho_s, self.mu_s) <= 0.0:
            raise ValueError("densities, viscosity and mu_s must be positive")
        if self.lambda_s < 0.0 or self.alpha_u <= 0.0 or self.alpha_p <= 0.0:
            raise ValueError("need lambda_s >= 0 and alpha_u, alpha_p > 0")


def _mat(x):
    return x.reshape(x.shape[:-1] + (2, 2))


def _mv(A, v):
    return np.einsum("...ij,...j->...i", A, v)


def _tr(A):
    return A[..., 0, 0] + A[..., 1, 1]


def _T(A):
    return np.swapaxes(A, -1, -2)


_I = np.eye(2)


class Kinematics:
    """F, J, F^{-1} and the state fields at a batch of points."""

    def __init__(self, jet, check=True):
        self.v = jet[..., 0:2]
        self.G = _mat(jet[..., 2:6])
        self.u = jet[..., 6:8]
        self.H = _mat(jet[..., 8:12])
        self.p = jet[..., 12]
        self.gp = jet[..., 13:15]
        F = self.F = _I + self.H
        J = self.J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        if check and np.any(J <= 0.0):
            raise InvalidStateError("det F <= 0")
        Fi = np.empty_like(F)
        Fi[..., 0, 0] = F[..., 1, 1] / J
        Fi[..., 1, 1] = F[..., 0, 0] / J
        Fi[..., 0, 1] = -F[..., 0, 1] / J
        Fi[..., 1, 0] = -F[..., 1, 0] / J
        self.Fi = Fi
        self.FiT = _T(Fi)

    def fluid_stress(self, prm):
        """Cauchy stress -p I + rho nu (G F^{-1} + F^{-T} G^T)."""
        D = self.G @ self.Fi
        return -self.p[..., None, None] * _I + prm.rho_f * prm.nu_f * (D + _T(D))

    def green_strain(self):
        return 0.5 * (_T(self.F) @ self.F - _I)

    def piola2(self, prm):
        E = self.green_strain()
        return 2.0 * prm.mu_s * E + prm.lambda_s * _tr(E)[..., None, None] * _I


class _Dir:
    """Unit direction in jet space, plus derived increments."""

    def __init__(self, k, kin):
        self.k = k
        self.dv = np.zeros(2)
        self.dG = np.zeros((2, 2))
        self.du = np.zeros(2)
        self.dH = np.zeros((2, 2))
        self.dp = 0.0
        self.dgp = np.zeros(2)
        if k < 2:
            self.dv[k] = 1.0
        elif k < 6:
            self.dG.flat[k - 2] = 1.0
        elif k < 8:
            self.du[k - 6] = 1.0
        elif k < 12:
            self.dH.flat[k - 8] = 1.0
        elif k == 12:
            self.dp = 1.0
        else:
            self.dgp[k - 13] = 1.0
        self.has_dH = k >= 8 and k < 12
        if self.has_dH:
            self.dFi = -kin.Fi @ self.dH @ kin.Fi
            self.dJ = kin.J * _tr(kin.Fi @ self.dH)


# -- fluid ---------------------------------------------------------------------

def fluid_flux(jet, prm, kin=None):
    kin = kin or Kinematics(jet)
    out = np.zeros(jet.shape[:-1] + (N_JET,))
    J = kin.J[..., None]
    GFi = kin.G @ kin.Fi
    out[..., 0:2] = prm.rho_f * J * _mv(GFi, kin.v) - prm.rho_f * J * np.asarray(prm.f_f)
    sig = kin.fluid_stress(prm)
    out[..., 2:6] = (kin.J[..., None, None] * sig @ kin.FiT).reshape(out.shape[:-1] + (4,))
    out[..., 8:12] = prm.alpha_u * jet[..., 8:12]
    out[..., 12] = kin.J * _tr(GFi)
    return out


def _fluid_dflux(d, kin, prm, shape):
    out = np.zeros(shape + (N_JET,))
    J = kin.J
    rho, mu = prm.rho_f, prm.rho_f * prm.nu_f
    Fi, G, v = kin.Fi, kin.G, kin.v
    GFi = G @ Fi
    sig = kin.fluid_stress(prm)
    if d.k < 2:
        out[..., 0:2] = rho * J[..., None] * _mv(GFi, np.broadcast_to(d.dv, v.shape))
    elif d.k < 6:
        dGFi = d.dG @ Fi
        out[..., 0:2] = rho * J[..., None] * _mv(dGFi, v)
        dsig = mu * (dGFi + _T(dGFi))
        out[..., 2:6] = (J[..., None, None] * dsig @ kin.FiT).reshape(shape + (4,))
        out[..., 12] = J * _tr(dGFi)
    elif d.k < 8:
        pass
    elif d.k < 12:
        dJ, dFi = d.dJ, d.dFi
        GdFi = G @ dFi
        out[..., 0:2] = rho * (dJ[..., None] * _mv(GFi, v) + J[..., None] * _mv(GdFi, v))
        out[..., 0:2] -= rho * dJ[..., None] * np.asarray(prm.f_f)
        dsig = mu * (GdFi + _T(GdFi))
        dP = (dJ[..., None, None] * sig @ kin.FiT + J[..., None, None] * dsig @ kin.FiT
              + J[..., None, None] * sig @ _T(dFi))
        out[..., 2:6] = dP.reshape(shape + (4,))
        out[..., 8 + (d.k - 8)] = prm.alpha_u
        out[..., 12] = dJ * _tr(GFi) + J * _tr(GdFi)
    elif d.k == 12:
        out[..., 2:6] = (-J[..., None, None] * kin.FiT).reshape(shape + (4,))
    return out


def fluid_tangent(jet, prm, kin=None):
    kin = kin or Kinematics(jet)
    shape = jet.shape[:-1]
    C = np.zeros(shape + (N_JET, N_JET))
    for k in range(N_JET):
        C[..., :, k] = _fluid_dflux(_Dir(k, kin), kin, prm, shape)
    return C


# -- solid ---------------------------------------------------------------------

def solid_flux(jet, prm, kin=None):
    kin = kin or Kinematics(jet)
    out = np.zeros(jet.shape[:-1] + (N_JET,))
    out[..., 0:2] = -prm.rho_s * np.asarray(prm.f_s)
    out[..., 2:6] = (kin.F @ kin.piola2(prm)).reshape(out.shape[:-1] + (4,))
    out[..., 6:8] = kin.v
    out[..., 12] = prm.alpha_p * kin.p
    out[..., 13:15] = prm.alpha_p * kin.gp
    return out


def _solid_dflux(d, kin, prm, shape):
    out = np.zeros(shape + (N_JET,))
    if d.k < 2:
        out[..., 6 + d.k] = 1.0
    elif d.has_dH:
        F = kin.F
        dE = 0.5 * (_T(d.dH) @ F + _T(F) @ d.dH)
        dS = 2.0 * prm.mu_s * dE + prm.lambda_s * _tr(dE)[..., None, None] * _I
        dP = d.dH @ kin.piola2(prm) + F @ dS
        out[..., 2:6] = dP.reshape(shape + (4,))
    elif d.k == 12:
        out[..., 12] = prm.alpha_p
    elif d.k >= 13:
        out[..., d.k] = prm.alpha_p
    return out


def solid_tangent(jet, prm, kin=None):
    kin = kin or Kinematics(jet)
    shape = jet.shape[:-1]
    C = np.zeros(shape + (N_JET, N_JET))
    for k in range(N_JET):
        C[..., :, k] = _solid_dflux(_Dir(k, kin), kin, prm, shape)
    return C


def strain_energy_density(jet, prm):
    """mu tr(E^2) + lambda/2 tr(E)^2, whose first variation is (F Sigma, grad psi)."""
    E = Kinematics(jet).green_strain()
    return prm.mu_s * np.einsum("...ij,...ij->...", E, E) + 0.5 * prm.lambda_s * _tr(E) ** 2


# -- do-nothing outflow correction --------------------------------------------

def do_nothing_traction(jet, normal, prm, kin=None):
    """rho nu J F^{-T} G^T F^{-T} n, the traction removed at the outflow."""
    kin = kin or Kinematics(jet)
    M = kin.FiT @ _T(kin.G) @ kin.FiT
    return prm.rho_f * prm.nu_f * kin.J[..., None] * _mv(M, normal)


def do_nothing_flux(jet, normal, prm, kin=None):
    out = np.zeros(jet.shape[:-1] + (N_JET,))
    out[..., 0:2] = -do_nothing_traction(jet, normal, prm, kin)
    return out


def do_nothing_tangent(jet, normal, prm, kin=None):
    kin = kin or Kinematics(jet)
    shape = jet.shape[:-1]
    C = np.zeros(shape + (N_JET, N_JET))
    mu = prm.rho_f * prm.nu_f
    J, FiT, GT = kin.J, kin.FiT, _T(kin.G)
    for k in range(N_JET):
        d = _Dir(k, kin)
        if 2 <= k < 6:
            dM = FiT @ _T(d.dG) @ FiT
            C[..., 0:2, k] = -mu * J[..., None] * _mv(dM, normal)
        elif d.has_dH:
            dFiT = _T(d.dFi)
            M = FiT @ GT @ FiT
            dM = dFiT @ GT @ FiT + FiT @ GT @ dFiT
            C[..., 0:2, k] = -mu * (d.dJ[..., None] * _mv(M, normal) + J[..., None] * _mv(dM, normal))
    return C


# -- boundary force (goal functional integrand) ---------------------------------

def traction(jet, normal, prm, kin=None):
    """ALE fluid traction J sigma F^{-T} n."""
    kin = kin or Kinematics(jet)
    P = kin.J[..., None, None] * kin.fluid_stress(prm) @ kin.FiT
    return _mv(P, normal)


def traction_derivative(jet, normal, prm, direction, kin=None):
    """d/djet of ``traction . direction``, shape ``(..., 15)``."""
    kin = kin or Kinematics(jet)
    shape = jet.shape[:-1]
    out = np.zeros(shape + (N_JET,))
    J, Fi, FiT, G = kin.J, kin.Fi, kin.FiT, kin.G
    mu = prm.rho_f * prm.nu_f
    sig = kin.fluid_stress(prm)
    dvec = np.asarray(direction, dtype=float)
    for k in range(N_JET):
        d = _Dir(k, kin)
        if 2 <= k < 6:
            dD = d.dG @ Fi
            dP = J[..., None, None] * (mu * (dD + _T(dD))) @ FiT
        elif d.has_dH:
            GdFi = G @ d.dFi
            dsig = mu * (GdFi + _T(GdFi))
            dP = (d.dJ[..., None, None] * sig @ FiT + J[..., None, None] * dsig @ FiT
                  + J[..., None, None] * sig @ _T(d.dFi))
        elif k == 12:
            dP = -J[..., None, None] * FiT
        else:
            continue
        out[..., k] = _mv(dP, normal) @ dvec
    return out
