"""Reference right-hand sides of the median-filter limit equations.

Each median filter studied here, applied with a small window of radius
rho, moves a smooth image by tau(rho) times a second-order differential
operator. This module evaluates those operators exactly from a pointwise
jet (value, Jacobian, Hessian), exposes the elliptic-integral quotients
entering the planar L1 case, and offers a small explicit finite-difference
evolver for the scalar and two-channel equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from . import defaults as dflt
from .core import ImageGrid
from .errors import (
    DimensionMismatch,
    DimUnsupported,
    InputError,
    RankDeficient,
    SingularJacobian,
    UnstableStep,
    VanishingGradient,
)

# factor c in tau(rho) = c * rho^2 for each filter family
TAU_FACTOR = {
    "mcm": 1.0 / 6.0,
    "selfsnakes": 1.0 / 6.0,
    "l1_22": 1.0 / 6.0,
    "oja_22": 1.0 / 24.0,
    "oja_33": 1.0 / 20.0,
    "oja_23": 1.0 / 24.0,
    "amoeba_oja_22": 1.0 / 24.0,
}


def tau(name: str, rho: float) -> float:
    """Natural time step carried by one application of the named filter."""
    if name not in TAU_FACTOR:
        raise InputError(f"unknown PDE family {name!r}")
    return TAU_FACTOR[name] * float(rho) * float(rho)


@dataclass(frozen=True)
class JetPoint:
    """Second-order jet of an n-channel image of m variables at one point.

    value (n,), jacobian (n, m), hessian (n, m, m) with symmetric spatial
    indices.
    """

    value: np.ndarray
    jacobian: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.value, dtype=np.float64))
        jc = np.asarray(self.jacobian, dtype=np.float64)
        hs = np.asarray(self.hessian, dtype=np.float64)
        if jc.ndim == 1:
            jc = jc[None, :]
        if hs.ndim == 2:
            hs = hs[None, :, :]
        n, m = jc.shape
        if v.shape != (n,) or hs.shape != (n, m, m):
            raise DimensionMismatch(
                f"jet blocks disagree: value {v.shape}, jacobian {jc.shape}, "
                f"hessian {hs.shape}"
            )
        sym = np.abs(hs - np.swapaxes(hs, 1, 2)).max() if hs.size else 0.0
        scale = max(float(np.abs(hs).max()) if hs.size else 0.0, 1.0)
        if sym > 1e-12 * scale:
            raise DimensionMismatch("hessian must be symmetric in its spatial indices")
        hs = 0.5 * (hs + np.swapaxes(hs, 1, 2))
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "jacobian", jc)
        object.__setattr__(self, "hessian", hs)

    @property
    def channels(self) -> int:
        return self.jacobian.shape[0]

    @property
    def space_dim(self) -> int:
        return self.jacobian.shape[1]

    @classmethod
    def scalar2d(cls, grad, hess, value: float = 0.0) -> "JetPoint":
        return cls(np.array([float(value)]), np.asarray(grad, dtype=np.float64)[None, :],
                   np.asarray(hess, dtype=np.float64)[None, :, :])


@dataclass(frozen=True)
class GeometricFrame:
    """Structure-tensor frame of a planar jet.

    eta points across the dominant value variation (major axis of
    J = Du^T Du), xi along it; (eta, xi) is right-handed. R is the
    normalisation matrix (Du^{-1})^T P diag(r, s) with P = (eta | xi),
    r = |Du eta|, s = |Du xi|; it is orthogonal. When the structure
    tensor is isotropic the frame is not unique: canonical axes are
    returned and ``degenerate`` is set.
    """

    eta: np.ndarray
    xi: np.ndarray
    tensor: np.ndarray
    r: float
    s: float
    normalizer: Optional[np.ndarray]
    degenerate: bool = False


def geometric_frame(jet: JetPoint) -> GeometricFrame:
    """Frame of a jet with two space variables (any channel count)."""
    if jet.space_dim != 2:
        raise DimUnsupported("geometric frames are planar")
    Du = jet.jacobian
    J = Du.T @ Du
    evals, evecs = np.linalg.eigh(J)
    gap = float(evals[1] - evals[0])
    degenerate = gap <= 1e-10 * max(float(evals[1]), 1e-300)
    if degenerate:
        eta = np.array([1.0, 0.0])
        xi = np.array([0.0, 1.0])
    else:
        eta = evecs[:, 1]
        ref = Du[0]
        if abs(float(eta @ ref)) < dflt.ORIENT_EPS and Du.shape[0] > 1:
            ref = Du[1]
        if float(eta @ ref) < 0.0:
            eta = -eta
        xi = np.array([-eta[1], eta[0]])
    r = float(np.linalg.norm(Du @ eta))
    s = float(np.linalg.norm(Du @ xi))
    normalizer = None
    if Du.shape[0] == 2:
        det = float(Du[0, 0] * Du[1, 1] - Du[0, 1] * Du[1, 0])
        scale = float(np.abs(Du).max())
        if abs(det) > (1e-12 * max(scale, 1e-300)) ** 2:
            P = np.stack([eta, xi], axis=1)
            normalizer = np.linalg.inv(Du).T @ P @ np.diag([r, s])
    return GeometricFrame(eta, xi, J, r, s, normalizer, degenerate)


# ---------------------------------------------------------------------------
# elliptic-integral quotients of the planar L1 limit


def _q_integrals(lam: float):
    # the four defining integrals over t in [0, inf), taken to the compact
    # interval via t = tan(theta); D = cos^2 + lam^2 sin^2 concentrates the
    # mass near one endpoint for extreme lam, hence the breakpoint hints
    l2 = lam * lam

    def dpow(th):
        c = np.cos(th)
        s = np.sin(th)
        return (c * c + l2 * s * s) ** -1.5

    funcs = (
        lambda th: (np.sin(th) * np.cos(th)) ** 2 * dpow(th),
        lambda th: np.cos(th) ** 2 * dpow(th),
        lambda th: np.sin(th) ** 4 * dpow(th),
        lambda th: np.sin(th) ** 2 * dpow(th),
    )
    half = 0.5 * np.pi
    if lam >= 1.0:
        hints = [1.0 / lam, 8.0 / lam]
    else:
        hints = [half - 8.0 * lam, half - lam]
    pts = sorted({float(p) for p in hints if 0.0 < p < half})
    return tuple(
        integrate.quad(f, 0.0, half, points=pts, limit=400,
                       epsabs=0.0, epsrel=dflt.Q_QUAD_EPS)[0]
        for f in funcs
    )


@lru_cache(maxsize=4096)
def q1(lam: float) -> float:
    """First anisotropy quotient; q1(0) = 1, q1(1) = 1/4, q1(lam) lam -> 0.

    Outside [1e-6, 1e6] the integrand mass sits within float spacing of an
    interval end, so the matched logarithmic expansions take over (they
    agree with quadrature to about 2e-9 at the handover and improve by an
    order of magnitude per further decade).
    """
    lam = float(lam)
    if lam < 0:
        raise InputError("the anisotropy argument is nonnegative")
    if lam == 0.0:
        return 1.0
    if lam < 1.0 / dflt.Q_ASYM_SWITCH:
        return 1.0 - 1.0 / (np.log(4.0 / lam) - 1.0)
    if lam > dflt.Q_ASYM_SWITCH:
        return (np.log(4.0 * lam) - 2.0) / (lam * lam)
    i1, i2, _, _ = _q_integrals(lam)
    return i1 / i2


@lru_cache(maxsize=4096)
def q2(lam: float) -> float:
    """Second anisotropy quotient; q2(0) = 1, q2(1) = 3/4, decays to 0
    only logarithmically (q2 of 1e10 is still about 0.05). Tail handling
    mirrors q1."""
    lam = float(lam)
    if lam < 0:
        raise InputError("the anisotropy argument is nonnegative")
    if lam == 0.0:
        return 1.0
    if lam < 1.0 / dflt.Q_ASYM_SWITCH:
        return 1.0 - (np.log(4.0 / lam) - 2.0) * lam * lam
    if lam > dflt.Q_ASYM_SWITCH:
        return 1.0 / (np.log(4.0 * lam) - 1.0)
    _, _, j1, j2 = _q_integrals(lam)
    return j1 / j2


@lru_cache(maxsize=1)
def _q_interpolants():
    grid = np.logspace(-6.0, 6.0, 481)
    v1 = np.array([q1(g) for g in grid])
    v2 = np.array([q2(g) for g in grid])
    lg = np.log10(grid)
    return PchipInterpolator(lg, v1), PchipInterpolator(lg, v2)


def q1_fast(lam: float) -> float:
    """Interpolated q1 for grid evolution (about 1e-6 accurate)."""
    lam = float(lam)
    if lam <= 1e-6 or lam >= 1e6:
        return q1(lam)
    return float(_q_interpolants()[0](np.log10(lam)))


def q2_fast(lam: float) -> float:
    lam = float(lam)
    if lam <= 1e-6 or lam >= 1e6:
        return q2(lam)
    return float(_q_interpolants()[1](np.log10(lam)))


# ---------------------------------------------------------------------------
# coefficient blocks


@dataclass(frozen=True)
class PdeCoefficients:
    """Coefficient matrices of one PDE family, keyed by their usual names."""

    family: str
    blocks: Dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, key: str) -> np.ndarray:
        return self.blocks[key]


def _frame_second_derivs(jet: JetPoint, frame: GeometricFrame):
    H = jet.hessian
    e, x = frame.eta, frame.xi
    u_ee = H @ e @ e
    u_xx = H @ x @ x
    u_xe = np.einsum("cij,i,j->c", H, x, e)
    return u_ee, u_xx, u_xe


def l1_22_coefficients(jet: JetPoint, fast: bool = False) -> PdeCoefficients:
    frame = geometric_frame(jet)
    if frame.normalizer is None:
        raise SingularJacobian("the planar L1 limit needs an invertible Jacobian")
    r, s = frame.r, frame.s
    Q1 = q1_fast if fast else q1
    Q2 = q2_fast if fast else q2
    R = frame.normalizer
    S = R @ np.diag([Q1(r / s), Q2(r / s)]) @ R.T
    T = R @ np.diag([Q2(s / r), Q1(s / r)]) @ R.T
    Wm = R @ np.array([[0.0, (r / s) * Q1(r / s)],
                       [(s / r) * Q1(s / r), 0.0]]) @ R.T
    return PdeCoefficients("l1_22", {"S": S, "T": T, "W": Wm})


def oja_22_coefficients(jet: JetPoint) -> PdeCoefficients:
    Du = jet.jacobian
    if Du.shape != (2, 2):
        raise DimensionMismatch("this family maps the plane to two channels")
    ux, uy = Du[0]
    vx, vy = Du[1]
    det = ux * vy - uy * vx
    scale = float(np.abs(Du).max())
    if abs(det) <= (1e-12 * max(scale, 1e-300)) ** 2:
        raise SingularJacobian("regular point required: det Du vanishes")
    A = np.array([[ux * vy + uy * vx, -2.0 * ux * uy],
                  [2.0 * vx * vy, -(ux * vy + uy * vx)]]) / det
    B = 2.0 * np.array([[ux * vx - uy * vy, -ux * ux + uy * uy],
                        [vx * vx - vy * vy, -ux * vx + uy * vy]]) / det
    return PdeCoefficients("oja_22", {"A": A, "B": B})


def oja_33_coefficients(jet: JetPoint) -> PdeCoefficients:
    D = jet.jacobian
    if D.shape != (3, 3):
        raise DimensionMismatch("this family maps space to three channels")
    scale = float(np.abs(D).max())
    if abs(np.linalg.det(D)) <= (1e-12 * max(scale, 1e-300)) ** 3:
        raise SingularJacobian("regular point required: det Du vanishes")
    Dinv = np.linalg.inv(D)

    def sim(M):
        return D @ M @ Dinv

    eye = np.eye(3)
    A1 = eye - 3.0 * sim(np.diag([0.0, 1.0, 0.0]))
    A2 = eye - 3.0 * sim(np.diag([0.0, 0.0, 1.0]))
    B1 = -3.0 * sim(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float))
    B2 = -3.0 * sim(np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]], dtype=float))
    B3 = -3.0 * sim(np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=float))
    return PdeCoefficients("oja_33", {"A1": A1, "A2": A2,
                                      "B1": B1, "B2": B2, "B3": B3})


def oja_23_coefficients(jet: JetPoint) -> PdeCoefficients:
    Du = jet.jacobian
    if Du.shape != (3, 2):
        raise DimensionMismatch("this family maps the plane to three channels")
    du, dv = Du[:, 0], Du[:, 1]
    nrm = np.cross(du, dv)
    nlen = float(np.linalg.norm(nrm))
    scale = float(np.abs(Du).max())
    if nlen <= (1e-12 * max(scale, 1e-300)) ** 2:
        raise RankDeficient("regular point required: the Jacobian drops rank")
    D3 = np.stack([du, dv, nrm / nlen], axis=1)
    D3inv = np.linalg.inv(D3)
    A = D3 @ np.diag([1.0, -1.0, 0.0]) @ D3inv
    B = -2.0 * D3 @ np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float) @ D3inv
    return PdeCoefficients("oja_23", {"A": A, "B": B, "D3": D3})


def _theta1(z: float, beta: float) -> float:
    b2z2 = beta * beta * z * z
    return (1.0 - 8.0 * b2z2) / (1.0 + b2z2) ** 2


def _theta2(w: float, z: float, beta: float) -> float:
    return 3.0 / ((1.0 + beta * beta * w * w) * (1.0 + beta * beta * z * z))


def _theta3(w: float, z: float, beta: float) -> float:
    b2z2 = beta * beta * z * z
    return (w / z) * (1.0 + 4.0 * b2z2) / ((1.0 + beta * beta * w * w) * (1.0 + b2z2))


def amoeba_oja_22_coefficients(jet: JetPoint, beta: float) -> PdeCoefficients:
    if beta < 0:
        raise InputError("beta must be >= 0")
    frame = geometric_frame(jet)
    if frame.normalizer is None:
        raise SingularJacobian("regular point required: det Du vanishes")
    r, s = frame.r, frame.s
    R = frame.normalizer
    T1 = R @ np.diag([_theta1(r, beta), _theta2(r, s, beta)]) @ R.T
    T2 = R @ np.diag([_theta2(r, s, beta), _theta1(s, beta)]) @ R.T
    T3 = -2.0 * R @ np.array([[0.0, _theta3(r, s, beta)],
                              [_theta3(s, r, beta), 0.0]]) @ R.T
    return PdeCoefficients("amoeba_oja_22", {"Theta1": T1, "Theta2": T2, "Theta3": T3})


# ---------------------------------------------------------------------------
# right-hand sides


def rhs_mcm(jet: JetPoint) -> float:
    """Mean-curvature motion u_t = |grad u| curv = u_{xi xi}."""
    if jet.channels != 1 or jet.space_dim != 2:
        raise DimensionMismatch("mean-curvature motion is scalar and planar")
    g = jet.jacobian[0]
    s = float(np.linalg.norm(g))
    if s <= dflt.GRAD_EPS:
        raise VanishingGradient("the level-line direction is undefined")
    H = jet.hessian[0]
    xi = np.array([-g[1], g[0]]) / s
    return float(xi @ H @ xi)


def rhs_selfsnakes(jet: JetPoint, beta: float) -> float:
    """Self-snakes with g(s) = 1/(1 + beta^2 s^2):
    u_t = g(s) u_{xi xi} + g'(s) s u_{eta eta}."""
    if jet.channels != 1 or jet.space_dim != 2:
        raise DimensionMismatch("self-snakes is scalar and planar")
    if beta < 0:
        raise InputError("beta must be >= 0")
    g = jet.jacobian[0]
    s = float(np.linalg.norm(g))
    if s <= dflt.GRAD_EPS:
        raise VanishingGradient("the level-line direction is undefined")
    H = jet.hessian[0]
    eta = g / s
    xi = np.array([-eta[1], eta[0]])
    u_xx = float(xi @ H @ xi)
    u_ee = float(eta @ H @ eta)
    den = 1.0 + beta * beta * s * s
    gval = 1.0 / den
    gprime = -2.0 * beta * beta * s / (den * den)
    return gval * u_xx + gprime * s * u_ee


def rhs_l1_22(jet: JetPoint, fast: bool = False) -> np.ndarray:
    """Planar two-channel L1 limit: S u_{eta eta} + T u_{xi xi} - 2 W u_{xi eta}."""
    co = l1_22_coefficients(jet, fast=fast)
    frame = geometric_frame(jet)
    u_ee, u_xx, u_xe = _frame_second_derivs(jet, frame)
    return co["S"] @ u_ee + co["T"] @ u_xx - 2.0 * co["W"] @ u_xe


def rhs_oja_22(jet: JetPoint) -> np.ndarray:
    """Planar two-channel Oja limit:
    2 lap u + A (u_yy - u_xx) + B u_xy."""
    co = oja_22_coefficients(jet)
    H = jet.hessian
    u_xx, u_yy, u_xy = H[:, 0, 0], H[:, 1, 1], H[:, 0, 1]
    return 2.0 * (u_xx + u_yy) + co["A"] @ (u_yy - u_xx) + co["B"] @ u_xy


def rhs_oja_33(jet: JetPoint) -> np.ndarray:
    """Spatial three-channel Oja limit on the rho^2/20 time scale:
    (1/3)(5 lap u + A1 (u_yy - u_xx) + A2 (u_zz - u_xx)
          + B1 u_xy + B2 u_xz + B3 u_yz)."""
    co = oja_33_coefficients(jet)
    H = jet.hessian
    lap = H[:, 0, 0] + H[:, 1, 1] + H[:, 2, 2]
    out = 5.0 * lap
    out = out + co["A1"] @ (H[:, 1, 1] - H[:, 0, 0])
    out = out + co["A2"] @ (H[:, 2, 2] - H[:, 0, 0])
    out = out + co["B1"] @ H[:, 0, 1] + co["B2"] @ H[:, 0, 2] + co["B3"] @ H[:, 1, 2]
    return out / 3.0


def rhs_oja_23(jet: JetPoint) -> np.ndarray:
    """Planar three-channel Oja limit: 2 lap u + A (u_yy - u_xx) + B u_xy."""
    co = oja_23_coefficients(jet)
    H = jet.hessian
    u_xx, u_yy, u_xy = H[:, 0, 0], H[:, 1, 1], H[:, 0, 1]
    return 2.0 * (u_xx + u_yy) + co["A"] @ (u_yy - u_xx) + co["B"] @ u_xy


def rhs_amoeba_oja_22(jet: JetPoint, beta: float) -> np.ndarray:
    """Amoeba Oja limit: Theta1 u_{eta eta} + Theta2 u_{xi xi} + Theta3 u_{xi eta}."""
    co = amoeba_oja_22_coefficients(jet, beta)
    frame = geometric_frame(jet)
    u_ee, u_xx, u_xe = _frame_second_derivs(jet, frame)
    return co["Theta1"] @ u_ee + co["Theta2"] @ u_xx + co["Theta3"] @ u_xe


# ---------------------------------------------------------------------------
# explicit grid evolution


_RHS_CHANNELS = {
    "mcm": 1,
    "selfsnakes": 1,
    "l1_22": 2,
    "oja_22": 2,
    "oja_23": 3,
    "amoeba_oja_22": 2,
}


def _grid_derivatives(frame: np.ndarray, h: float):
    """Central differences with odd reflection at the border (equivalent to
    one-sided boundary stencils; linear images give exact zeros)."""
    p = np.pad(frame, ((1, 1), (1, 1), (0, 0)), mode="reflect", reflect_type="odd")
    c = p[1:-1, 1:-1]
    ux = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * h)
    uy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * h)
    uxx = (p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]) / (h * h)
    uyy = (p[1:-1, 2:] - 2 * c + p[1:-1, :-2]) / (h * h)
    uxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4 * h * h)
    return ux, uy, uxx, uyy, uxy


def _step_mcm_monotone(frame, h):
    """Curvature motion by the directional-difference scheme: the level-line
    direction (from central-difference gradients) is quantized to the
    nearest stencil axis and u_{xi xi} is the plain second difference along
    it. Each update is then a convex combination for dt <= h^2/2, so the
    discrete min/max cannot leave the initial range."""
    p = np.pad(frame, ((1, 1), (1, 1), (0, 0)), mode="reflect",
               reflect_type="odd")[:, :, 0]
    c = p[1:-1, 1:-1]
    ux = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * h)
    uy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * h)
    live = np.hypot(ux, uy) > 1e-8
    dxx = (p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]) / (h * h)
    dyy = (p[1:-1, 2:] - 2 * c + p[1:-1, :-2]) / (h * h)
    dpp = (p[2:, 2:] - 2 * c + p[:-2, :-2]) / (2 * h * h)
    dpm = (p[2:, :-2] - 2 * c + p[:-2, 2:]) / (2 * h * h)
    # xi is the gradient rotated by 90 degrees; axes repeat with period pi
    ang = np.mod(np.arctan2(uy, ux) + 0.5 * np.pi, np.pi)
    k = np.rint(ang / (0.25 * np.pi)).astype(np.int64) % 4
    chosen = np.choose(k, [dxx, dpp, dyy, dpm])
    return np.where(live, chosen, 0.0)[:, :, None]


def _step_selfsnakes_central(frame, h, beta):
    ux, uy, uxx, uyy, uxy = (d[:, :, 0] for d in _grid_derivatives(frame, h))
    s2 = ux * ux + uy * uy
    s = np.sqrt(s2)
    live = s > 1e-8
    s2safe = np.where(live, s2, 1.0)
    u_xixi = (uxx * uy * uy - 2 * uxy * ux * uy + uyy * ux * ux) / s2safe
    u_etaeta = (uxx * ux * ux + 2 * uxy * ux * uy + uyy * uy * uy) / s2safe
    den = 1.0 + beta * beta * s2
    gval = 1.0 / den
    gprime = -2.0 * beta * beta * s / (den * den)
    return np.where(live, gval * u_xixi + gprime * s * u_etaeta, 0.0)[:, :, None]


def evolve_grid(image: ImageGrid, rhs, dt: float, steps: int,
                beta: float = 1.0) -> ImageGrid:
    """Explicit time stepping of one of the named limit equations.

    rhs is a family name from TAU_FACTOR (except the volume family) or a
    callable jet -> channel vector. Jets come from central differences on
    the reflect-padded frame; pixels with a degenerate Jacobian (norm
    below 1e-8, or a singular frame for the matrix-valued families) do
    not move. Raises UnstableStep when the values blow up (growth beyond
    a factor of 10 over the initial frame).

    The curvature family steps with the second difference taken along the
    stencil axis nearest to the level-line direction, which keeps every
    update a convex combination for dt <= h^2/2; evolved values therefore
    never leave the initial min/max range. The full central cross stencil
    mixes in an indefinite u_xy term and has no such guarantee, so it is
    reserved for the families that do not satisfy a comparison principle
    anyway.
    """
    grid = image if isinstance(image, ImageGrid) else ImageGrid(np.asarray(image))
    if grid.data.ndim != 3:
        raise DimUnsupported("grid evolution handles 2D images only")
    frame_fn: Optional[Callable] = None
    if callable(rhs):
        frame_fn = rhs
        name = getattr(rhs, "__name__", "custom")
    else:
        name = str(rhs)
        if name == "oja_33":
            raise DimUnsupported("the volume family has no 2D grid evolution")
        if name not in _RHS_CHANNELS:
            raise InputError(f"unknown PDE family {name!r}")
        if grid.channels != _RHS_CHANNELS[name]:
            raise DimensionMismatch(
                f"{name} expects {_RHS_CHANNELS[name]} channels, "
                f"image has {grid.channels}"
            )
    steps = int(steps)
    if steps < 0 or dt <= 0:
        raise InputError("need steps >= 0 and dt > 0")

    h = grid.spacing
    cur = grid.data.copy()
    bound = dflt.UNSTABLE_GROWTH * max(float(np.abs(cur).max()), 1.0)

    vectorized = frame_fn is None and name in ("mcm", "selfsnakes")
    for _ in range(steps):
        if vectorized:
            if name == "mcm":
                vel = _step_mcm_monotone(cur, h)
            else:
                vel = _step_selfsnakes_central(cur, h, beta)
        else:
            ux, uy, uxx, uyy, uxy = _grid_derivatives(cur, h)
            vel = np.zeros_like(cur)
            hgt, wdt = cur.shape[:2]
            for i in range(hgt):
                for j in range(wdt):
                    jac = np.stack([ux[i, j], uy[i, j]], axis=1)
                    if np.linalg.norm(jac) < 1e-8:
                        continue
                    hess = np.empty((cur.shape[2], 2, 2))
                    hess[:, 0, 0] = uxx[i, j]
                    hess[:, 1, 1] = uyy[i, j]
                    hess[:, 0, 1] = hess[:, 1, 0] = uxy[i, j]
                    jet = JetPoint(cur[i, j], jac, hess)
                    try:
                        if frame_fn is not None:
                            vel[i, j] = frame_fn(jet)
                        elif name == "l1_22":
                            vel[i, j] = rhs_l1_22(jet, fast=True)
                        elif name == "oja_22":
                            vel[i, j] = rhs_oja_22(jet)
                        elif name == "oja_23":
                            vel[i, j] = rhs_oja_23(jet)
                        else:
                            vel[i, j] = rhs_amoeba_oja_22(jet, beta)
                    except (SingularJacobian, RankDeficient, VanishingGradient):
                        pass
        cur = cur + dt * vel
        if float(np.abs(cur).max()) > bound:
            raise UnstableStep(
                "values grew past the blowup bound; reduce dt "
                f"(needs about h^2/(4 max diffusion), h = {h})"
            )
    return ImageGrid(cur, grid.spacing, grid.maxval, dict(grid.meta))
