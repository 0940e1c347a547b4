"""Time evolution of the full water-waves system.

State: surface elevation eta (real, even, zero mean) and surface potential
psi (real, even, defined modulo constants).  The evolution equations are

    d_t eta = G(eta) psi
    d_t psi = -g eta + kappa H(eta) - (1/2)(psi_x)^2
              + (1/2)(eta' psi_x + G(eta)psi)^2/(1 + eta'^2),

with H(eta) = d_x[eta'(1+eta'^2)^{-1/2}] the curvature term.  The vector
field anticommutes with the involution S:(eta,psi) -> (eta,-psi); evenness
in x and the mean of eta are preserved exactly in the continuum and are
re-imposed after every step to kill floating-point drift (the drift itself
is measured first, it is a diagnostic of the solver's flux identity).

Time stepping is classical RK4 under a dispersive CFL limit set by the
fastest linear frequency m_kappa(M/2) ~ sqrt(kappa) (M/2)^(3/2); energy
conservation is measured, never assumed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .dispersion import PhysParams, m_kappa, lambda_kappa, reduce_g
from .dno import DNOConfig, dirichlet_neumann, good_unknown_fields
from .fields import (PeriodicField, SpectralGrid, dx, field_from_modes, linf_norm,
                     multiply, pointwise, sobolev_norm, symmetrize, zero_field)

CFL_SAFETY = 0.5


class DynamicsError(RuntimeError):
    pass


@dataclass(frozen=True)
class WaveState:
    eta: PeriodicField
    psi: PeriodicField
    t: float
    params: PhysParams

    def __post_init__(self):
        if linf_norm(self.eta) >= 0.5:
            raise DynamicsError("|eta|_inf >= 1/2: outside the solver's validity range")


@dataclass(frozen=True)
class ComplexState:
    """Diagonalizing variable u = L_kappa(D) omega + i L_kappa(D)^{-1} eta."""

    u: PeriodicField
    params: PhysParams


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    scheme: str = "rk4"
    resym: bool = True
    cadence: int = 1          # observable rows every `cadence` steps
    norm_s: float = 2.0

    def __post_init__(self):
        if not self.dt != 0.0:
            raise DynamicsError("dt must be nonzero")
        if self.scheme != "rk4":
            raise DynamicsError(f"unknown scheme {self.scheme!r}")


def cfl_limit(params: PhysParams, M: int) -> float:
    """Largest admissible |dt|: CFL_SAFETY * (M/2)^(-3/2)/sqrt(kappa_eff),
    the dispersive limit of the stiffest linear mode in g-reduced time."""
    red = reduce_g(params)
    return CFL_SAFETY * (M / 2)**-1.5 / math.sqrt(red.params.kappa) / math.sqrt(params.g)


def rhs(state: WaveState, cfg: DNOConfig = DNOConfig()):
    """Right-hand side (eta_dot, psi_dot) of the evolution system."""
    eta, psi, pr = state.eta, state.psi, state.params
    g = dirichlet_neumann(eta, psi, cfg)
    ep = dx(eta)
    psix = dx(psi)
    curvature = dx(pointwise(lambda e: e / np.sqrt(1.0 + e * e), ep))
    quad = pointwise(lambda e, p, gv: -0.5 * p * p + 0.5 * (e * p + gv)**2 / (1.0 + e * e),
                     ep, psix, g)
    psi_dot = (-pr.g) * eta + pr.kappa * curvature + quad
    return g, psi_dot


def rhs_reversibility_defect(state: WaveState, cfg: DNOConfig = DNOConfig()) -> float:
    """Pointwise defect of F(S state) = -S F(state), in sup norm relative
    to the field scales."""
    f1, f2 = rhs(state, cfg)
    flipped = replace(state, psi=-1.0 * state.psi)
    g1, g2 = rhs(flipped, cfg)
    scale = max(linf_norm(f1), linf_norm(f2), 1e-300)
    d1 = linf_norm(g1 + f1)
    d2 = linf_norm(g2 - f2)
    return max(d1, d2) / scale


def _rk4_step(state: WaveState, dt: float, cfg: DNOConfig) -> tuple[WaveState, float]:
    """One step; returns (new state, |mode-0 drift of eta_dot|)."""
    eta, psi = state.eta, state.psi

    def f(e, p):
        return rhs(WaveState(e, p, state.t, state.params), cfg)

    k1e, k1p = f(eta, psi)
    k2e, k2p = f(eta + (dt / 2) * k1e, psi + (dt / 2) * k1p)
    k3e, k3p = f(eta + (dt / 2) * k2e, psi + (dt / 2) * k2p)
    k4e, k4p = f(eta + dt * k3e, psi + dt * k3p)
    new_eta = eta + (dt / 6) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
    new_psi = psi + (dt / 6) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    drift = abs(complex(new_eta.coeff(0)))
    c = new_eta.coeffs.copy()
    c[0] = 0.0
    new_eta = field_from_modes(c, eta.grid, mean_convention="zero_mean")
    return WaveState(new_eta, new_psi, state.t + dt, state.params), drift


def observables(state: WaveState, cfg: DNOConfig = DNOConfig()) -> dict:
    """Mass (mode 0 of eta), total energy, Sobolev norms of the pair.

    Energy = 1/2 int psi G(eta)psi + g/2 int eta^2
             + kappa int (sqrt(1+eta'^2) - 1) dx.
    """
    eta, psi, pr = state.eta, state.psi, state.params
    mass = 2 * np.pi * complex(eta.coeff(0)).real
    if linf_norm(psi) == 0.0 and linf_norm(eta) == 0.0:
        return {"mass": mass, "energy": 0.0, "eta_h1": 0.0, "psi_h1": 0.0}
    g = dirichlet_neumann(eta, psi, cfg)
    kinetic = 0.5 * _integral_product(psi, g)
    potential = 0.5 * pr.g * _integral_product(eta, eta)
    ep = dx(eta)
    surf = pointwise(lambda e: np.sqrt(1.0 + e * e) - 1.0, ep)
    capillary = pr.kappa * 2 * np.pi * complex(surf.coeff(0)).real
    return {
        "mass": mass,
        "energy": kinetic + potential + capillary,
        "eta_h1": sobolev_norm(eta, 1.0),
        "psi_h1": sobolev_norm(psi.with_mean_convention("mod_constants"), 1.0),
    }


def _integral_product(f: PeriodicField, g: PeriodicField) -> float:
    rev = g.coeffs[(-np.arange(g.grid.M)) % g.grid.M]
    return float((2 * np.pi * np.sum(f.coeffs * rev)).real)


@dataclass
class Trajectory:
    rows: np.ndarray          # columns t, mass, energy, Hs_norm, Linf_eta
    states: list
    aborted: bool
    abort_reason: str
    mass_drift_max: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,mass,energy,Hs_norm,Linf_eta\n")
        for r in self.rows:
            buf.write(",".join(f"{v:.17e}" for v in r) + "\n")
        return buf.getvalue()


def evolve(state: WaveState, T_final: float, icfg: IntegratorConfig,
           cfg: DNOConfig = DNOConfig(), keep_states: bool = True) -> Trajectory:
    """March to T_final (either sign); aborts cleanly when |eta|_inf
    crosses 1/2 or the DN solver fails mid-run."""
    dt = icfg.dt if T_final >= state.t else -abs(icfg.dt)
    limit = cfl_limit(state.params, state.eta.grid.M)
    if abs(dt) > limit * (1 + 1e-12):
        raise DynamicsError(f"dt={abs(dt):.3e} violates the dispersive CFL bound {limit:.3e}")
    n_steps = int(round(abs(T_final - state.t) / abs(dt)))
    rows = []
    states = [state] if keep_states else []
    drift_max = 0.0
    aborted = False
    reason = ""

    def record(s):
        obs = observables(s, cfg)
        rows.append((s.t, obs["mass"], obs["energy"],
                     sobolev_norm(s.eta, icfg.norm_s + 0.25)
                     + sobolev_norm(s.psi.with_mean_convention("mod_constants"),
                                    icfg.norm_s - 0.25),
                     linf_norm(s.eta)))

    record(state)
    cur = state
    for k in range(n_steps):
        try:
            cur, drift = _rk4_step(cur, dt, cfg)
        except Exception as exc:  # DN failure mid-run: truncate with diagnostic
            aborted = True
            reason = f"solver failure at t={cur.t:.6g}: {exc}"
            break
        drift_max = max(drift_max, drift)
        if icfg.resym and cur.eta.is_real is not None:
            cur = WaveState(symmetrize(cur.eta).with_mean_convention("zero_mean"),
                            symmetrize(cur.psi), cur.t, cur.params)
        if linf_norm(cur.eta) >= 0.5:
            aborted = True
            reason = f"|eta|_inf reached 1/2 at t={cur.t:.6g}"
            break
        if (k + 1) % icfg.cadence == 0 or k == n_steps - 1:
            record(cur)
            if keep_states:
                states.append(cur)
    return Trajectory(np.array(rows), states, aborted, reason, drift_max)


# -- complex coordinates ----------------------------------------------------------

def complex_from_eta_omega(eta: PeriodicField, omega: PeriodicField,
                           params: PhysParams) -> ComplexState:
    lam = _lambda_multiplier(eta.grid, params)
    lam_inv = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
    u = field_from_modes(lam * omega.coeffs + 1j * lam_inv * eta.coeffs, eta.grid,
                         mean_convention="mod_constants")
    return ComplexState(u, params)


def eta_omega_from_complex(cs: ComplexState):
    lam = _lambda_multiplier(cs.u.grid, cs.params)
    lam_inv = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
    ubar = cs.u.conj()
    eta = field_from_modes(lam * ((cs.u.coeffs - ubar.coeffs) / 2j), cs.u.grid,
                           mean_convention="zero_mean")
    omega = field_from_modes(lam_inv * ((cs.u.coeffs + ubar.coeffs) / 2), cs.u.grid,
                             mean_convention="mod_constants")
    return eta, omega


def _lambda_multiplier(grid: SpectralGrid, params: PhysParams) -> np.ndarray:
    return np.asarray(lambda_kappa(grid.modes.astype(float), params))


def complex_coordinates(obj, params: PhysParams | None = None,
                        cfg: DNOConfig = DNOConfig()):
    """WaveState -> ComplexState (via the good unknown), or
    ComplexState -> (eta, omega)."""
    if isinstance(obj, WaveState):
        _, _, omega = good_unknown_fields(obj.eta, obj.psi, cfg)
        return complex_from_eta_omega(obj.eta, omega, obj.params)
    if isinstance(obj, ComplexState):
        return eta_omega_from_complex(obj)
    raise DynamicsError("expected WaveState or ComplexState")


# -- structural experiments --------------------------------------------------------

def _pair_norm(ea, pa, eb, pb, s):
    return (sobolev_norm(ea - eb, s + 0.25)
            + sobolev_norm((pa - pb).with_mean_convention("mod_constants"), s - 0.25))


def reversibility_check(state0: WaveState, T: float, icfg: IntegratorConfig,
                        cfg: DNOConfig = DNOConfig()) -> dict:
    """Flow-level reversibility: compare Phi^{-T}(x0) with S Phi^{T}(S x0).

    The defect is gauged against the integrator's own self-convergence
    error (dt halving); structural failure means exceeding 10x that gauge.
    """
    s = icfg.norm_s
    flipped = WaveState(state0.eta, -1.0 * state0.psi, state0.t, state0.params)
    A = _final_state(state0, state0.t - T, icfg, cfg)
    B = _final_state(flipped, state0.t + T, icfg, cfg)
    defect = _pair_norm(A.eta, A.psi, B.eta, -1.0 * B.psi, s)
    fine = replace(icfg, dt=icfg.dt / 2)
    A2 = _final_state(state0, state0.t - T, fine, cfg)
    self_err = _pair_norm(A.eta, A.psi, A2.eta, A2.psi, s)
    return {
        "defect": defect,
        "self_convergence": self_err,
        "passes": defect <= 10 * max(self_err, 1e-300),
    }


def _final_state(state0: WaveState, t_target: float, icfg: IntegratorConfig,
                 cfg: DNOConfig) -> WaveState:
    traj = evolve(state0, t_target, icfg, cfg, keep_states=True)
    if traj.aborted:
        raise DynamicsError(f"trajectory aborted: {traj.abort_reason}")
    return traj.states[-1]


def lifetime_experiment(eps_list, seed_eta: PeriodicField, seed_psi: PeriodicField,
                        s: float, icfg: IntegratorConfig, cfg: DNOConfig,
                        params: PhysParams, T_max: float = 1e3) -> dict:
    """Doubling time of the complex-variable Sobolev norm per amplitude.

    Rows carry (eps, T_double, censored); the log-log slope is fitted on
    the uncensored rows (needs at least two).
    """
    rows = []
    for eps in eps_list:
        st = WaveState(eps * seed_eta, eps * seed_psi, 0.0, params)
        u0 = complex_coordinates(st, cfg=cfg)
        n0 = sobolev_norm(u0.u, s)
        t_double, censored = T_max, True
        traj = evolve(st, T_max, icfg, cfg, keep_states=True)
        for stt in traj.states[1:]:
            uu = complex_coordinates(stt, cfg=cfg)
            if sobolev_norm(uu.u, s) >= 2 * n0:
                t_double, censored = stt.t, False
                break
        rows.append({"eps": eps, "T_double": t_double, "censored": censored})
    ok = [(r["eps"], r["T_double"]) for r in rows if not r["censored"]]
    slope = float("nan")
    if len(ok) >= 2:
        le, lt = np.log([e for e, _ in ok]), np.log([t for _, t in ok])
        slope = float(np.polyfit(le, lt, 1)[0])
    return {"rows": rows, "slope": slope}
