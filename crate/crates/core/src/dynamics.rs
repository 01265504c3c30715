//! Right-hand side of the scaled augmented NSK system in the variables
//! `(ρ, m, J)` and its time integration.
//!
//! With `u = m/ρ`, `v = J/ρ` and the 1-D capillary coefficient `ρμ′(ρ)`:
//!
//! ```text
//! ρ_t = −(1/ε) ∂ₓm
//! m_t = −(1/ε) ∂ₓ(m²/ρ + p(ρ) − t_ν − s₁) − m/ε²
//! J_t = −(1/ε) ∂ₓ(Jm/ρ) − c ∂ₓs₂
//! ```
//!
//! where `s₁ = ρμ′ ∂ₓv`, `s₂ = ρμ′ ∂ₓu`, `t_ν = ν(2μ_L + λ_L) ∂ₓu`, and
//! `c ∈ {1, 1/ε}` is selected by [`S2Scaling`]. The friction term is linear
//! in `m` and is integrated exactly; the rest is advanced with SSP-RK3 inside
//! a Strang splitting.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::{Params, S2Scaling};
use crate::entropy::{self, DiagRecord};
use crate::error::{NskError, Result};
use crate::grid::{deriv, Field, Grid};

/// Augmented state `(ρ, m, J)` at one time.
#[derive(Debug, Clone)]
pub struct State {
    pub time: f64,
    pub rho: Field,
    pub m: Field,
    pub j: Field,
}

impl State {
    pub fn new(time: f64, rho: Field, m: Field, j: Field) -> Result<State> {
        if !(rho.same_grid(&m) && rho.same_grid(&j)) {
            return Err(NskError::Mismatch("state fields on different grids".into()));
        }
        Ok(State { time, rho, m, j })
    }

    /// `ρ` given, `J = ∂ₓμ(ρ)` so the drift constraint holds exactly.
    pub fn with_drift_constraint(time: f64, rho: Field, m: Field, params: &Params) -> Result<State> {
        let j = drift_momentum(&rho, params)?;
        State::new(time, rho, m, j)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho.grid()
    }

    pub fn validate(&self, params: &Params) -> Result<()> {
        if !(self.rho.is_finite() && self.m.is_finite() && self.j.is_finite()) {
            return Err(NskError::NonFinite("state"));
        }
        self.rho.check_positive(params.rho_floor)
    }

    pub fn velocity(&self) -> Field {
        self.m.zip_map(&self.rho, |m, r| m / r)
    }

    pub fn drift(&self) -> Field {
        self.j.zip_map(&self.rho, |j, r| j / r)
    }

    /// Two-thirds-rule projection of every component.
    pub fn dealiased(&self) -> State {
        State {
            time: self.time,
            rho: crate::grid::dealias(&self.rho),
            m: crate::grid::dealias(&self.m),
            j: crate::grid::dealias(&self.j),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Relaxation,
    GradientFlow,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub params: Params,
    pub snapshots: Vec<State>,
    pub diagnostics: Vec<DiagRecord>,
    pub steps: usize,
    pub max_dt: f64,
    pub min_dt: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &State {
        self.snapshots.last().expect("trajectory holds the initial datum")
    }
}

fn require_positive_field(rho: &Field, params: &Params) -> Result<()> {
    rho.check_positive(params.rho_floor)
}

/// `J = ∂ₓμ(ρ)`.
pub fn drift_momentum(rho: &Field, params: &Params) -> Result<Field> {
    require_positive_field(rho, params)?;
    deriv(&rho.map(|r| params.mu0(r)), 1)
}

/// Drift velocity `v = ∂ₓμ(ρ)/ρ`.
pub fn drift_velocity(rho: &Field, params: &Params) -> Result<Field> {
    let jm = drift_momentum(rho, params)?;
    Ok(jm.zip_map(rho, |j, r| j / r))
}

/// L² distance between `∂ₓμ(ρ)/ρ` and `√(k(ρ)/ρ)·∂ₓρ`.
pub fn drift_velocity_residual(rho: &Field, params: &Params) -> Result<f64> {
    let v = drift_velocity(rho, params)?;
    let rx = deriv(rho, 1)?;
    let alt = rho.zip_map(&rx, |r, d| (params.k0(r) / r).sqrt() * d);
    Ok(v.sub(&alt).l2_norm())
}

/// `s₁ = (μ + λ/2) ∂ₓv`.
pub fn stress_s1(rho: &Field, v: &Field, params: &Params) -> Result<Field> {
    require_positive_field(rho, params)?;
    let vx = deriv(v, 1)?;
    Ok(rho.zip_map(&vx, |r, d| params.capillary_coeff(r) * d))
}

/// `s₂ = (μ + λ/2) ∂ₓu`.
pub fn stress_s2(rho: &Field, u: &Field, params: &Params) -> Result<Field> {
    stress_s1(rho, u, params)
}

/// `t_ν = ν(2μ_L + λ_L) ∂ₓu`.
pub fn stress_tnu(rho: &Field, u: &Field, params: &Params) -> Result<Field> {
    require_positive_field(rho, params)?;
    if params.nu == 0.0 {
        return Ok(Field::constant(rho.grid(), 0.0));
    }
    let ux = deriv(u, 1)?;
    Ok(rho.zip_map(&ux, |r, d| {
        params.nu * (2.0 * params.mu_lame0(r) + params.lambda_lame0(r)) * d
    }))
}

/// Divergence of the capillary stress in Korteweg form,
/// `ρ ∂ₓ(k ∂ₓ²ρ + ½k′ (∂ₓρ)²)`.
pub fn korteweg_force(rho: &Field, params: &Params) -> Result<Field> {
    require_positive_field(rho, params)?;
    let rx = deriv(rho, 1)?;
    let rxx = deriv(rho, 2)?;
    let inner: Vec<f64> = rho
        .values()
        .iter()
        .zip(rx.values())
        .zip(rxx.values())
        .map(|((&r, &d1), &d2)| params.k0(r) * d2 + 0.5 * params.k1(r) * d1 * d1)
        .collect();
    let g = deriv(&Field::from_vec(rho.grid(), inner), 1)?;
    Ok(rho.mul(&g))
}

/// `‖∂ₓs₁(ρ, v(ρ)) − ρ∂ₓ(k∂ₓ²ρ + ½k′|∂ₓρ|²)‖₂`.
pub fn bohm_residual(rho: &Field, params: &Params) -> Result<f64> {
    let v = drift_velocity(rho, params)?;
    let div_s1 = deriv(&stress_s1(rho, &v, params)?, 1)?;
    let kort = korteweg_force(rho, params)?;
    Ok(div_s1.sub(&kort).l2_norm())
}

fn s2_factor(params: &Params) -> f64 {
    // The J flux is assembled under a common 1/ε, so unit scaling of ∂ₓs₂
    // becomes a factor ε inside it.
    match params.s2_scaling {
        S2Scaling::InvEpsilon => 1.0,
        S2Scaling::Unit => params.epsilon,
    }
}

/// Non-stiff part of the scaled system (everything except `−m/ε²`).
pub fn rhs_scaled(state: &State, params: &Params) -> Result<(Field, Field, Field)> {
    state.rho.check_positive(params.rho_floor)?;
    let grid = state.grid();
    let (d_rho, d_m, d_j) = rhs_values(
        grid,
        state.rho.values(),
        state.m.values(),
        state.j.values(),
        params,
    );
    if !(d_rho.iter().chain(&d_m).chain(&d_j).all(|v| v.is_finite())) {
        return Err(NskError::NonFinite("rhs"));
    }
    Ok((
        Field::from_vec(grid, d_rho),
        Field::from_vec(grid, d_m),
        Field::from_vec(grid, d_j),
    ))
}

fn rhs_values(
    grid: &Grid,
    rho: &[f64],
    m: &[f64],
    j: &[f64],
    params: &Params,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = rho.len();
    let inv_eps = 1.0 / params.epsilon;
    let u: Vec<f64> = m.iter().zip(rho).map(|(m, r)| m / r).collect();
    let v: Vec<f64> = j.iter().zip(rho).map(|(j, r)| j / r).collect();
    let ux = grid.derivative_values(&u, 1, false);
    let vx = grid.derivative_values(&v, 1, false);
    let c2 = s2_factor(params);

    let mut flux_m = Vec::with_capacity(n);
    let mut flux_j = Vec::with_capacity(n);
    for i in 0..n {
        let r = rho[i];
        let cap = params.capillary_coeff(r);
        let visc = if params.nu == 0.0 {
            0.0
        } else {
            params.nu * (2.0 * params.mu_lame0(r) + params.lambda_lame0(r)) * ux[i]
        };
        flux_m.push(m[i] * u[i] + params.p0(r) - visc - cap * vx[i]);
        flux_j.push(j[i] * u[i] + c2 * cap * ux[i]);
    }
    let scale = |mut w: Vec<f64>| {
        for x in w.iter_mut() {
            *x *= -inv_eps;
        }
        w
    };
    let d_rho = scale(grid.derivative_values(m, 1, true));
    let d_m = scale(grid.derivative_values(&flux_m, 1, true));
    let d_j = scale(grid.derivative_values(&flux_j, 1, true));
    (d_rho, d_m, d_j)
}

/// Exact flow of `m_t = −m/ε²` over `dt`.
pub fn friction_flow(m: &Field, dt: f64, params: &Params) -> Field {
    if !params.friction {
        return m.clone();
    }
    let decay = (-dt / (params.epsilon * params.epsilon)).exp();
    m.scale(decay)
}

/// Upper bound on the frequencies of the linearized non-stiff operator:
/// acoustic `κ(|u| + c)/ε`, viscous `κ²ν(2μ_L + λ_L)/(ρε)`, and dispersive
/// `κ²μ′(ρ)·√(c₂/ε)`, each at `κ_max`.
pub fn stiffness_rate(state: &State, params: &Params) -> f64 {
    let kmax = state.grid().kappa_max();
    let inv_eps = 1.0 / params.epsilon;
    let c2 = match params.s2_scaling {
        S2Scaling::InvEpsilon => inv_eps,
        S2Scaling::Unit => 1.0,
    };
    let mut adv: f64 = 0.0;
    let mut visc: f64 = 0.0;
    let mut disp: f64 = 0.0;
    for ((&r, &m), &_j) in state
        .rho
        .values()
        .iter()
        .zip(state.m.values())
        .zip(state.j.values())
    {
        let c = params.p1(r).max(0.0).sqrt();
        adv = adv.max((m / r).abs() + c);
        if params.nu > 0.0 {
            visc = visc.max(params.nu * (2.0 * params.mu_lame0(r) + params.lambda_lame0(r)) / r);
        }
        disp = disp.max(params.mu1(r));
    }
    kmax * adv * inv_eps + kmax * kmax * visc * inv_eps + kmax * kmax * disp * (inv_eps * c2).sqrt()
}

/// Largest admissible step for the explicit part (SSP-RK3 is stable up to
/// `dt·rate ≈ √3` on the imaginary axis; we accept `dt·rate ≤ 1`).
pub fn stability_limit(state: &State, params: &Params) -> f64 {
    1.0 / stiffness_rate(state, params)
}

/// One Strang step: half friction, SSP-RK3 on [`rhs_scaled`], half friction.
pub fn step(state: &State, dt: f64, params: &Params) -> Result<State> {
    let limit = stability_limit(state, params);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(NskError::Cfl { dt, limit });
    }
    step_unchecked(state, dt, params)
}

/// [`step`] without the stability check, for states whose non-stiff
/// right-hand side vanishes identically.
pub fn step_unchecked(state: &State, dt: f64, params: &Params) -> Result<State> {
    let grid = state.grid();
    state.validate(params)?;
    let m_half = friction_flow(&state.m, 0.5 * dt, params);

    let rho0 = state.rho.values();
    let m0 = m_half.values();
    let j0 = state.j.values();
    let n = rho0.len();

    let check = |r: &[f64]| -> Result<()> {
        let min = r.iter().copied().fold(f64::INFINITY, f64::min);
        if min >= params.rho_floor && min.is_finite() {
            Ok(())
        } else {
            Err(NskError::Positivity {
                min,
                floor: params.rho_floor,
            })
        }
    };

    // Shu–Osher form of SSP-RK3.
    let (a_r, a_m, a_j) = rhs_values(grid, rho0, m0, j0, params);
    let r1: Vec<f64> = (0..n).map(|i| rho0[i] + dt * a_r[i]).collect();
    let m1: Vec<f64> = (0..n).map(|i| m0[i] + dt * a_m[i]).collect();
    let j1: Vec<f64> = (0..n).map(|i| j0[i] + dt * a_j[i]).collect();
    check(&r1)?;

    let (b_r, b_m, b_j) = rhs_values(grid, &r1, &m1, &j1, params);
    let r2: Vec<f64> = (0..n)
        .map(|i| 0.75 * rho0[i] + 0.25 * (r1[i] + dt * b_r[i]))
        .collect();
    let m2: Vec<f64> = (0..n)
        .map(|i| 0.75 * m0[i] + 0.25 * (m1[i] + dt * b_m[i]))
        .collect();
    let j2: Vec<f64> = (0..n)
        .map(|i| 0.75 * j0[i] + 0.25 * (j1[i] + dt * b_j[i]))
        .collect();
    check(&r2)?;

    let (c_r, c_m, c_j) = rhs_values(grid, &r2, &m2, &j2, params);
    // u₀/3 + 2y/3 written as y + (u₀ − y)/3: the rounded weights 1/3 and 2/3
    // sum to 1 − 2⁻⁵⁴, which would otherwise leak mass every step.
    let third = 1.0 / 3.0;
    let last = |u0: &[f64], u2: &[f64], du: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let y = u2[i] + dt * du[i];
                y + third * (u0[i] - y)
            })
            .collect()
    };
    let r3 = last(rho0, &r2, &c_r);
    let m3 = last(m0, &m2, &c_m);
    let j3 = last(j0, &j2, &c_j);
    check(&r3)?;

    let out = State {
        time: state.time + dt,
        rho: Field::from_vec(grid, r3),
        m: friction_flow(&Field::from_vec(grid, m3), 0.5 * dt, params),
        j: Field::from_vec(grid, j3),
    };
    if !(out.m.is_finite() && out.j.is_finite()) {
        return Err(NskError::NonFinite("step"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Fraction of [`stability_limit`] used when `fixed_dt` is unset.
    pub c_cfl: f64,
    pub fixed_dt: Option<f64>,
    pub sample_every: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            c_cfl: 0.3,
            fixed_dt: None,
            sample_every: 0.01,
        }
    }
}

/// Sample times `t₀, t₀ + Δ, …, t_end` (the last one always `t_end`).
pub(crate) fn sample_times(t0: f64, t_end: f64, every: f64) -> Vec<f64> {
    let count = ((t_end - t0) / every - 1e-9).ceil().max(1.0) as usize;
    let mut out: Vec<f64> = (0..count).map(|k| t0 + every * k as f64).collect();
    out.push(t_end);
    out
}

/// Dissipation rates `(friction, viscous)` at one state:
/// `(1/ε²)∫m²/ρ` and `(2ν/ε)∫μ_L|∂ₓu|² + (ν/ε)∫λ_L|∂ₓu|²`.
pub fn dissipation_rates(state: &State, params: &Params) -> (f64, f64) {
    let grid = state.grid();
    let rho = state.rho.values();
    let m = state.m.values();
    let friction = if params.friction {
        let eps2 = params.epsilon * params.epsilon;
        grid.integrate_values(&m.iter().zip(rho).map(|(m, r)| m * m / r).collect::<Vec<_>>())
            / eps2
    } else {
        0.0
    };
    let viscous = if params.nu > 0.0 {
        let u: Vec<f64> = m.iter().zip(rho).map(|(m, r)| m / r).collect();
        let ux = grid.derivative_values(&u, 1, false);
        let integrand: Vec<f64> = rho
            .iter()
            .zip(&ux)
            .map(|(&r, &d)| (2.0 * params.mu_lame0(r) + params.lambda_lame0(r)) * d * d)
            .collect();
        params.nu / params.epsilon * grid.integrate_values(&integrand)
    } else {
        0.0
    };
    (friction, viscous)
}

/// Advance `init` to `t_end`, storing a snapshot and a [`DiagRecord`] at every
/// sample time. Time steps land exactly on sample times. Dissipation integrals
/// are accumulated with the trapezoid rule at step resolution.
pub fn simulate(init: &State, t_end: f64, params: &Params, opts: &SimOptions) -> Result<Trajectory> {
    if !(t_end > init.time) {
        return Err(NskError::InvalidParams(format!(
            "t_end = {t_end} must exceed the initial time {}",
            init.time
        )));
    }
    if !(opts.sample_every > 0.0) {
        return Err(NskError::InvalidParams("sample interval must be positive".into()));
    }
    init.validate(params).map_err(|e| e.at(init.time))?;
    let targets = sample_times(init.time, t_end, opts.sample_every);

    let mut state = init.clone();
    let mut rates = dissipation_rates(&state, params);
    let mut acc = (0.0, 0.0);
    let mut steps = 0usize;
    let mut max_dt: f64 = 0.0;
    let mut min_dt = f64::INFINITY;

    let mut snapshots = vec![state.clone()];
    let mut diagnostics = vec![DiagRecord::from_state(&state, params, acc)?];

    for &target in &targets[1..] {
        while state.time < target {
            let limit = stability_limit(&state, params);
            let mut dt = match opts.fixed_dt {
                Some(dt) => dt,
                None => opts.c_cfl * limit,
            };
            let remaining = target - state.time;
            if remaining <= dt * (1.0 + 1e-9) {
                dt = remaining;
            }
            if dt > limit * (1.0 + 1e-12) {
                return Err(NskError::Cfl { dt, limit }.at(state.time));
            }
            let next = step_unchecked(&state, dt, params).map_err(|e| e.at(state.time))?;
            let next_rates = dissipation_rates(&next, params);
            acc.0 += 0.5 * dt * (rates.0 + next_rates.0);
            acc.1 += 0.5 * dt * (rates.1 + next_rates.1);
            rates = next_rates;
            state = next;
            if remaining <= dt * (1.0 + 1e-9) {
                state.time = target;
            }
            steps += 1;
            max_dt = max_dt.max(dt);
            min_dt = min_dt.min(dt);
        }
        diagnostics.push(DiagRecord::from_state(&state, params, acc).map_err(|e| e.at(state.time))?);
        snapshots.push(state.clone());
    }

    Ok(Trajectory {
        kind: TrajectoryKind::Relaxation,
        params: params.clone(),
        snapshots,
        diagnostics,
        steps,
        max_dt,
        min_dt,
    })
}

/// Fill the relative-entropy columns of `traj.diagnostics` against a
/// time-aligned sequence of reference lifts.
pub fn annotate_relative(
    traj: &mut Trajectory,
    lifts: &[crate::darcy::StrongLift],
) -> Result<()> {
    if lifts.len() != traj.snapshots.len() {
        return Err(NskError::Mismatch(format!(
            "{} snapshots vs {} reference states",
            traj.snapshots.len(),
            lifts.len()
        )));
    }
    for ((snap, lift), rec) in traj
        .snapshots
        .iter()
        .zip(lifts)
        .zip(traj.diagnostics.iter_mut())
    {
        let rel = entropy::relative_entropy(snap, lift, &traj.params)?;
        rec.psi_gamma = rel.psi_gamma;
        rec.h_e_rel_total = rel.h_e_part;
        rec.rel_kinetic = rel.kinetic;
        rec.rel_drift = rel.drift;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{BumpSpec, LameMode};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn drift_velocity_cases() {
        let g = grid(64);
        let p = Params::default();
        let flat = Field::constant(&g, 1.5);
        assert!(drift_velocity(&flat, &p).unwrap().max_abs() < 1e-14);

        let rho = Field::from_fn(&g, |x| 2.0 + x.sin());
        let v = drift_velocity(&rho, &p).unwrap();
        let ex = Field::from_fn(&g, |x| x.cos() / (2.0 + x.sin()));
        assert!(v.sub(&ex).max_abs() < 1e-12);

        let p1 = Params { s: 1.0, ..p };
        let rho = Field::from_fn(&g, |x| 1.5 + 0.3 * x.sin() + 0.1 * (2.0 * x).cos());
        assert!(drift_velocity_residual(&rho, &p1).unwrap() < 1e-11);
        assert!(drift_velocity(&Field::constant(&g, -1.0), &p1).is_err());
    }

    #[test]
    fn stress_closed_forms() {
        let g = grid(64);
        let p = Params {
            s: 1.0,
            ..Params::default()
        };
        let rho = Field::constant(&g, 2.0);
        let u = Field::from_fn(&g, |x| x.sin());
        let s2 = stress_s2(&rho, &u, &p).unwrap();
        let ex = Field::from_fn(&g, |x| 8.0 * x.cos());
        assert!(s2.sub(&ex).max_abs() < 1e-12);
        assert!(stress_s2(&rho, &Field::constant(&g, 3.0), &p).unwrap().max_abs() < 1e-12);

        let q = Params {
            s: -1.0,
            nu: 0.3,
            lame_mode: LameMode::BdMatched,
            ..Params::default()
        };
        let tnu = stress_tnu(&rho, &u, &q).unwrap();
        let ex = Field::from_fn(&g, |x| 4.0 * 0.3 * x.cos());
        assert!(tnu.sub(&ex).max_abs() < 1e-12);
        let q0 = Params { nu: 0.0, ..q.clone() };
        assert_eq!(stress_tnu(&rho, &u, &q0).unwrap().max_abs(), 0.0);

        // s = −1: λ = 0 and s₁ = ρ∂ₓv.
        let rho = Field::from_fn(&g, |x| 1.0 + 0.2 * x.cos());
        let v = drift_velocity(&rho, &q).unwrap();
        let s1 = stress_s1(&rho, &v, &q).unwrap();
        let alt = rho.mul(&deriv(&v, 1).unwrap());
        assert!(s1.sub(&alt).max_abs() < 1e-14);
        let v0 = drift_velocity(&Field::constant(&g, 1.0), &q).unwrap();
        assert!(stress_s1(&Field::constant(&g, 1.0), &v0, &q).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn bohm_identity_holds_for_resolved_fields() {
        let g = grid(64);
        for s in [-1.0, 0.0, 1.0, 2.5] {
            let p = Params {
                s,
                ..Params::default()
            };
            let flat = Field::constant(&g, 2.0);
            assert!(bohm_residual(&flat, &p).unwrap() < 1e-12);
            let rho = Field::from_fn(&g, |x| 2.0 + 0.3 * x.sin());
            assert!(bohm_residual(&rho, &p).unwrap() < 1e-9, "s = {s}");
        }
    }

    #[test]
    fn bohm_residual_self_converges_on_coarse_grids() {
        // Non-polynomial μ only; for odd integer s the chain is exact at N = 16.
        for s in [-1.0, 0.0, 0.5] {
            let p = Params {
                s,
                ..Params::default()
            };
            let r16 = bohm_residual(&Field::from_fn(&grid(16), |x| 2.0 + 0.3 * x.sin()), &p).unwrap();
            let r32 = bohm_residual(&Field::from_fn(&grid(32), |x| 2.0 + 0.3 * x.sin()), &p).unwrap();
            assert!(r16 / r32 > 1e2, "s = {s}: {r16:e} -> {r32:e}");
        }
    }

    #[test]
    fn equilibrium_and_uniform_flow_rhs() {
        let g = grid(32);
        let p = Params::default();
        let st = State::new(
            0.0,
            Field::constant(&g, 1.3),
            Field::constant(&g, 0.0),
            Field::constant(&g, 0.0),
        )
        .unwrap();
        let (a, b, c) = rhs_scaled(&st, &p).unwrap();
        assert!(a.max_abs() < 1e-13 && b.max_abs() < 1e-13 && c.max_abs() < 1e-13);

        let st = State::new(
            0.0,
            Field::constant(&g, 1.3),
            Field::constant(&g, 0.7),
            Field::constant(&g, 0.0),
        )
        .unwrap();
        let (a, b, _) = rhs_scaled(&st, &p).unwrap();
        assert!(a.max_abs() < 1e-12 && b.max_abs() < 1e-12);
    }

    /// Fourth-order centred differences on the collocation nodes.
    fn fd4(f: &[f64], dx: f64) -> Vec<f64> {
        let n = f.len();
        (0..n)
            .map(|i| {
                let at = |k: isize| f[((i as isize + k).rem_euclid(n as isize)) as usize];
                (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * dx)
            })
            .collect()
    }

    /// Independent assembly of the same right-hand side with finite
    /// differences and no dealiasing.
    fn rhs_fd(rho: &[f64], m: &[f64], j: &[f64], dx: f64, p: &Params) -> [Vec<f64>; 3] {
        let n = rho.len();
        let u: Vec<f64> = (0..n).map(|i| m[i] / rho[i]).collect();
        let v: Vec<f64> = (0..n).map(|i| j[i] / rho[i]).collect();
        let ux = fd4(&u, dx);
        let vx = fd4(&v, dx);
        let cap = |r: f64| {
            let mu = r.powf(0.5 * (p.s + 3.0));
            let lam = 2.0 * (0.5 * (p.s + 3.0) * r.powf(0.5 * (p.s + 1.0)) * r - mu);
            mu + 0.5 * lam
        };
        let fm: Vec<f64> = (0..n)
            .map(|i| {
                let r = rho[i];
                let visc = p.nu * (2.0 * p.mu_lame0(r) + p.lambda_lame0(r)) * ux[i];
                m[i] * m[i] / r + p.p0(r) - visc - cap(r) * vx[i]
            })
            .collect();
        let fj: Vec<f64> = (0..n)
            .map(|i| j[i] * m[i] / rho[i] + cap(rho[i]) * ux[i])
            .collect();
        let e = p.epsilon;
        [
            fd4(m, dx).into_iter().map(|d| -d / e).collect(),
            fd4(&fm, dx).into_iter().map(|d| -d / e).collect(),
            fd4(&fj, dx).into_iter().map(|d| -d / e).collect(),
        ]
    }

    #[test]
    fn rhs_matches_fourth_order_finite_differences() {
        let p = Params {
            s: 0.0,
            nu: 0.05,
            epsilon: 0.5,
            bump: BumpSpec {
                amplitude: 0.3,
                center: 1.0,
                halfwidth: 0.5,
            },
            ..Params::default()
        };
        let mut errs = Vec::new();
        for n in [64usize, 128] {
            let g = grid(n);
            let rho = Field::from_fn(&g, |x| 1.0 + 0.2 * x.sin() + 0.05 * (2.0 * x).cos());
            let m = Field::from_fn(&g, |x| 0.3 * x.cos() - 0.1 * (3.0 * x).sin());
            let j = Field::from_fn(&g, |x| 0.2 * (x + 0.4).sin());
            let st = State::new(0.0, rho, m, j).unwrap();
            let (a, b, c) = rhs_scaled(&st, &p).unwrap();
            let fd = rhs_fd(st.rho.values(), st.m.values(), st.j.values(), g.dx(), &p);
            let err = [a, b, c]
                .iter()
                .zip(&fd)
                .map(|(s, f)| {
                    s.values()
                        .iter()
                        .zip(f)
                        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
                })
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        assert!(errs[1] < 1e-3, "{errs:?}");
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.5, "fd order {order}: {errs:?}");
    }

    #[test]
    fn step_preserves_equilibrium_and_decays_uniform_momentum() {
        let g = grid(32);
        let p = Params::default();
        let st = State::new(
            0.0,
            Field::constant(&g, 1.2),
            Field::constant(&g, 0.0),
            Field::constant(&g, 0.0),
        )
        .unwrap();
        let dt = 0.5 * stability_limit(&st, &p);
        let next = step(&st, dt, &p).unwrap();
        assert!(next.rho.sub(&st.rho).max_abs() < 1e-14);
        assert!(next.m.max_abs() < 1e-14 && next.j.max_abs() < 1e-14);

        let m0 = 0.4;
        let uni = State::new(0.0, Field::constant(&g, 1.2), Field::constant(&g, m0), Field::constant(&g, 0.0)).unwrap();
        let dt = 0.5 * stability_limit(&uni, &p);
        let next = step(&uni, dt, &p).unwrap();
        let exact = m0 * (-dt / (p.epsilon * p.epsilon)).exp();
        assert!((next.m.values()[3] - exact).abs() < 1e-14 * m0);
        assert!(step(&uni, 2.0 * stability_limit(&uni, &p), &p).is_err());
    }

    #[test]
    fn strang_step_local_error_is_third_order() {
        let g = grid(32);
        let p = Params {
            epsilon: 0.5,
            ..Params::default()
        };
        let rho = Field::from_fn(&g, |x| 1.0 + 0.2 * x.sin());
        let m = Field::from_fn(&g, |x| 0.1 * x.cos());
        let st = State::with_drift_constraint(0.0, rho, m, &p).unwrap().dealiased();
        let base = 0.5 * stability_limit(&st, &p);
        let mut diffs = Vec::new();
        for k in 0..3 {
            let dt = base / 2f64.powi(k);
            let one = step(&st, dt, &p).unwrap();
            let half = step(&step(&st, 0.5 * dt, &p).unwrap(), 0.5 * dt, &p).unwrap();
            let d = one.rho.sub(&half.rho).max_abs()
                + one.m.sub(&half.m).max_abs()
                + one.j.sub(&half.j).max_abs();
            diffs.push(d);
        }
        let order = ((diffs[1] / diffs[2]).log2() + (diffs[0] / diffs[1]).log2()) / 2.0;
        assert!(order >= 2.7, "local order {order}: {diffs:?}");
    }

    #[test]
    fn simulate_equilibrium_is_stationary() {
        let g = grid(32);
        let p = Params::default();
        let st = State::new(
            0.0,
            Field::constant(&g, 1.0),
            Field::constant(&g, 0.0),
            Field::constant(&g, 0.0),
        )
        .unwrap();
        let opts = SimOptions {
            sample_every: 0.05,
            ..SimOptions::default()
        };
        let traj = simulate(&st, 0.2, &p, &opts).unwrap();
        assert_eq!(traj.snapshots.len(), 5);
        assert!((traj.last().time - 0.2).abs() < 1e-15);
        let m0 = traj.diagnostics[0].mass;
        let e0 = traj.diagnostics[0].energy;
        for d in &traj.diagnostics {
            assert!((d.mass - m0).abs() < 1e-12 * m0);
            assert!((d.energy - e0).abs() < 1e-12 * e0);
        }
    }

    #[test]
    fn sample_time_layout() {
        let t = sample_times(0.0, 0.5, 0.1);
        assert_eq!(t.len(), 6);
        assert_eq!(*t.last().unwrap(), 0.5);
        let t = sample_times(0.0, 0.25, 0.1);
        assert_eq!(t, vec![0.0, 0.1, 0.2, 0.25]);
    }

    #[test]
    fn positivity_loss_is_reported_with_time() {
        let g = grid(32);
        let p = Params {
            rho_floor: 0.5,
            epsilon: 1.0,
            friction: false,
            ..Params::default()
        };
        // Converging flow piles mass up and drains it elsewhere.
        let rho = Field::constant(&g, 0.6);
        let m = Field::from_fn(&g, |x| 0.5 * x.sin());
        let st = State::with_drift_constraint(0.0, rho, m, &p).unwrap();
        let err = simulate(&st, 1.0, &p, &SimOptions::default()).unwrap_err();
        assert!(matches!(err, NskError::AtTime { .. }), "{err}");
        assert!(err.is_solver_failure());
    }
}
