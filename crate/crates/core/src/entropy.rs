//! Entropy, entropy flux and relative-entropy functionals, plus the
//! verification harnesses built on them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constitutive::{bump_e, h_e_rel_unchecked, h_gamma_rel_unchecked, Params};
use crate::darcy::StrongLift;
use crate::dynamics::{State, Trajectory};
use crate::error::{NskError, Result};
use crate::grid::{deriv, Field};

/// Per-sample scalar diagnostics. The relative columns are NaN until a
/// reference trajectory is attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub psi_gamma: f64,
    pub h_e_rel_total: f64,
    pub friction_dissipation: f64,
    pub viscous_dissipation: f64,
    pub rel_kinetic: f64,
    pub rel_drift: f64,
}

impl DiagRecord {
    pub(crate) fn from_state(state: &State, params: &Params, acc: (f64, f64)) -> Result<DiagRecord> {
        Ok(DiagRecord {
            time: state.time,
            mass: crate::grid::integrate(&state.rho),
            energy: entropy_total(state, params)?,
            psi_gamma: f64::NAN,
            h_e_rel_total: f64::NAN,
            friction_dissipation: acc.0,
            viscous_dissipation: acc.1,
            rel_kinetic: f64::NAN,
            rel_drift: f64::NAN,
        })
    }

    pub fn dissipated(&self) -> f64 {
        self.friction_dissipation + self.viscous_dissipation
    }
}

/// `∫(½m²/ρ + h(ρ) + ½J²/ρ)`.
pub fn entropy_total(state: &State, params: &Params) -> Result<f64> {
    state.rho.check_positive(params.rho_floor)?;
    let dens: Vec<f64> = state
        .rho
        .values()
        .iter()
        .zip(state.m.values())
        .zip(state.j.values())
        .map(|((&r, &m), &j)| 0.5 * (m * m + j * j) / r + params.h0(r))
        .collect();
    Ok(state.grid().integrate_values(&dens))
}

/// `∫(½m²/ρ + h(ρ) + ½k(ρ)|∂ₓρ|²)`, the entropy before augmentation.
pub fn entropy_korteweg(state: &State, params: &Params) -> Result<f64> {
    state.rho.check_positive(params.rho_floor)?;
    let rx = deriv(&state.rho, 1)?;
    let dens: Vec<f64> = state
        .rho
        .values()
        .iter()
        .zip(state.m.values())
        .zip(rx.values())
        .map(|((&r, &m), &d)| 0.5 * m * m / r + params.h0(r) + 0.5 * params.k0(r) * d * d)
        .collect();
    Ok(state.grid().integrate_values(&dens))
}

/// Difference of the two entropy forms; vanishes when `J = ∂ₓμ(ρ)`.
pub fn entropy_two_form_residual(state: &State, params: &Params) -> Result<f64> {
    Ok(entropy_total(state, params)? - entropy_korteweg(state, params)?)
}

/// Pointwise entropy flux
/// `Q = ½m³/ρ² + m h′(ρ) + ½mJ²/ρ² − 2νμ_L ∂ₓu·m/ρ − νλ_L ∂ₓu·m/ρ`.
pub fn entropy_flux(state: &State, params: &Params) -> Result<Field> {
    state.validate(params)?;
    let u = state.velocity();
    let ux = if params.nu == 0.0 {
        Field::constant(state.grid(), 0.0)
    } else {
        deriv(&u, 1)?
    };
    let q: Vec<f64> = (0..state.rho.len())
        .map(|i| {
            let r = state.rho.values()[i];
            let m = state.m.values()[i];
            let j = state.j.values()[i];
            let visc = params.nu * (2.0 * params.mu_lame0(r) + params.lambda_lame0(r)) * ux.values()[i];
            0.5 * m * m * m / (r * r) + m * params.h1(r) + 0.5 * m * j * j / (r * r) - visc * m / r
        })
        .collect();
    Ok(Field::from_vec(state.grid(), q))
}

/// Components of the relative entropy of a state against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeEntropy {
    pub full: f64,
    pub psi_gamma: f64,
    pub h_e_part: f64,
    pub kinetic: f64,
    pub drift: f64,
    /// `|Bregman form − closed form| / |closed form|`.
    pub bregman_residual: f64,
}

/// Closed form `½ρ(u−ū)² + ½ρ(v−v̄)² + h_γ(ρ|ρ̄) + h_e(ρ|ρ̄)` and the Bregman
/// form `η(U) − η(Ū) − ∇η(Ū)·(U − Ū)` at one point.
pub fn relative_entropy_density(
    u: (f64, f64, f64),
    ubar: (f64, f64, f64),
    params: &Params,
) -> (f64, f64) {
    let (r, m, j) = u;
    let (rb, mb, jb) = ubar;
    let (uu, vv) = (m / r, j / r);
    let (ub, vb) = (mb / rb, jb / rb);
    let closed = 0.5 * r * ((uu - ub).powi(2) + (vv - vb).powi(2))
        + h_gamma_rel_unchecked(r, rb, params.gamma)
        + h_e_rel_unchecked(r, rb, &params.bump);
    let eta = |r: f64, m: f64, j: f64| 0.5 * (m * m + j * j) / r + params.h0(r);
    let eta_rho = -0.5 * (ub * ub + vb * vb) + params.h1(rb);
    let bregman = eta(r, m, j) - eta(rb, mb, jb) - eta_rho * (r - rb) - ub * (m - mb) - vb * (j - jb);
    (closed, bregman)
}

fn check_aligned(state: &State, lift: &StrongLift) -> Result<()> {
    if !state.rho.same_grid(&lift.rho_bar) {
        return Err(NskError::Mismatch("state and reference on different grids".into()));
    }
    let tol = 1e-9 * state.time.abs().max(1.0);
    if (state.time - lift.time).abs() > tol {
        return Err(NskError::Mismatch(format!(
            "state at t = {} vs reference at t = {}",
            state.time, lift.time
        )));
    }
    Ok(())
}

pub fn relative_entropy(state: &State, lift: &StrongLift, params: &Params) -> Result<RelativeEntropy> {
    check_aligned(state, lift)?;
    state.rho.check_positive(params.rho_floor)?;
    lift.rho_bar.check_positive(params.rho_floor)?;
    let n = state.rho.len();
    let mut kin = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut hg = vec![0.0; n];
    let mut he = vec![0.0; n];
    let mut breg = vec![0.0; n];
    for i in 0..n {
        let r = state.rho.values()[i];
        let rb = lift.rho_bar.values()[i];
        let du = state.m.values()[i] / r - lift.u_bar.values()[i];
        let dv = state.j.values()[i] / r - lift.v_bar.values()[i];
        kin[i] = 0.5 * r * du * du;
        drift[i] = 0.5 * r * dv * dv;
        hg[i] = h_gamma_rel_unchecked(r, rb, params.gamma);
        he[i] = h_e_rel_unchecked(r, rb, &params.bump);
        breg[i] = relative_entropy_density(
            (r, state.m.values()[i], state.j.values()[i]),
            (rb, lift.m_bar.values()[i], lift.j_bar.values()[i]),
            params,
        )
        .1;
    }
    let g = state.grid();
    let kinetic = g.integrate_values(&kin);
    let drift = g.integrate_values(&drift);
    let h_gamma = g.integrate_values(&hg);
    let h_e_part = g.integrate_values(&he);
    let psi_gamma = kinetic + drift + h_gamma;
    let full = psi_gamma + h_e_part;
    let b = g.integrate_values(&breg);
    let bregman_residual = if full == 0.0 {
        b.abs()
    } else {
        (b - full).abs() / full.abs()
    };
    Ok(RelativeEntropy {
        full,
        psi_gamma,
        h_e_part,
        kinetic,
        drift,
        bregman_residual,
    })
}

/// Generic JSON shape shared by all verification reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub constants: BTreeMap<String, f64>,
    pub max_residual: f64,
    pub violations: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSample {
    pub time: f64,
    /// `E(t) + D(t) − E(0)`; negative means strictly dissipative.
    pub defect: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub samples: Vec<DefectSample>,
    pub max_defect: f64,
    pub max_abs_defect: f64,
    pub violations: Vec<f64>,
    pub pass: bool,
}

impl DissipationReport {
    pub fn summary(&self) -> CheckSummary {
        CheckSummary {
            name: "dissipation".into(),
            constants: BTreeMap::from([("max_abs_defect".to_string(), self.max_abs_defect)]),
            max_residual: self.max_defect,
            violations: self.violations.iter().map(|t| format!("t = {t}")).collect(),
            pass: self.pass,
        }
    }
}

/// Default `C_tol` of the defect tolerance.
pub const DISSIPATION_C_TOL: f64 = 10.0;

/// Time-integrated energy inequality
/// `E(t) + ∫₀ᵗ D ≤ E(0) + tol(t)`, `tol = C_tol·dt²·t·scale + 10⁻¹²|E(0)|`,
/// with `scale` the mean dissipation rate plus `|E(0)|` per unit time.
pub fn check_dissipation(traj: &Trajectory, c_tol: f64) -> Result<DissipationReport> {
    let d = &traj.diagnostics;
    if d.len() < 3 {
        return Err(NskError::InvalidParams(format!(
            "dissipation check needs at least 3 samples, got {}",
            d.len()
        )));
    }
    let e0 = d[0].energy;
    let t0 = d[0].time;
    let last = d.last().unwrap();
    let span = (last.time - t0).max(f64::MIN_POSITIVE);
    let scale = (last.dissipated() + e0.abs()) / span;
    let dt = traj.max_dt;
    let mut samples = Vec::with_capacity(d.len());
    let mut violations = Vec::new();
    let mut max_defect = f64::NEG_INFINITY;
    let mut max_abs: f64 = 0.0;
    for rec in d {
        let defect = rec.energy + rec.dissipated() - e0;
        let tol = c_tol * dt * dt * (rec.time - t0) * scale + 1e-12 * e0.abs();
        if !(defect <= tol) {
            violations.push(rec.time);
        }
        max_defect = max_defect.max(defect);
        max_abs = max_abs.max(defect.abs());
        samples.push(DefectSample {
            time: rec.time,
            defect,
            tol,
        });
    }
    Ok(DissipationReport {
        pass: violations.is_empty(),
        samples,
        max_defect,
        max_abs_defect: max_abs,
        violations,
    })
}

/// Integrals of every term on the right side of the relative-entropy
/// identity at a single time, signed as they enter `d/dt ∫η(U|Ū)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermLedger {
    pub transport_u: f64,
    pub transport_v: f64,
    pub pressure: f64,
    pub friction: f64,
    pub error_term: f64,
    pub mu2_cross: f64,
    pub mu1_cross: f64,
    pub viscous_mu: f64,
    pub viscous_lambda: f64,
    pub viscous_mu_cross: f64,
    pub viscous_lambda_cross: f64,
}

impl TermLedger {
    pub fn terms(&self) -> [(&'static str, f64); 11] {
        [
            ("transport_u", self.transport_u),
            ("transport_v", self.transport_v),
            ("pressure", self.pressure),
            ("friction", self.friction),
            ("error_term", self.error_term),
            ("mu2_cross", self.mu2_cross),
            ("mu1_cross", self.mu1_cross),
            ("viscous_mu", self.viscous_mu),
            ("viscous_lambda", self.viscous_lambda),
            ("viscous_mu_cross", self.viscous_mu_cross),
            ("viscous_lambda_cross", self.viscous_lambda_cross),
        ]
    }

    pub fn sum(&self) -> f64 {
        self.terms().iter().map(|(_, v)| v).sum()
    }
}

pub fn check_relative_entropy_terms(
    state: &State,
    lift: &StrongLift,
    params: &Params,
) -> Result<TermLedger> {
    check_aligned(state, lift)?;
    state.rho.check_positive(params.rho_floor)?;
    lift.rho_bar.check_positive(params.rho_floor)?;
    let g = state.grid();
    let n = state.rho.len();
    let rho = state.rho.values();
    let rb = lift.rho_bar.values();
    let u = state.velocity();
    let v = state.drift();
    let dx = |f: &Field, k: u8| -> Result<Vec<f64>> { Ok(deriv(f, k)?.into_values()) };
    let ubx = dx(&lift.u_bar, 1)?;
    let ubxx = dx(&lift.u_bar, 2)?;
    let vbx = dx(&lift.v_bar, 1)?;
    let vbxx = dx(&lift.v_bar, 2)?;
    let rx = dx(&state.rho, 1)?;
    let rbx = dx(&lift.rho_bar, 1)?;
    let du_field = u.sub(&lift.u_bar);
    let dux = if params.nu > 0.0 {
        dx(&du_field, 1)?
    } else {
        vec![0.0; n]
    };
    let inv_eps = 1.0 / params.epsilon;
    let eps2 = params.epsilon * params.epsilon;

    let mut acc = [0.0f64; 11];
    for i in 0..n {
        let r = rho[i];
        let du = du_field.values()[i];
        let dv = v.values()[i] - lift.v_bar.values()[i];
        let prel = crate::constitutive::rel_pressure_unchecked(r, rb[i], params);
        let t = [
            -inv_eps * r * ubx[i] * du * du,
            -inv_eps * r * ubx[i] * dv * dv,
            -inv_eps * prel * ubx[i],
            if params.friction { -r * du * du / eps2 } else { 0.0 },
            -lift.e_bar.values()[i] * r / rb[i] * du,
            -inv_eps
                * r
                * (params.mu2(r) * rx[i] - params.mu2(rb[i]) * rbx[i])
                * (dv * ubx[i] - du * vbx[i]),
            -inv_eps * r * (params.mu1(r) - params.mu1(rb[i])) * (dv * ubxx[i] - du * vbxx[i]),
            -2.0 * params.nu * inv_eps * params.mu_lame0(r) * dux[i] * dux[i],
            -params.nu * inv_eps * params.lambda_lame0(r) * dux[i] * dux[i],
            -2.0 * params.nu * inv_eps * params.mu_lame0(r) * ubx[i] * dux[i],
            -params.nu * inv_eps * params.lambda_lame0(r) * ubx[i] * dux[i],
        ];
        for (a, x) in acc.iter_mut().zip(t) {
            *a += x;
        }
    }
    let w = g.quadrature_weight();
    let a = acc.map(|x| x * w);
    Ok(TermLedger {
        transport_u: a[0],
        transport_v: a[1],
        pressure: a[2],
        friction: a[3],
        error_term: a[4],
        mu2_cross: a[5],
        mu1_cross: a[6],
        viscous_mu: a[7],
        viscous_lambda: a[8],
        viscous_mu_cross: a[9],
        viscous_lambda_cross: a[10],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpEnergyReport {
    /// `∫e(ρ|ρ̄)(T) − ∫e(ρ|ρ̄)(0)`.
    pub lhs: f64,
    pub transport_part: f64,
    pub gradient_part: f64,
    pub residual: f64,
    pub samples: usize,
}

impl BumpEnergyReport {
    pub fn summary(&self, tol: f64) -> CheckSummary {
        let pass = self.residual.abs() <= tol;
        CheckSummary {
            name: "bump_energy_identity".into(),
            constants: BTreeMap::from([
                ("lhs".to_string(), self.lhs),
                ("transport_part".to_string(), self.transport_part),
                ("gradient_part".to_string(), self.gradient_part),
            ]),
            max_residual: self.residual.abs(),
            violations: if pass {
                vec![]
            } else {
                vec![format!("residual {:e} > {:e}", self.residual, tol)]
            },
            pass,
        }
    }
}

/// Bump-energy identity
/// `∫e(ρ|ρ̄)|₀ᵀ = −(1/ε)∫∫∂ₓm̄·e′(ρ|ρ̄) + (1/ε)∫∫(e″(ρ)∂ₓρ − e″(ρ̄)∂ₓρ̄)(m − m̄)`
/// with trapezoid quadrature over the samples.
pub fn check_bump_energy_identity(weak: &Trajectory, strong: &[StrongLift], params: &Params) -> Result<BumpEnergyReport> {
    if weak.snapshots.len() != strong.len() || strong.len() < 2 {
        return Err(NskError::Mismatch(format!(
            "{} weak samples vs {} strong samples",
            weak.snapshots.len(),
            strong.len()
        )));
    }
    let bump = &params.bump;
    let inv_eps = 1.0 / params.epsilon;
    let mut level = Vec::with_capacity(strong.len());
    let mut rate_a = Vec::with_capacity(strong.len());
    let mut rate_b = Vec::with_capacity(strong.len());
    for (s, l) in weak.snapshots.iter().zip(strong) {
        check_aligned(s, l)?;
        let g = s.grid();
        let n = s.rho.len();
        let rho = s.rho.values();
        let rb = l.rho_bar.values();
        let mbx = deriv(&l.m_bar, 1)?.into_values();
        let rx = deriv(&s.rho, 1)?.into_values();
        let rbx = deriv(&l.rho_bar, 1)?.into_values();
        let mut e_rel = vec![0.0; n];
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for i in 0..n {
            e_rel[i] = h_e_rel_unchecked(rho[i], rb[i], bump);
            let ep_rel = bump_e(rho[i], bump, 1) - bump_e(rb[i], bump, 1) - bump_e(rb[i], bump, 2) * (rho[i] - rb[i]);
            a[i] = -inv_eps * mbx[i] * ep_rel;
            b[i] = inv_eps
                * (bump_e(rho[i], bump, 2) * rx[i] - bump_e(rb[i], bump, 2) * rbx[i])
                * (s.m.values()[i] - l.m_bar.values()[i]);
        }
        level.push(g.integrate_values(&e_rel));
        rate_a.push(g.integrate_values(&a));
        rate_b.push(g.integrate_values(&b));
    }
    let times: Vec<f64> = strong.iter().map(|l| l.time).collect();
    let trap = |f: &[f64]| -> f64 {
        times
            .windows(2)
            .zip(f.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
            .sum()
    };
    let lhs = level.last().unwrap() - level[0];
    let transport_part = trap(&rate_a);
    let gradient_part = trap(&rate_b);
    Ok(BumpEnergyReport {
        lhs,
        transport_part,
        gradient_part,
        residual: lhs - transport_part - gradient_part,
        samples: strong.len(),
    })
}

/// Rectangle `[ρ_lo, ρ_hi] × [ρ̄_lo, ρ̄_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBox {
    pub rho: (f64, f64),
    pub rho_bar: (f64, f64),
}

impl DensityBox {
    pub fn square(lo: f64, hi: f64) -> DensityBox {
        DensityBox {
            rho: (lo, hi),
            rho_bar: (lo, hi),
        }
    }

    fn degenerate(&self) -> bool {
        self.rho.0 == self.rho.1 && self.rho_bar.0 == self.rho_bar.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    /// Constant of `ρ|μ′(ρ) − μ′(ρ̄)|² ≤ C h_γ(ρ|ρ̄)`.
    pub drift_constant: f64,
    /// Constant of `|ρ^{γ/2} − ρ̄^{γ/2}|² ≤ C h_γ(ρ|ρ̄)`.
    pub gamma_constant: f64,
    pub drift_diagonal_limit: f64,
    pub gamma_diagonal_limit: f64,
    pub grid_points: usize,
    pub random_samples: usize,
    pub drift_random_max: f64,
    pub gamma_random_max: f64,
    pub violations: Vec<(f64, f64)>,
    pub note: Option<String>,
    pub pass: bool,
}

impl PointwiseReport {
    pub fn summary(&self) -> CheckSummary {
        CheckSummary {
            name: "pointwise_inequalities".into(),
            constants: BTreeMap::from([
                ("drift".to_string(), self.drift_constant),
                ("gamma".to_string(), self.gamma_constant),
            ]),
            max_residual: (self.drift_random_max / self.drift_constant)
                .max(self.gamma_random_max / self.gamma_constant),
            violations: self
                .violations
                .iter()
                .map(|(r, rb)| format!("rho = {r}, rho_bar = {rb}"))
                .collect(),
            pass: self.pass,
        }
    }
}

const NEAR_DIAGONAL: f64 = 1e-6;

fn pointwise_ratios(r: f64, rb: f64, p: &Params) -> (f64, f64) {
    if (r - rb).abs() < NEAR_DIAGONAL {
        return diagonal_limits(rb, p);
    }
    let hg = h_gamma_rel_unchecked(r, rb, p.gamma);
    let l8 = r * (p.mu1(r) - p.mu1(rb)).powi(2) / hg;
    let half = 0.5 * p.gamma;
    let rg = (r.powf(half) - rb.powf(half)).powi(2) / hg;
    (l8, rg)
}

/// Taylor limits of both ratios as `ρ → ρ̄`.
fn diagonal_limits(rb: f64, p: &Params) -> (f64, f64) {
    let l8 = 2.0 * rb * p.mu2(rb).powi(2) / (p.gamma * rb.powf(p.gamma - 2.0));
    (l8, 0.5 * p.gamma)
}

/// Brute-force maximization of both ratios on a `grid_points²` lattice of
/// the box (diagonal replaced by its Taylor limit), followed by
/// `random_samples` uniform draws that must stay within 1% of the maxima.
pub fn check_pointwise_inequalities(
    params: &Params,
    random_samples: usize,
    bx: DensityBox,
    grid_points: usize,
    seed: u64,
) -> Result<PointwiseReport> {
    if bx.rho.0 <= 0.0 || bx.rho_bar.0 <= 0.0 || bx.rho.1 < bx.rho.0 || bx.rho_bar.1 < bx.rho_bar.0 {
        return Err(NskError::InvalidParams(format!("invalid density box {bx:?}")));
    }
    if bx.degenerate() {
        let (l8, rg) = diagonal_limits(bx.rho_bar.0, params);
        return Ok(PointwiseReport {
            drift_constant: l8,
            gamma_constant: rg,
            drift_diagonal_limit: l8,
            gamma_diagonal_limit: rg,
            grid_points: 0,
            random_samples: 0,
            drift_random_max: 0.0,
            gamma_random_max: 0.0,
            violations: vec![],
            note: Some("degenerate box: diagonal only, skipped".into()),
            pass: true,
        });
    }
    let m = grid_points.max(2);
    let node = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (m - 1) as f64;
    let mut c8: f64 = 0.0;
    let mut cg: f64 = 0.0;
    let mut d8: f64 = 0.0;
    let mut dg: f64 = 0.0;
    for b in 0..m {
        let rb = node(bx.rho_bar.0, bx.rho_bar.1, b);
        let (l8, lg) = diagonal_limits(rb, params);
        d8 = d8.max(l8);
        dg = dg.max(lg);
        for a in 0..m {
            let r = node(bx.rho.0, bx.rho.1, a);
            let (x8, xg) = pointwise_ratios(r, rb, params);
            c8 = c8.max(x8);
            cg = cg.max(xg);
        }
    }
    let drift_constant = c8.max(d8);
    let gamma_constant = cg.max(dg);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut r8max: f64 = 0.0;
    let mut rgmax: f64 = 0.0;
    for _ in 0..random_samples {
        let r = rng.gen_range(bx.rho.0..=bx.rho.1);
        let rb = rng.gen_range(bx.rho_bar.0..=bx.rho_bar.1);
        let (x8, xg) = pointwise_ratios(r, rb, params);
        r8max = r8max.max(x8);
        rgmax = rgmax.max(xg);
        if x8 > 1.01 * drift_constant || xg > 1.01 * gamma_constant || !x8.is_finite() || !xg.is_finite() {
            violations.push((r, rb));
        }
    }
    Ok(PointwiseReport {
        drift_constant,
        gamma_constant,
        drift_diagonal_limit: d8,
        gamma_diagonal_limit: dg,
        grid_points: m,
        random_samples,
        drift_random_max: r8max,
        gamma_random_max: rgmax,
        pass: violations.is_empty() && drift_constant.is_finite() && gamma_constant.is_finite(),
        violations,
        note: None,
    })
}
