//! The diffusive limit `ρ̄_t = ∂ₓ(∂ₓp(ρ̄) − ∂ₓs₁(ρ̄))`, its lift to a strong
//! triple `(ρ̄, m̄, J̄)` and the residual `ē` of that triple in the scaled
//! momentum equation.
//!
//! Time integration uses an integrating-factor (Lawson) RK4 with the linear
//! operator `L = −Aκ⁴ − Bκ²` frozen per step; the remainder is explicit.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::Params;
use crate::dynamics::{sample_times, State, Trajectory, TrajectoryKind};
use crate::entropy::DiagRecord;
use crate::error::{NskError, Result};
use crate::grid::{deriv, Field, Grid};

/// Reference triple with its velocities and momentum residual.
#[derive(Debug, Clone)]
pub struct StrongLift {
    pub time: f64,
    pub rho_bar: Field,
    pub m_bar: Field,
    pub j_bar: Field,
    pub e_bar: Field,
    pub u_bar: Field,
    pub v_bar: Field,
}

impl StrongLift {
    /// Use a solution of the full system itself as the reference; its
    /// residual is zero.
    pub fn from_state(state: &State) -> StrongLift {
        StrongLift {
            time: state.time,
            rho_bar: state.rho.clone(),
            m_bar: state.m.clone(),
            j_bar: state.j.clone(),
            e_bar: Field::constant(state.grid(), 0.0),
            u_bar: state.velocity(),
            v_bar: state.drift(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.rho_bar.grid()
    }

    pub fn as_state(&self) -> State {
        State {
            time: self.time,
            rho: self.rho_bar.clone(),
            m: self.m_bar.clone(),
            j: self.j_bar.clone(),
        }
    }

    /// Max deviation from `m̄ = ε(−∂ₓp + ∂ₓs₁)` and `J̄ = ∂ₓμ(ρ̄)`.
    pub fn construction_residual(&self, params: &Params) -> Result<f64> {
        let (f, _) = darcy_flux(&self.rho_bar, params)?;
        let jb = crate::dynamics::drift_momentum(&self.rho_bar, params)?;
        Ok(self
            .m_bar
            .sub(&f.scale(params.epsilon))
            .max_abs()
            .max(self.j_bar.sub(&jb).max_abs()))
    }
}

/// `F = −∂ₓp(ρ̄) + ∂ₓs₁(ρ̄)` together with `v̄ = ∂ₓμ(ρ̄)/ρ̄`.
fn darcy_flux(rho: &Field, params: &Params) -> Result<(Field, Field)> {
    rho.check_positive(params.rho_floor)?;
    let grid = rho.grid();
    let v = crate::dynamics::drift_velocity(rho, params)?;
    let vx = grid.derivative_values(v.values(), 1, false);
    let inner: Vec<f64> = rho
        .values()
        .iter()
        .zip(&vx)
        .map(|(&r, &d)| -params.p0(r) + params.capillary_coeff(r) * d)
        .collect();
    let f = grid.derivative_values(&inner, 1, true);
    Ok((Field::from_vec(grid, f), v))
}

/// Right side of the gradient flow, `−∂ₓ(−∂ₓp(ρ̄) + ∂ₓs₁(ρ̄))`.
pub fn gf_rhs(rho_bar: &Field, params: &Params) -> Result<Field> {
    let (f, _) = darcy_flux(rho_bar, params)?;
    let out = deriv(&f, 1)?.scale(-1.0);
    if !out.is_finite() {
        return Err(NskError::NonFinite("gradient-flow rhs"));
    }
    Ok(out)
}

/// Korteweg energy `∫h(ρ̄) + ½k(ρ̄)|∂ₓρ̄|²`, the Lyapunov functional of the
/// gradient flow.
pub fn korteweg_energy(rho: &Field, params: &Params) -> Result<f64> {
    rho.check_positive(params.rho_floor)?;
    let rx = deriv(rho, 1)?;
    let dens: Vec<f64> = rho
        .values()
        .iter()
        .zip(rx.values())
        .map(|(&r, &d)| params.h0(r) + 0.5 * params.k0(r) * d * d)
        .collect();
    Ok(rho.grid().integrate_values(&dens))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfOptions {
    /// Bound on the damped explicit amplification per step.
    pub c_cfl: f64,
    /// Accuracy cap on the step.
    pub max_dt: f64,
    pub sample_every: f64,
    pub tail_threshold: f64,
}

impl Default for GfOptions {
    fn default() -> Self {
        GfOptions {
            c_cfl: 0.5,
            max_dt: 1e-3,
            sample_every: 0.01,
            tail_threshold: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradientFlowRun {
    pub samples: Vec<(f64, Field)>,
    pub steps: usize,
    pub max_dt: f64,
    pub min_dt: f64,
}

impl GradientFlowRun {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|(t, _)| *t).collect()
    }

    pub fn fields(&self) -> Vec<Field> {
        self.samples.iter().map(|(_, f)| f.clone()).collect()
    }

    /// Serializable trajectory of lifted states `(ρ̄, m̄, J̄)`.
    pub fn to_trajectory(&self, params: &Params) -> Result<Trajectory> {
        let lifts = lift_strong(&self.samples, params)?;
        let snapshots: Vec<State> = lifts.iter().map(StrongLift::as_state).collect();
        let diagnostics = snapshots
            .iter()
            .map(|s| DiagRecord::from_state(s, params, (0.0, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            kind: TrajectoryKind::GradientFlow,
            params: params.clone(),
            snapshots,
            diagnostics,
            steps: self.steps,
            max_dt: self.max_dt,
            min_dt: self.min_dt,
        })
    }
}


/// `∂ₓ²(p(ρ) − s₁(ρ))` on raw node values, two-thirds truncated.
fn gf_rhs_values(grid: &Grid, rho: &[f64], params: &Params) -> Vec<f64> {
    let mu: Vec<f64> = rho.iter().map(|&r| params.mu0(r)).collect();
    let mux = grid.derivative_values(&mu, 1, false);
    let v: Vec<f64> = mux.iter().zip(rho).map(|(d, r)| d / r).collect();
    let vx = grid.derivative_values(&v, 1, false);
    let inner: Vec<f64> = rho
        .iter()
        .zip(&vx)
        .map(|(&r, &d)| params.p0(r) - params.capillary_coeff(r) * d)
        .collect();
    grid.derivative_values(&inner, 2, true)
}

/// Integrating-factor RK4 for `ρ_t = Lρ + N(ρ)` with `L = −Aκ⁴ − Bκ²`
/// frozen at the start of each step.
struct Lawson<'a> {
    grid: &'a Grid,
    params: &'a Params,
    symbol: Vec<f64>,
    a: f64,
    b: f64,
}

impl<'a> Lawson<'a> {
    fn new(grid: &'a Grid, params: &'a Params, rho: &[f64]) -> Lawson<'a> {
        let a = rho.iter().map(|&r| params.k0(r) * r).fold(0.0, f64::max);
        let mean = rho.iter().sum::<f64>() / rho.len() as f64;
        let b = params.p1(mean).max(0.0);
        let symbol = grid
            .wavenumbers()
            .iter()
            .map(|&k| -a * k.powi(4) - b * k * k)
            .collect();
        Lawson {
            grid,
            params,
            symbol,
            a,
            b,
        }
    }

    /// Frozen-coefficient bound on `|dt·N′(κ)|·e^{L(κ)dt/2}` over all modes.
    fn amplification(&self, rho: &[f64], dt: f64) -> f64 {
        let p = self.params;
        let rx = self.grid.derivative_values(rho, 1, false);
        let mut a_lo = f64::INFINITY;
        let mut c2: f64 = 0.0;
        let mut c3: f64 = 0.0;
        for (&r, &d) in rho.iter().zip(&rx) {
            a_lo = a_lo.min(p.k0(r) * r);
            c2 = c2.max((p.p1(r) - self.b).abs());
            c3 = c3.max(2.0 * d.abs() * (p.k0(r) + p.k1(r).abs() * r));
        }
        let c4 = self.a - a_lo;
        self.grid
            .wavenumbers()
            .iter()
            .zip(&self.symbol)
            .map(|(&k, &l)| {
                let k = k.abs();
                let z = dt * (c2 * k * k + c3 * k.powi(3) + c4 * k.powi(4));
                z * (0.5 * l * dt).exp()
            })
            .fold(0.0, f64::max)
    }

    fn propagate(&self, values: &[f64], tau: f64) -> Vec<f64> {
        let mut spec = self.grid.forward(values);
        for (c, &l) in spec.iter_mut().zip(&self.symbol) {
            *c *= (l * tau).exp();
        }
        self.grid.inverse_real(spec)
    }

    /// `dt·N(ρ) = dt·(gf_rhs(ρ) − Lρ)`.
    fn remainder(&self, rho: &[f64], dt: f64) -> Result<Vec<f64>> {
        let min = rho.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min >= self.params.rho_floor) {
            return Err(NskError::Positivity {
                min,
                floor: self.params.rho_floor,
            });
        }
        let full = gf_rhs_values(self.grid, rho, self.params);
        let mut spec = self.grid.forward(rho);
        for (c, &l) in spec.iter_mut().zip(&self.symbol) {
            *c *= l;
        }
        let lin = self.grid.inverse_real(spec);
        let out: Vec<f64> = full.iter().zip(&lin).map(|(f, l)| dt * (f - l)).collect();
        if out.iter().all(|x| x.is_finite()) {
            Ok(out)
        } else {
            Err(NskError::NonFinite("gradient-flow step"))
        }
    }

    fn step(&self, v: &[f64], dt: f64) -> Result<Vec<f64>> {
        let n = v.len();
        let ev = self.propagate(v, 0.5 * dt);
        let a = self.remainder(v, dt)?;
        let ea = self.propagate(&a, 0.5 * dt);
        let u2: Vec<f64> = (0..n).map(|i| ev[i] + 0.5 * ea[i]).collect();
        let b = self.remainder(&u2, dt)?;
        let u3: Vec<f64> = (0..n).map(|i| ev[i] + 0.5 * b[i]).collect();
        let c = self.remainder(&u3, dt)?;
        // Everything carried a full step ahead goes through one more E(dt/2).
        let pre: Vec<f64> = (0..n).map(|i| ev[i] + c[i]).collect();
        let u4 = self.propagate(&pre, 0.5 * dt);
        let d = self.remainder(&u4, dt)?;
        let mid: Vec<f64> = (0..n)
            .map(|i| ev[i] + (ea[i] + 2.0 * (b[i] + c[i])) / 6.0)
            .collect();
        let head = self.propagate(&mid, 0.5 * dt);
        Ok((0..n).map(|i| head[i] + d[i] / 6.0).collect())
    }
}

/// Integrate the gradient flow from `rho0` to `t_end`, sampling every
/// `opts.sample_every` (and at `t_end`). Each sample is checked for
/// resolution.
pub fn solve_gradient_flow(
    rho0: &Field,
    t_end: f64,
    params: &Params,
    opts: &GfOptions,
) -> Result<GradientFlowRun> {
    if !(t_end > 0.0) {
        return Err(NskError::InvalidParams(format!("t_end = {t_end} must be positive")));
    }
    rho0.check_positive(params.rho_floor)?;
    let grid = rho0.grid();
    let check_tail = |t: f64, values: &[f64]| -> Result<()> {
        let tail = grid.spectral_tail(values);
        if tail < opts.tail_threshold {
            Ok(())
        } else {
            Err(NskError::UnderResolved {
                tail,
                threshold: opts.tail_threshold,
            }
            .at(t))
        }
    };
    check_tail(0.0, rho0.values())?;

    let targets = sample_times(0.0, t_end, opts.sample_every);
    let mut rho = rho0.values().to_vec();
    let mut t = 0.0;
    let mut samples = vec![(0.0, rho0.clone())];
    let mut steps = 0;
    let mut max_dt: f64 = 0.0;
    let mut min_dt = f64::INFINITY;

    for &target in &targets[1..] {
        while t < target {
            let stepper = Lawson::new(grid, params, &rho);
            let remaining = target - t;
            let mut dt = opts.max_dt.min(remaining);
            let mut halvings = 0;
            while stepper.amplification(&rho, dt) > opts.c_cfl {
                dt *= 0.5;
                halvings += 1;
                if halvings > 60 {
                    return Err(NskError::Cfl { dt, limit: 0.0 }.at(t));
                }
            }
            let landing = remaining <= dt * (1.0 + 1e-9);
            if landing {
                dt = remaining;
            }
            rho = stepper.step(&rho, dt).map_err(|e| e.at(t))?;
            t = if landing { target } else { t + dt };
            steps += 1;
            max_dt = max_dt.max(dt);
            min_dt = min_dt.min(dt);
        }
        check_tail(t, &rho)?;
        samples.push((t, Field::from_vec(grid, rho.clone())));
    }

    Ok(GradientFlowRun {
        samples,
        steps,
        max_dt,
        min_dt,
    })
}

/// Build the strong triple, velocities and residual for each sample.
pub fn lift_strong(samples: &[(f64, Field)], params: &Params) -> Result<Vec<StrongLift>> {
    samples
        .iter()
        .map(|(t, rho)| lift_one(*t, rho, params).map_err(|e| e.at(*t)))
        .collect()
}

pub fn lift_one(time: f64, rho_bar: &Field, params: &Params) -> Result<StrongLift> {
    let (f, v_bar) = darcy_flux(rho_bar, params)?;
    let m_bar = f.scale(params.epsilon);
    let j_bar = crate::dynamics::drift_momentum(rho_bar, params)?;
    let u_bar = m_bar.zip_map(rho_bar, |m, r| m / r);
    let e_bar = error_term(rho_bar, params)?;
    Ok(StrongLift {
        time,
        rho_bar: rho_bar.clone(),
        m_bar,
        j_bar,
        e_bar,
        u_bar,
        v_bar,
    })
}

/// `ē = (1/ε)∂ₓ(m̄²/ρ̄) + ∂ₜm̄`, with `∂ₜm̄ = ε·DF(ρ̄)[∂ₜρ̄]` obtained by the
/// chain rule and `∂ₜρ̄ = −∂ₓF`.
pub fn error_term(rho_bar: &Field, params: &Params) -> Result<Field> {
    let (f, v) = darcy_flux(rho_bar, params)?;
    let grid = rho_bar.grid();
    let rho = rho_bar.values();
    let n = rho.len();
    let sigma: Vec<f64> = grid.derivative_values(f.values(), 1, false).iter().map(|d| -d).collect();

    let mu = |i: usize| params.mu0(rho[i]);
    let mux = grid.derivative_values(&(0..n).map(mu).collect::<Vec<_>>(), 1, false);
    let vx = grid.derivative_values(v.values(), 1, false);

    // δv = ∂ₓ(μ′σ)/ρ − ∂ₓμ·σ/ρ²
    let mu1_sigma: Vec<f64> = (0..n).map(|i| params.mu1(rho[i]) * sigma[i]).collect();
    let d_mu1_sigma = grid.derivative_values(&mu1_sigma, 1, false);
    let dv: Vec<f64> = (0..n)
        .map(|i| d_mu1_sigma[i] / rho[i] - mux[i] * sigma[i] / (rho[i] * rho[i]))
        .collect();
    let dvx = grid.derivative_values(&dv, 1, false);

    // δ(−p + s₁) with s₁ = c(ρ)∂ₓv, c = ρμ′, c′ = μ′ + ρμ″
    let inner: Vec<f64> = (0..n)
        .map(|i| {
            let r = rho[i];
            let c1 = params.mu1(r) + r * params.mu2(r);
            -params.p1(r) * sigma[i] + c1 * sigma[i] * vx[i] + params.capillary_coeff(r) * dvx[i]
        })
        .collect();
    let dt_f = grid.derivative_values(&inner, 1, true);

    let conv: Vec<f64> = f.values().iter().zip(rho).map(|(f, r)| f * f / r).collect();
    let dconv = grid.derivative_values(&conv, 1, true);

    let eps = params.epsilon;
    let out: Vec<f64> = (0..n).map(|i| eps * (dconv[i] + dt_f[i])).collect();
    if !out.iter().all(|x| x.is_finite()) {
        return Err(NskError::NonFinite("error term"));
    }
    Ok(Field::from_vec(grid, out))
}
