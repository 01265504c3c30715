use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::StudyConfig;
use crate::constitutive::{
    capillarity_k, capillary_mu, enthalpy, lambda_bd, nonmonotone_threshold, pressure, rel_pressure_residual,
    BumpSpec, Params,
};
use crate::entropy::{check_pointwise_inequalities, relative_entropy_density, DensityBox, PointwiseReport};
use crate::error::Result;
use crate::io::write_json;

/// Relative tolerance of every constitutive identity.
pub const IDENTITY_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub name: String,
    pub gamma: f64,
    pub s: f64,
    pub bump_amplitude: f64,
    pub max_residual: f64,
    /// `(ρ, ρ̄)` of the worst sample.
    pub worst: (f64, f64),
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstitutiveReport {
    pub samples: usize,
    pub tolerance: f64,
    pub identities: Vec<IdentityResult>,
    pub pass: bool,
}

/// Parameter sets of the identity suite: every `(γ, s)` with the bump off
/// and with the bump at 1.5 times its non-monotonicity threshold.
pub fn identity_params(cases: &[(f64, f64)]) -> Vec<Params> {
    let mut out = Vec::new();
    for &(gamma, s) in cases {
        let smooth = Params {
            gamma,
            s,
            bump: BumpSpec::zero(),
            ..Params::default()
        };
        let a = 1.5 * nonmonotone_threshold(&smooth);
        out.push(smooth.clone());
        out.push(Params {
            bump: smooth.bump.with_amplitude(a),
            ..smooth
        });
    }
    out
}

struct Tracker {
    name: &'static str,
    max: f64,
    worst: (f64, f64),
}

impl Tracker {
    fn new(name: &'static str) -> Tracker {
        Tracker {
            name,
            max: 0.0,
            worst: (f64::NAN, f64::NAN),
        }
    }

    fn push(&mut self, residual: f64, at: (f64, f64)) {
        if !(residual <= self.max) {
            self.max = residual;
            self.worst = at;
        }
    }

    fn finish(self, p: &Params, tol: f64) -> IdentityResult {
        IdentityResult {
            name: self.name.into(),
            gamma: p.gamma,
            s: p.s,
            bump_amplitude: p.bump.amplitude,
            max_residual: self.max,
            worst: self.worst,
            pass: self.max <= tol,
        }
    }
}

/// Sum of the magnitudes of the terms of `η(U) − η(Ū) − ∇η(Ū)·(U − Ū)`.
fn bregman_scale(u: (f64, f64, f64), ub: (f64, f64, f64), p: &Params) -> f64 {
    let (r, m, j) = u;
    let (rb, mb, jb) = ub;
    let (vb, wb) = (mb / rb, jb / rb);
    let eta = |r: f64, m: f64, j: f64| 0.5 * (m * m + j * j) / r + p.h0(r);
    let eta_rho = -0.5 * (vb * vb + wb * wb) + p.h1(rb);
    eta(r, m, j).abs()
        + eta(rb, mb, jb).abs()
        + (eta_rho * (r - rb)).abs()
        + (vb * (m - mb)).abs()
        + (wb * (j - jb)).abs()
}

/// Random-sample check of the constitutive identities on `[lo, hi]`.
///
/// Identities whose two sides are sums of cancelling terms are measured
/// relative to the sum of the magnitudes of those terms; the others relative
/// to the magnitude of one side. The Bregman form is such a sum, so its
/// residual is scaled by the magnitudes of its five terms.
pub fn constitutive_suite(params: &[Params], samples: usize, lo: f64, hi: f64, seed: u64) -> Result<ConstitutiveReport> {
    let mut identities = Vec::new();
    for (k, p) in params.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let mut pres = Tracker::new("pressure_from_enthalpy");
        let mut mu = Tracker::new("mu_prime_sqrt_rho_k");
        let mut lam = Tracker::new("lambda_bd_relation");
        let mut pctl = Tracker::new("relative_pressure_control");
        let mut breg = Tracker::new("bregman_closed_form");
        for _ in 0..samples {
            let r = rng.gen_range(lo..=hi);
            let rb = rng.gen_range(lo..=hi);

            let (h, h1, pv) = (enthalpy(r, p, 0)?, enthalpy(r, p, 1)?, pressure(r, p, 0)?);
            pres.push((pv - (r * h1 - h)).abs() / (pv.abs() + (r * h1).abs() + h.abs()), (r, rb));

            let m1 = capillary_mu(r, p, 1)?;
            mu.push((m1 - (r * capillarity_k(r, p)?).sqrt()).abs() / m1.abs(), (r, rb));

            let m0 = capillary_mu(r, p, 0)?;
            let scale = 2.0 * ((m1 * r).abs() + m0.abs());
            lam.push((lambda_bd(r, p)? - (p.s + 1.0) * m0).abs() / scale, (r, rb));

            let (pb, pb1) = (pressure(rb, p, 0)?, pressure(rb, p, 1)?);
            let scale = pv.abs() + pb.abs() + (pb1 * (r - rb)).abs();
            pctl.push(rel_pressure_residual(r, rb, p)?.abs() / scale, (r, rb));

            let u = (r, rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            let ub = (rb, rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            let (closed, bregman) = relative_entropy_density(u, ub, p);
            breg.push((closed - bregman).abs() / bregman_scale(u, ub, p), (r, rb));
        }
        for t in [pres, mu, lam, pctl, breg] {
            identities.push(t.finish(p, IDENTITY_TOL));
        }
    }
    let pass = identities.iter().all(|i| i.pass);
    Ok(ConstitutiveReport {
        samples,
        tolerance: IDENTITY_TOL,
        identities,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseCase {
    pub gamma: f64,
    pub s: f64,
    pub report: PointwiseReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecksReport {
    pub constitutive: ConstitutiveReport,
    pub pointwise: Vec<PointwiseCase>,
    pub pass: bool,
}

/// Pointwise inequality constants for each `(γ, s)` case on the configured box.
pub fn pointwise_suite(cfg: &StudyConfig) -> Result<Vec<PointwiseCase>> {
    let c = &cfg.checks;
    c.cases
        .iter()
        .map(|&(gamma, s)| {
            let p = Params {
                gamma,
                s,
                ..Params::default()
            };
            let report = check_pointwise_inequalities(&p, c.samples, DensityBox::square(c.box_lo, c.box_hi), c.grid_points, cfg.seed)?;
            Ok(PointwiseCase { gamma, s, report })
        })
        .collect()
}

/// Full `check` suite; writes `checks.json` when `out` is given.
pub fn run_checks(cfg: &StudyConfig, out: Option<&Path>) -> Result<ChecksReport> {
    cfg.validate()?;
    let c = &cfg.checks;
    let constitutive = constitutive_suite(&identity_params(&c.cases), c.samples, c.box_lo, c.box_hi, cfg.seed)?;
    let pointwise = pointwise_suite(cfg)?;
    let pass = constitutive.pass && pointwise.iter().all(|p| p.report.pass);
    let report = ChecksReport {
        constitutive,
        pointwise,
        pass,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("checks.json"), &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold_on_a_small_sample() {
        let params = identity_params(&[(2.0, -1.0), (3.0, 0.5)]);
        assert_eq!(params.len(), 4);
        assert!(params[1].bump.amplitude > 0.0);
        let rep = constitutive_suite(&params, 2000, 0.5, 2.0, 3).unwrap();
        assert_eq!(rep.identities.len(), 20);
        for i in &rep.identities {
            assert!(i.pass, "{i:?}");
        }
    }

    #[test]
    fn broken_pressure_is_caught() {
        // A wrong exponent in the power law breaks `p = ρh′ − h` visibly.
        let mut t = Tracker::new("x");
        let p = Params::default();
        for r in [0.5f64, 1.0, 2.0] {
            let wrong = r.powf(2.1);
            let ok = r * enthalpy(r, &p, 1).unwrap() - enthalpy(r, &p, 0).unwrap();
            t.push((wrong - ok).abs() / ok.abs(), (r, r));
        }
        assert!(!t.finish(&p, IDENTITY_TOL).pass);
    }
}
