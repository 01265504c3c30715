//! Pointwise constitutive laws: power-law enthalpy with a compactly supported
//! bump, the pressure it induces, the capillarity law `k(ρ)`, the capillary
//! viscosity `μ(ρ) = ρ^{(s+3)/2}` with its BD partner `λ(ρ)`, and the relative
//! (Bregman) quantities built from them.
//!
//! Everything here is a pure function of scalar inputs.

use serde::{Deserialize, Serialize};

use crate::error::{NskError, Result};

/// Smooth bump `e(ρ) = A·exp(−1/(1 − z²))`, `z = (ρ − ρ_c)/w`, supported on
/// `[ρ_c − w, ρ_c + w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BumpSpec {
    pub amplitude: f64,
    pub center: f64,
    pub halfwidth: f64,
}

impl BumpSpec {
    pub fn zero() -> Self {
        BumpSpec {
            amplitude: 0.0,
            center: 1.0,
            halfwidth: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.center.is_finite() && self.halfwidth.is_finite()) {
            return Err(NskError::InvalidParams("bump fields must be finite".into()));
        }
        if !(self.center > 0.0 && self.halfwidth > 0.0 && self.halfwidth < self.center) {
            return Err(NskError::InvalidParams(format!(
                "bump support [{} ± {}] must lie in (0, ∞) with positive halfwidth",
                self.center, self.halfwidth
            )));
        }
        Ok(())
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        BumpSpec { amplitude, ..self }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.halfwidth, self.center + self.halfwidth)
    }
}

impl Default for BumpSpec {
    fn default() -> Self {
        Self::zero()
    }
}

/// Choice of the Lamé (physical viscosity) coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LameMode {
    /// `μ_L = μ`, `λ_L = λ`.
    BdMatched,
    /// `μ_L = αμ`, `λ_L = αλ`.
    Scaled(f64),
}

/// Prefactor on `∂ₓS₂` in the drift-momentum equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S2Scaling {
    Unit,
    InvEpsilon,
}

/// Which stability theorem a parameter set is meant to exercise; fixes the
/// admissible range of the capillarity exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyRange {
    /// `−1 ≤ s`, nothing else.
    Any,
    /// Large-friction limit: `−1 ≤ s ≤ γ − 2`.
    Relaxation,
    /// Weak-strong uniqueness: `−1 ≤ s ≤ 2γ − 3`.
    WeakStrong,
}

fn default_true() -> bool {
    true
}

fn default_s2() -> S2Scaling {
    S2Scaling::InvEpsilon
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub gamma: f64,
    pub s: f64,
    pub epsilon: f64,
    pub nu: f64,
    #[serde(default)]
    pub bump: BumpSpec,
    pub lame_mode: LameMode,
    pub rho_floor: f64,
    pub domain_length: f64,
    #[serde(default = "default_s2")]
    pub s2_scaling: S2Scaling,
    /// Disable to run the unscaled system without the `−m/ε²` damping.
    #[serde(default = "default_true")]
    pub friction: bool,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            gamma: 2.0,
            s: -1.0,
            epsilon: 0.1,
            nu: 0.0,
            bump: BumpSpec::zero(),
            lame_mode: LameMode::BdMatched,
            rho_floor: 0.05,
            domain_length: 2.0 * std::f64::consts::PI,
            s2_scaling: S2Scaling::InvEpsilon,
            friction: true,
        }
    }
}

impl Params {
    pub fn validate(&self, range: StudyRange) -> Result<()> {
        let bad = |m: String| Err(NskError::InvalidParams(m));
        if !(self.gamma > 1.0) {
            return bad(format!("gamma must exceed 1, got {}", self.gamma));
        }
        if !(self.s >= -1.0) || !self.s.is_finite() {
            return bad(format!("capillarity exponent s must be ≥ −1, got {}", self.s));
        }
        match range {
            StudyRange::Any => {}
            StudyRange::Relaxation if self.s > self.gamma - 2.0 + 1e-12 => {
                return bad(format!(
                    "relaxation study needs s ≤ γ − 2 (s = {}, γ = {})",
                    self.s, self.gamma
                ));
            }
            StudyRange::WeakStrong if self.s > 2.0 * self.gamma - 3.0 + 1e-12 => {
                return bad(format!(
                    "weak-strong study needs s ≤ 2γ − 3 (s = {}, γ = {})",
                    self.s, self.gamma
                ));
            }
            _ => {}
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return bad(format!("nu must be non-negative, got {}", self.nu));
        }
        if let LameMode::Scaled(alpha) = self.lame_mode {
            if !(alpha >= 0.0) {
                return bad(format!("scaled Lamé factor must be ≥ 0, got {alpha}"));
            }
        }
        if !(self.rho_floor > 0.0) {
            return bad(format!("rho_floor must be positive, got {}", self.rho_floor));
        }
        if !(self.domain_length > 0.0) {
            return bad(format!("domain length must be positive, got {}", self.domain_length));
        }
        self.bump.validate()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Params {
        Params {
            epsilon,
            ..self.clone()
        }
    }

    pub fn with_nu(&self, nu: f64) -> Params {
        Params { nu, ..self.clone() }
    }

    #[inline]
    pub(crate) fn mu_exponent(&self) -> f64 {
        0.5 * (self.s + 3.0)
    }

    // Unchecked pointwise laws for the field kernels; callers guarantee ρ > 0.

    #[inline]
    pub(crate) fn h0(&self, rho: f64) -> f64 {
        rho.powf(self.gamma) / (self.gamma - 1.0) + bump_e(rho, &self.bump, 0)
    }

    #[inline]
    pub(crate) fn h1(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 1.0) / (self.gamma - 1.0) + bump_e(rho, &self.bump, 1)
    }

    #[inline]
    pub(crate) fn h2(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 2.0) + bump_e(rho, &self.bump, 2)
    }

    #[inline]
    pub(crate) fn p0(&self, rho: f64) -> f64 {
        let (pg, pe) = self.p_parts(rho);
        pg + pe
    }

    #[inline]
    pub(crate) fn p_parts(&self, rho: f64) -> (f64, f64) {
        let pe = if self.bump.amplitude == 0.0 {
            0.0
        } else {
            rho * bump_e(rho, &self.bump, 1) - bump_e(rho, &self.bump, 0)
        };
        (rho.powf(self.gamma), pe)
    }

    #[inline]
    pub(crate) fn p1(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 1.0) + rho * bump_e(rho, &self.bump, 2)
    }

    #[inline]
    pub(crate) fn p2(&self, rho: f64) -> f64 {
        self.gamma * (self.gamma - 1.0) * rho.powf(self.gamma - 2.0)
            + bump_e(rho, &self.bump, 2)
            + rho * bump_e(rho, &self.bump, 3)
    }

    #[inline]
    pub(crate) fn k0(&self, rho: f64) -> f64 {
        0.25 * (self.s + 3.0).powi(2) * rho.powf(self.s)
    }

    #[inline]
    pub(crate) fn k1(&self, rho: f64) -> f64 {
        0.25 * (self.s + 3.0).powi(2) * self.s * rho.powf(self.s - 1.0)
    }

    #[inline]
    pub(crate) fn mu0(&self, rho: f64) -> f64 {
        rho.powf(self.mu_exponent())
    }

    #[inline]
    pub(crate) fn mu1(&self, rho: f64) -> f64 {
        let a = self.mu_exponent();
        a * rho.powf(a - 1.0)
    }

    #[inline]
    pub(crate) fn mu2(&self, rho: f64) -> f64 {
        let a = self.mu_exponent();
        a * (a - 1.0) * rho.powf(a - 2.0)
    }

    #[inline]
    pub(crate) fn lambda0(&self, rho: f64) -> f64 {
        (self.s + 1.0) * self.mu0(rho)
    }

    /// `μ + λ/2 = ρμ′`, the 1-D coefficient of both capillary stresses.
    #[inline]
    pub(crate) fn capillary_coeff(&self, rho: f64) -> f64 {
        rho * self.mu1(rho)
    }

    #[inline]
    pub(crate) fn lame_factor(&self) -> f64 {
        match self.lame_mode {
            LameMode::BdMatched => 1.0,
            LameMode::Scaled(alpha) => alpha,
        }
    }

    #[inline]
    pub(crate) fn mu_lame0(&self, rho: f64) -> f64 {
        self.lame_factor() * self.mu0(rho)
    }

    #[inline]
    pub(crate) fn lambda_lame0(&self, rho: f64) -> f64 {
        self.lame_factor() * self.lambda0(rho)
    }
}

/// Closed-form derivatives of `g(z) = −1/(1 − z²)` up to order three.
#[inline]
fn bump_exponent_derivs(z: f64) -> (f64, f64, f64, f64) {
    let q = 1.0 - z * z;
    let g0 = -1.0 / q;
    let g1 = -2.0 * z / (q * q);
    let g2 = -(2.0 + 6.0 * z * z) / (q * q * q);
    let g3 = -24.0 * z * (1.0 + z * z) / (q * q * q * q);
    (g0, g1, g2, g3)
}

/// `dⁿe/dρⁿ` for `n ≤ 3`; zero outside the open support.
pub fn bump_e(rho: f64, spec: &BumpSpec, order: u8) -> f64 {
    if spec.amplitude == 0.0 {
        return 0.0;
    }
    let z = (rho - spec.center) / spec.halfwidth;
    if !(z.abs() < 1.0) {
        return 0.0;
    }
    let (g0, g1, g2, g3) = bump_exponent_derivs(z);
    let phi = g0.exp();
    // exp underflows long before the polynomial factors overflow, but guard
    // against 0·∞ right at the edge.
    if phi == 0.0 {
        return 0.0;
    }
    let w = spec.halfwidth;
    let a = spec.amplitude;
    match order {
        0 => a * phi,
        1 => a * g1 * phi / w,
        2 => a * (g2 + g1 * g1) * phi / (w * w),
        3 => a * (g3 + 3.0 * g1 * g2 + g1 * g1 * g1) * phi / (w * w * w),
        _ => panic!("bump derivative order {order} exceeds 3"),
    }
}

fn require_positive(what: &'static str, rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(NskError::Domain { what, value: rho })
    }
}

/// `h(ρ) = ρ^γ/(γ−1) + e(ρ)` and its first two derivatives.
pub fn enthalpy(rho: f64, params: &Params, order: u8) -> Result<f64> {
    require_positive("enthalpy", rho)?;
    Ok(match order {
        0 => params.h0(rho),
        1 => params.h1(rho),
        2 => params.h2(rho),
        _ => panic!("enthalpy derivative order {order} exceeds 2"),
    })
}

/// `p(ρ) = ρh′(ρ) − h(ρ) = ρ^γ + ρe′ − e` and its first two derivatives.
pub fn pressure(rho: f64, params: &Params, order: u8) -> Result<f64> {
    require_positive("pressure", rho)?;
    Ok(match order {
        0 => params.p0(rho),
        1 => params.p1(rho),
        2 => params.p2(rho),
        _ => panic!("pressure derivative order {order} exceeds 2"),
    })
}

/// Split `p = p_γ + p_e` with `p_γ = ρ^γ` and `p_e = ρe′ − e`.
pub fn pressure_parts(rho: f64, params: &Params) -> Result<(f64, f64)> {
    require_positive("pressure", rho)?;
    Ok(params.p_parts(rho))
}

/// Scan `p′` over the bump support and return the first interval on which it
/// is negative.
pub fn check_nonmonotone(params: &Params, n_samples: usize) -> Option<(f64, f64)> {
    assert!(n_samples >= 100, "need at least 100 samples");
    let (lo, hi) = params.bump.support();
    let step = (hi - lo) / (n_samples - 1) as f64;
    let mut start: Option<f64> = None;
    let mut last = lo;
    for i in 0..n_samples {
        let rho = lo + step * i as f64;
        if rho <= 0.0 {
            continue;
        }
        let negative = params.p1(rho) < 0.0;
        match (negative, start) {
            (true, None) => start = Some(rho),
            (false, Some(a)) => return Some((a, last)),
            _ => {}
        }
        last = rho;
    }
    start.map(|a| (a, last))
}

/// Smallest bump amplitude for which `p′` turns negative somewhere, for the
/// bump shape (centre, halfwidth) of `params`. Dense sampling of
/// `γρ^{γ−2} / (−ê″(ρ))` over the part of the support where the unit bump is
/// concave.
pub fn nonmonotone_threshold(params: &Params) -> f64 {
    let unit = params.bump.with_amplitude(1.0);
    let (lo, hi) = unit.support();
    let n = 200_001;
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = f64::INFINITY;
    for i in 1..n - 1 {
        let rho = lo + step * i as f64;
        let e2 = bump_e(rho, &unit, 2);
        if e2 < 0.0 {
            best = best.min(params.gamma * rho.powf(params.gamma - 2.0) / -e2);
        }
    }
    best
}

/// `k(ρ) = ((s+3)²/4)·ρ^s`.
pub fn capillarity_k(rho: f64, params: &Params) -> Result<f64> {
    require_positive("capillarity", rho)?;
    Ok(params.k0(rho))
}

/// `μ(ρ) = ρ^{(s+3)/2}` and derivatives; `μ′ = √(ρk)`.
pub fn capillary_mu(rho: f64, params: &Params, order: u8) -> Result<f64> {
    require_positive("capillary mu", rho)?;
    Ok(match order {
        0 => params.mu0(rho),
        1 => params.mu1(rho),
        2 => params.mu2(rho),
        _ => panic!("mu derivative order {order} exceeds 2"),
    })
}

/// `λ(ρ) = 2(μ′(ρ)ρ − μ(ρ))`, evaluated from the definition.
pub fn lambda_bd(rho: f64, params: &Params) -> Result<f64> {
    require_positive("lambda", rho)?;
    Ok(2.0 * (params.mu1(rho) * rho - params.mu0(rho)))
}

/// Lamé pair `(μ_L, λ_L)` for the configured mode.
pub fn lame_coefficients(rho: f64, params: &Params) -> Result<(f64, f64)> {
    require_positive("lame", rho)?;
    Ok((params.mu_lame0(rho), params.lambda_lame0(rho)))
}

/// `r^γ − 1 − γ(r − 1) ≥ 0`, summed as a binomial series close to `r = 1`
/// so the result never loses its sign to cancellation.
fn convex_power_gap(r: f64, gamma: f64) -> f64 {
    let d = r - 1.0;
    if d.abs() < 1e-3 {
        let mut coeff = gamma * (gamma - 1.0) / 2.0;
        let mut term = d * d;
        let mut sum = 0.0;
        for k in 2..12 {
            sum += coeff * term;
            coeff *= (gamma - k as f64) / (k as f64 + 1.0);
            term *= d;
        }
        sum
    } else {
        (r.powf(gamma) - 1.0 - gamma * d).max(0.0)
    }
}

#[inline]
pub(crate) fn h_gamma_rel_unchecked(rho: f64, rho_bar: f64, gamma: f64) -> f64 {
    rho_bar.powf(gamma) * convex_power_gap(rho / rho_bar, gamma) / (gamma - 1.0)
}

#[inline]
pub(crate) fn h_e_rel_unchecked(rho: f64, rho_bar: f64, bump: &BumpSpec) -> f64 {
    if bump.amplitude == 0.0 {
        return 0.0;
    }
    bump_e(rho, bump, 0) - bump_e(rho_bar, bump, 0) - bump_e(rho_bar, bump, 1) * (rho - rho_bar)
}

/// `(h_γ(ρ|ρ̄), h_e(ρ|ρ̄))` with `f(ρ|ρ̄) = f(ρ) − f(ρ̄) − f′(ρ̄)(ρ − ρ̄)`.
pub fn rel_enthalpy(rho: f64, rho_bar: f64, params: &Params) -> Result<(f64, f64)> {
    require_positive("relative enthalpy", rho)?;
    require_positive("relative enthalpy", rho_bar)?;
    Ok((
        h_gamma_rel_unchecked(rho, rho_bar, params.gamma),
        h_e_rel_unchecked(rho, rho_bar, &params.bump),
    ))
}

#[inline]
pub(crate) fn rel_pressure_unchecked(rho: f64, rho_bar: f64, params: &Params) -> f64 {
    params.p0(rho) - params.p0(rho_bar) - params.p1(rho_bar) * (rho - rho_bar)
}

/// `p(ρ|ρ̄)` from its definition.
pub fn rel_pressure(rho: f64, rho_bar: f64, params: &Params) -> Result<f64> {
    require_positive("relative pressure", rho)?;
    require_positive("relative pressure", rho_bar)?;
    Ok(rel_pressure_unchecked(rho, rho_bar, params))
}

/// `p(ρ|ρ̄) − [(γ−1)h_γ(ρ|ρ̄) + p_e(ρ|ρ̄)]`, which vanishes identically.
pub fn rel_pressure_residual(rho: f64, rho_bar: f64, params: &Params) -> Result<f64> {
    let lhs = rel_pressure(rho, rho_bar, params)?;
    let (_, pe) = params.p_parts(rho);
    let (_, pe_bar) = params.p_parts(rho_bar);
    let pe_bar_prime = rho_bar * bump_e(rho_bar, &params.bump, 2);
    let pe_rel = pe - pe_bar - pe_bar_prime * (rho - rho_bar);
    let hg = h_gamma_rel_unchecked(rho, rho_bar, params.gamma);
    Ok(lhs - ((params.gamma - 1.0) * hg + pe_rel))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma2() -> Params {
        Params {
            gamma: 2.0,
            ..Params::default()
        }
    }

    #[test]
    fn bump_outside_support_and_centre() {
        let spec = BumpSpec {
            amplitude: 0.7,
            center: 1.0,
            halfwidth: 0.4,
        };
        for order in 0..=3 {
            assert_eq!(bump_e(1.8, &spec, order), 0.0);
            assert_eq!(bump_e(0.6, &spec, order), 0.0);
        }
        assert!((bump_e(1.0, &spec, 0) - 0.7 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(bump_e(1.0, &spec, 1), 0.0);
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let spec = BumpSpec {
            amplitude: 1.3,
            center: 1.0,
            halfwidth: 0.5,
        };
        let h = 1e-5;
        for &rho in &[0.75, 0.9, 1.1, 1.25, 1.3] {
            for order in 1..=3u8 {
                let fd = (bump_e(rho + h, &spec, order - 1) - bump_e(rho - h, &spec, order - 1))
                    / (2.0 * h);
                let exact = bump_e(rho, &spec, order);
                assert!(
                    (fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3),
                    "order {order} at {rho}: fd {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn enthalpy_and_pressure_closed_forms() {
        let p = gamma2();
        assert_eq!(enthalpy(3.0, &p, 0).unwrap(), 9.0);
        assert_eq!(enthalpy(3.0, &p, 2).unwrap(), 2.0);
        assert_eq!(pressure(3.0, &p, 0).unwrap(), 9.0);
        assert_eq!(pressure(1.0, &Params { gamma: 1.7, ..p.clone() }, 0).unwrap(), 1.0);

        let q = Params {
            gamma: 5.0 / 3.0,
            bump: BumpSpec {
                amplitude: 0.4,
                center: 1.2,
                halfwidth: 0.3,
            },
            ..p.clone()
        };
        let expected = 1.2f64.powf(5.0 / 3.0) * 1.5 + 0.4 * (-1.0f64).exp();
        assert!((enthalpy(1.2, &q, 0).unwrap() - expected).abs() < 1e-14);

        let r = Params {
            bump: BumpSpec {
                amplitude: 1.0,
                center: 1.0,
                halfwidth: 0.5,
            },
            ..p
        };
        assert!(bump_e(1.0, &r.bump, 1).abs() < 1e-15);
        let pr = pressure(1.0, &r, 0).unwrap();
        assert!((pr - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let p = gamma2();
        assert!(enthalpy(0.0, &p, 0).is_err());
        assert!(pressure(-1.0, &p, 1).is_err());
        assert!(capillarity_k(0.0, &p).is_err());
        assert!(capillary_mu(-2.0, &p, 0).is_err());
        assert!(lambda_bd(0.0, &p).is_err());
        assert!(rel_enthalpy(1.0, 0.0, &p).is_err());
        assert!(rel_pressure(0.0, 1.0, &p).is_err());
    }

    #[test]
    fn capillarity_values() {
        let with_s = |s: f64| Params { s, ..gamma2() };
        assert!((capillarity_k(2.0, &with_s(-1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(capillarity_k(7.0, &with_s(0.0)).unwrap(), 2.25);
        assert_eq!(capillarity_k(2.0, &with_s(1.0)).unwrap(), 8.0);

        assert_eq!(capillary_mu(5.0, &with_s(-1.0), 0).unwrap(), 5.0);
        assert_eq!(capillary_mu(2.0, &with_s(1.0), 0).unwrap(), 4.0);
        assert_eq!(capillary_mu(4.0, &with_s(0.0), 1).unwrap(), 3.0);

        assert_eq!(lambda_bd(3.3, &with_s(-1.0)).unwrap(), 0.0);
        assert_eq!(lambda_bd(2.0, &with_s(1.0)).unwrap(), 8.0);
        assert!((lambda_bd(4.0, &with_s(0.0)).unwrap() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn relative_quantities() {
        let p = gamma2();
        assert_eq!(rel_enthalpy(1.4, 1.4, &p).unwrap(), (0.0, 0.0));
        let (hg, he) = rel_enthalpy(3.0, 1.0, &p).unwrap();
        assert!((hg - 4.0).abs() < 1e-14);
        assert_eq!(he, 0.0);
        assert_eq!(rel_pressure(1.4, 1.4, &p).unwrap(), 0.0);
        assert!((rel_pressure(3.0, 1.0, &p).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn relative_enthalpy_matches_three_term_form() {
        use rand::{Rng, SeedableRng};
        let p = Params {
            gamma: 5.0 / 3.0,
            bump: BumpSpec {
                amplitude: 0.3,
                center: 1.0,
                halfwidth: 0.6,
            },
            ..Params::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let rho: f64 = rng.gen_range(0.2..3.0);
            let rb: f64 = rng.gen_range(0.5..2.0);
            let (hg, he) = rel_enthalpy(rho, rb, &p).unwrap();
            let g = p.gamma;
            let direct_g = rho.powf(g) / (g - 1.0)
                - rb.powf(g) / (g - 1.0)
                - g * rb.powf(g - 1.0) / (g - 1.0) * (rho - rb);
            let direct_total = enthalpy(rho, &p, 0).unwrap()
                - enthalpy(rb, &p, 0).unwrap()
                - enthalpy(rb, &p, 1).unwrap() * (rho - rb);
            let scale = enthalpy(rho, &p, 0).unwrap().abs() + enthalpy(rb, &p, 0).unwrap().abs();
            assert!((hg - direct_g).abs() < 1e-12 * scale);
            assert!((hg + he - direct_total).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn pressure_splitting_identity_with_bump() {
        use rand::{Rng, SeedableRng};
        let p = Params {
            gamma: 3.0,
            bump: BumpSpec {
                amplitude: 2.0,
                center: 1.0,
                halfwidth: 0.5,
            },
            ..Params::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let rho: f64 = rng.gen_range(0.5..2.0);
            let rb: f64 = rng.gen_range(0.5..2.0);
            assert!(rel_pressure_residual(rho, rb, &p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn nonmonotone_detection_and_threshold() {
        let base = Params {
            gamma: 2.0,
            bump: BumpSpec {
                amplitude: 0.0,
                center: 1.0,
                halfwidth: 0.4,
            },
            ..Params::default()
        };
        assert_eq!(check_nonmonotone(&base, 1000), None);

        // Sweep the amplitude upward with the p′ sampler until a sign change
        // appears; this is independent of the closed-form threshold search.
        let mut a = 0.0;
        let da = 1e-3;
        let swept = loop {
            a += da;
            let trial = Params {
                bump: base.bump.with_amplitude(a),
                ..base.clone()
            };
            if check_nonmonotone(&trial, 4000).is_some() {
                break a;
            }
            assert!(a < 10.0);
        };
        let threshold = nonmonotone_threshold(&base);
        assert!((swept - threshold).abs() <= 2.0 * da, "{swept} vs {threshold}");

        let below = Params {
            bump: base.bump.with_amplitude(0.5 * threshold),
            ..base.clone()
        };
        assert_eq!(check_nonmonotone(&below, 4000), None);
        let above = Params {
            bump: base.bump.with_amplitude(1.5 * threshold),
            ..base
        };
        let (lo, hi) = check_nonmonotone(&above, 4000).unwrap();
        assert!(lo < hi);
        assert!(above.p1(0.5 * (lo + hi)) < 0.0);
    }

    #[test]
    fn validation_ranges() {
        let mut p = Params {
            gamma: 2.0,
            s: 1.0,
            ..Params::default()
        };
        assert!(p.validate(StudyRange::WeakStrong).is_ok());
        assert!(p.validate(StudyRange::Relaxation).is_err());
        p.s = 0.0;
        assert!(p.validate(StudyRange::Relaxation).is_ok());
        p.s = -1.5;
        assert!(p.validate(StudyRange::Any).is_err());
        p.s = -1.0;
        p.lame_mode = LameMode::Scaled(-0.1);
        assert!(p.validate(StudyRange::Any).is_err());
        p.lame_mode = LameMode::Scaled(0.5);
        p.gamma = 1.0;
        assert!(p.validate(StudyRange::Any).is_err());
    }
}
