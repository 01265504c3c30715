//! Periodic 1-D Fourier collocation grid.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{NskError, Result};

/// Spatial dimension tag. Only the 1-D torus is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    One,
}

/// Uniform collocation grid on the torus `[0, L)`, `x_j = jL/N`.
///
/// FFT plans are shared read-only, so a `Grid` can be used from any number of
/// threads; each transform allocates its own scratch.
pub struct Grid {
    n: usize,
    length: f64,
    /// `κ_l` in FFT storage order.
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Arc<Grid>> {
        if n < 16 || !n.is_power_of_two() {
            return Err(NskError::InvalidParams(format!(
                "grid size must be a power of two ≥ 16, got {n}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(NskError::InvalidParams(format!(
                "domain length must be positive, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = 2.0 * std::f64::consts::PI / length;
        let wavenumbers = (0..n).map(|j| base * mode_index(j, n) as f64).collect();
        Ok(Arc::new(Grid {
            n,
            length,
            wavenumbers,
            forward,
            inverse,
        }))
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dimension(&self) -> Dimension {
        Dimension::One
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 * self.dx()).collect()
    }

    /// Wavenumbers in FFT storage order; index `N/2` carries `−N/2`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `κ_max = πN/L`.
    pub fn kappa_max(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.length
    }

    /// Largest retained |mode index| under the two-thirds rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }

    pub fn quadrature_weight(&self) -> f64 {
        self.dx()
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        self.forward.process_with_scratch(&mut buf, &mut scratch);
        buf
    }

    /// Inverse transform returning the real part, normalized by `1/N`.
    pub(crate) fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        self.inverse.process_with_scratch(&mut spectrum, &mut scratch);
        let inv_n = 1.0 / self.n as f64;
        spectrum.iter().map(|c| c.re * inv_n).collect()
    }

    /// Spectral derivative of order `order`, with optional two-thirds
    /// truncation folded into the same transform pair.
    pub(crate) fn derivative_values(&self, values: &[f64], order: u8, dealias: bool) -> Vec<f64> {
        let mut spec = self.forward(values);
        self.apply_derivative(&mut spec, order, dealias);
        self.inverse_real(spec)
    }

    pub(crate) fn apply_derivative(&self, spec: &mut [Complex64], order: u8, dealias: bool) {
        let n = self.n;
        let cutoff = self.dealias_cutoff();
        for (j, c) in spec.iter_mut().enumerate() {
            let l = mode_index(j, n);
            if (dealias && l.unsigned_abs() > cutoff as u64) || (order % 2 == 1 && j == n / 2) {
                *c = Complex64::new(0.0, 0.0);
                continue;
            }
            *c *= ik_power(self.wavenumbers[j], order);
        }
    }

    pub(crate) fn dealias_values(&self, values: &[f64]) -> Vec<f64> {
        self.derivative_values(values, 0, true)
    }

    pub(crate) fn integrate_values(&self, values: &[f64]) -> f64 {
        self.dx() * values.iter().sum::<f64>()
    }

    /// `max_{|l| ≥ N/4} |f̂_l| / max_l |f̂_l|`.
    pub(crate) fn spectral_tail(&self, values: &[f64]) -> f64 {
        let spec = self.forward(values);
        let peak = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let quarter = self.n / 4;
        let tail = spec
            .iter()
            .enumerate()
            .filter(|(j, _)| mode_index(*j, self.n).unsigned_abs() >= quarter as u64)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max);
        tail / peak
    }
}

/// Signed mode number for FFT storage index `j`, in `[−N/2, N/2)`.
#[inline]
pub(crate) fn mode_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[inline]
fn ik_power(kappa: f64, order: u8) -> Complex64 {
    match order % 4 {
        0 => Complex64::new(kappa.powi(order as i32), 0.0),
        1 => Complex64::new(0.0, kappa.powi(order as i32)),
        2 => Complex64::new(-kappa.powi(order as i32), 0.0),
        _ => Complex64::new(0.0, -kappa.powi(order as i32)),
    }
}

/// Point values of a real function at the grid nodes.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n_points() {
            return Err(NskError::Mismatch(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub(crate) fn from_vec(grid: &Arc<Grid>, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.n_points());
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Field {
        Field::from_vec(grid, vec![value; grid.n_points()])
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.same_grid(other));
        Field::from_vec(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete L² norm `(∫ f² dx)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.grid
            .integrate_values(&self.values.iter().map(|v| v * v).collect::<Vec<_>>())
            .sqrt()
    }

    /// Positivity tag: `min(values) ≥ floor`.
    pub fn check_positive(&self, floor: f64) -> Result<()> {
        let min = self.min();
        if min >= floor && min.is_finite() {
            Ok(())
        } else {
            Err(NskError::Positivity { min, floor })
        }
    }

    /// Trigonometric interpolation onto another grid of the same length.
    pub fn resample(&self, target: &Arc<Grid>) -> Result<Field> {
        if target.length() != self.grid.length() {
            return Err(NskError::Mismatch("resampling needs equal domain lengths".into()));
        }
        let (n_src, n_dst) = (self.grid.n_points(), target.n_points());
        let spec = self.grid.forward(&self.values);
        let mut out = vec![Complex64::new(0.0, 0.0); n_dst];
        let keep = n_src.min(n_dst) / 2;
        let ratio = n_dst as f64 / n_src as f64;
        for (j, c) in spec.iter().enumerate() {
            let l = mode_index(j, n_src);
            if l.unsigned_abs() as usize >= keep {
                continue;
            }
            let dst = if l >= 0 { l as usize } else { (n_dst as i64 + l) as usize };
            out[dst] = c * ratio;
        }
        Ok(Field::from_vec(target, target.inverse_real(out)))
    }
}

/// Spectral derivative of order 1..=3. The Nyquist mode is dropped for odd
/// orders so the result stays real.
pub fn deriv(f: &Field, order: u8) -> Result<Field> {
    if !(1..=3).contains(&order) {
        return Err(NskError::InvalidParams(format!("derivative order {order} not in 1..=3")));
    }
    if !f.is_finite() {
        return Err(NskError::NonFinite("deriv input"));
    }
    Ok(Field::from_vec(
        &f.grid,
        f.grid.derivative_values(&f.values, order, false),
    ))
}

/// `(L/N) Σ f_j`.
pub fn integrate(f: &Field) -> f64 {
    f.grid.integrate_values(&f.values)
}

/// Two-thirds rule: zero all modes with `|κ_l| > (2/3)κ_max`.
pub fn dealias(f: &Field) -> Field {
    Field::from_vec(&f.grid, f.grid.dealias_values(&f.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn construction_rules() {
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(48, 1.0).is_err());
        assert!(Grid::new(32, 0.0).is_err());
        let g = Grid::new(32, 3.0).unwrap();
        assert_eq!(g.wavenumbers()[16], -16.0 * 2.0 * PI / 3.0);
        assert_eq!(g.nodes()[1], 3.0 / 32.0);
        assert!(Field::new(&g, vec![0.0; 31]).is_err());
    }

    #[test]
    fn derivative_of_single_modes() {
        let len = 3.0;
        let g = Grid::new(64, len).unwrap();
        let w = 2.0 * PI / len;
        let f = Field::from_fn(&g, |x| (w * x).sin());
        let d1 = deriv(&f, 1).unwrap();
        let d3 = deriv(&f, 3).unwrap();
        for (j, x) in g.nodes().into_iter().enumerate() {
            assert!((d1.values()[j] - w * (w * x).cos()).abs() < 1e-12);
            assert!((d3.values()[j] + w.powi(3) * (w * x).cos()).abs() < 1e-10);
        }
        let c = Field::constant(&g, 4.2);
        assert!(deriv(&c, 2).unwrap().max_abs() < 1e-12);
        assert!(deriv(&f, 0).is_err());
        let bad = Field::from_vec(&g, vec![f64::NAN; 64]);
        assert!(deriv(&bad, 1).is_err());
    }

    #[test]
    fn quadrature() {
        let g = grid(32);
        assert!((integrate(&Field::constant(&g, 1.0)) - 2.0 * PI).abs() < 1e-14);
        assert!(integrate(&Field::from_fn(&g, |x| x.sin())).abs() < 1e-14);
        assert!((integrate(&Field::from_fn(&g, |x| x.sin().powi(2))) - PI).abs() < 1e-14);
    }

    #[test]
    fn dealiasing_removes_only_high_modes() {
        let g = grid(64);
        let low = Field::from_fn(&g, |x| (3.0 * x).cos());
        let out = dealias(&low);
        assert!(out.sub(&low).max_abs() < 1e-14);

        let nyquist = Field::from_fn(&g, |x| (32.0 * x).cos());
        assert!(dealias(&nyquist).max_abs() < 1e-14);

        // sin(15x)·sin(10x) = ½[cos(5x) − cos(25x)]; cutoff is 21.
        let prod = Field::from_fn(&g, |x| (15.0 * x).sin() * (10.0 * x).sin());
        let kept = dealias(&prod);
        let expected = Field::from_fn(&g, |x| 0.5 * (5.0 * x).cos());
        assert!(kept.sub(&expected).max_abs() < 1e-13);

        // Direct DFT oracle for the removed mode.
        let direct = |f: &Field, k: f64| -> f64 {
            f.values()
                .iter()
                .zip(g.nodes())
                .map(|(v, x)| v * (k * x).cos())
                .sum::<f64>()
                / 32.0
        };
        assert!((direct(&prod, 25.0) + 0.5).abs() < 1e-12);
        assert!(direct(&kept, 25.0).abs() < 1e-12);
        assert!((direct(&kept, 5.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_spectral_accuracy() {
        // ρ = 2 + sin x is entire-analytic-ish: error drops much faster than
        // any power until it reaches round-off.
        let exact = |x: f64| -x.sin();
        let mut errors = Vec::new();
        for &n in &[16usize, 32, 64] {
            let g = grid(n);
            let rho = Field::from_fn(&g, |x| 2.0 + x.sin() + 0.2 * (x.sin()).exp());
            let d2 = deriv(&rho, 2).unwrap();
            let ex = Field::from_fn(&g, |x| {
                exact(x) + 0.2 * x.sin().exp() * (x.cos().powi(2) - x.sin())
            });
            errors.push(d2.sub(&ex).max_abs());
        }
        assert!(errors[0] / errors[1] > 1e2, "{errors:?}");
        assert!(errors[1] < 1e-11, "{errors:?}");
    }

    #[test]
    fn resample_round_trip() {
        let g = grid(32);
        let h = grid(128);
        let f = Field::from_fn(&g, |x| (2.0 * x).sin() + 0.3 * (5.0 * x).cos());
        let up = f.resample(&h).unwrap();
        let ex = Field::from_fn(&h, |x| (2.0 * x).sin() + 0.3 * (5.0 * x).cos());
        assert!(up.sub(&ex).max_abs() < 1e-13);
        let back = up.resample(&g).unwrap();
        assert!(back.sub(&f).max_abs() < 1e-13);
    }

    #[test]
    fn positivity_tag() {
        let g = grid(16);
        let f = Field::from_fn(&g, |x| 1.0 + 0.5 * x.sin());
        assert!(f.check_positive(0.4).is_ok());
        assert!(f.check_positive(0.6).is_err());
    }
}
