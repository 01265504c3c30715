use serde::{Deserialize, Serialize};

use crate::error::{NskError, Result};

/// Least-squares power law `y ≈ e^{intercept}·x^{slope}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `max/min` of `y/model` over the points; `NaN` without a model.
    pub ratio_spread: f64,
}

/// Fit `log y` against `log x`. `model`, when given, supplies the reference
/// curve evaluated at each `x` for `ratio_spread`.
pub fn rate_fit(xs: &[f64], ys: &[f64], model: Option<&[f64]>) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(NskError::InvalidParams(format!(
            "rate fit needs ≥ 2 paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(NskError::InvalidParams("rate fit requires positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(NskError::InvalidParams("rate fit needs distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    let ratio_spread = match model {
        None => f64::NAN,
        Some(m) => {
            if m.len() != ys.len() || m.iter().any(|v| !(*v > 0.0)) {
                return Err(NskError::InvalidParams("model curve must be positive and match the data".into()));
            }
            let r: Vec<f64> = ys.iter().zip(m).map(|(y, m)| y / m).collect();
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            hi / lo
        }
    };
    Ok(RateFit {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        slope,
        intercept,
        r_squared,
        ratio_spread,
    })
}

/// `ε⁴ + νε`, the relaxation bound with well-prepared data.
pub fn relaxation_model(epsilon: f64, nu: f64) -> f64 {
    epsilon.powi(4) + nu * epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_law() {
        let xs = [0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.powi(4)).collect();
        let f = rate_fit(&xs, &ys, Some(&ys)).unwrap();
        assert!((f.slope - 4.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.ratio_spread - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let f = rate_fit(&[1.0, 2.0, 4.0], &[3.0, 3.0, 3.0], None).unwrap();
        assert!(f.slope.abs() < 1e-14);
        assert!(f.ratio_spread.is_nan());
    }

    #[test]
    fn noisy_cubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..8).map(|k| 0.4 * 0.7f64.powi(k)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 2.0 * x.powi(3) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            .collect();
        let f = rate_fit(&xs, &ys, None).unwrap();
        assert!((2.9..=3.1).contains(&f.slope), "{}", f.slope);
        assert!(f.r_squared > 0.99);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(rate_fit(&[1.0], &[1.0], None).is_err());
        assert!(rate_fit(&[1.0, 2.0], &[1.0, 0.0], None).is_err());
        assert!(rate_fit(&[1.0, 1.0], &[1.0, 2.0], None).is_err());
    }
}
