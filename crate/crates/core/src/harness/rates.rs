use serde::Serialize;

use crate::error::{Error, Result};

/// Errors at or below this level are treated as exact and excluded from
/// sweep fits.
pub const ERROR_FLOOR: f64 = 1e-8;

/// `(x, err)` pairs with an ordinary least-squares fit of `log err` on `log x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub xs: Vec<f64>,
    pub errs: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Number of pairs actually used by the fit.
    pub used: usize,
    /// Set when fewer than three usable pairs remain; slope, intercept and
    /// r_squared are then NaN.
    pub degenerate: bool,
    /// Per-point notes, e.g. explicit-scheme failures.
    pub notes: Vec<String>,
}

impl RateReport {
    /// Fit over the pairs with `err > floor`; never fails, flags degenerate
    /// data instead.
    pub fn from_errors(xs: Vec<f64>, errs: Vec<f64>, floor: f64) -> Self {
        let (fx, fe): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(&errs)
            .filter(|(_, &e)| e > floor)
            .map(|(&x, &e)| (x, e))
            .unzip();
        match fit_rate(&fx, &fe) {
            Ok(fit) => Self { xs, errs, ..fit },
            Err(_) => Self {
                xs,
                errs,
                slope: f64::NAN,
                intercept: f64::NAN,
                r_squared: f64::NAN,
                used: 0,
                degenerate: true,
                notes: Vec::new(),
            },
        }
    }
}

/// Least-squares slope of `log err` against `log x` over the positive pairs.
pub fn fit_rate(xs: &[f64], errs: &[f64]) -> Result<RateReport> {
    if xs.len() != errs.len() {
        return Err(Error::Dimension(format!(
            "{} abscissae but {} errors",
            xs.len(),
            errs.len()
        )));
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(errs)
        .filter(|(&x, &e)| x > 0.0 && e > 0.0 && x.is_finite() && e.is_finite())
        .map(|(x, e)| (x.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 positive pairs, have {}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    // A constant series is fitted exactly by a zero slope.
    let r_squared = if ss_tot <= f64::EPSILON * m {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateReport {
        xs: xs.to_vec(),
        errs: errs.to_vec(),
        slope,
        intercept,
        r_squared,
        used: pts.len(),
        degenerate: false,
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let errs: Vec<f64> = xs.iter().map(|x| 3.0 / x).collect();
        let r = fit_rate(&xs, &errs).unwrap();
        assert_relative_eq!(r.slope, -1.0, epsilon = 1e-12);
        assert_relative_eq!(r.r_squared, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.intercept, 3.0_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn constant_errors_have_zero_slope() {
        let r = fit_rate(&[1.0, 2.0, 4.0], &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.r_squared, 1.0);
    }

    #[test]
    fn quartering_per_doubling() {
        let r = fit_rate(&[8.0, 16.0, 32.0], &[4.0, 1.0, 0.25]).unwrap();
        assert_relative_eq!(r.slope, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            fit_rate(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]),
            Err(Error::DegenerateFit(_))
        ));
        let r = RateReport::from_errors(vec![1.0, 2.0, 3.0], vec![1e-12, 0.0, 1e-10], ERROR_FLOOR);
        assert!(r.degenerate && r.slope.is_nan());
    }
}
