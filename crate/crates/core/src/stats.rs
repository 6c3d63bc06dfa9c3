//! Small statistics helpers.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// One-sample two-sided Student's t-test against a zero mean.
/// Returns `None` with fewer than two samples or a degenerate variance
/// together with a nonzero mean is reported as an infinite statistic.
pub fn t_test_one_sample(samples: &[f64]) -> Option<TTest> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let se = (var / nf).sqrt();
    let t = if se == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY * mean.signum()
        }
    } else {
        mean / se
    };
    let dof = nf - 1.0;
    let p = if t.is_infinite() {
        0.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, dof).expect("dof >= 1");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Some(TTest { mean, std_error: se, t_stat: t, p_value: p, dof })
}

#[derive(Debug, Clone, Copy)]
pub struct TTest {
    pub mean: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub dof: f64,
}

/// Ordinary least squares slope and intercept of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
