//! Small regression helpers.

/// Least-squares line through `(x, y)`; returns (slope, intercept).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    linear_fit(x, y).0
}

/// Slope of log(err) against log(r).
pub fn loglog_slope(r: &[f64], err: &[f64]) -> f64 {
    let lx: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    fit_slope(&lx, &ly)
}
