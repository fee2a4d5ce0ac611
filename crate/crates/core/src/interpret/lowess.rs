//! Locally weighted linear regression with tricube weights and no
//! robustness iterations.

use crate::error::{Error, Result};

/// Fitted values at the sorted inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LowessFit {
    pub x: Vec<f64>,
    pub fitted: Vec<f64>,
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Inputs sorted by `(x, y)` so that results do not depend on input order.
fn canonical(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    (
        idx.iter().map(|&i| x[i]).collect(),
        idx.iter().map(|&i| y[i]).collect(),
    )
}

fn check(x: &[f64], y: &[f64], span: f64) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "{} x values, {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::invalid("LOWESS needs at least three points"));
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::invalid(format!("span {span} must be in (0, 1]")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("LOWESS inputs must be finite"));
    }
    Ok(())
}

/// Local linear estimate at `x0` from the `k` nearest points (by |x - x0|).
/// Points tied with the k-th distance get zero weight, so the window is a
/// function of the point set alone. When the window has no spread in x the
/// estimate falls back to the mean of the window.
fn local_fit(xs: &[f64], ys: &[f64], x0: f64, k: usize, dist: &mut Vec<f64>) -> f64 {
    dist.clear();
    dist.extend(xs.iter().map(|v| (v - x0).abs()));
    let h = {
        let mut d = dist.clone();
        let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
        *kth
    };
    if h == 0.0 {
        let (s, c) = xs
            .iter()
            .zip(ys)
            .filter(|(x, _)| **x == x0)
            .fold((0.0, 0usize), |(s, c), (_, y)| (s + y, c + 1));
        if c > 0 {
            return s / c as f64;
        }
    }
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    let w: Vec<f64> = dist
        .iter()
        .map(|&d| if h > 0.0 { tricube(d / h) } else { 0.0 })
        .collect();
    for ((&wi, &xi), &yi) in w.iter().zip(xs).zip(ys) {
        sw += wi;
        sx += wi * xi;
        sy += wi * yi;
    }
    if sw == 0.0 {
        // Only reachable with k == 1 and a unique nearest point at distance h.
        let i = (0..xs.len())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
            .unwrap();
        return ys[i];
    }
    let (xm, ym) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((&wi, &xi), &yi) in w.iter().zip(xs).zip(ys) {
        sxx += wi * (xi - xm) * (xi - xm);
        sxy += wi * (xi - xm) * (yi - ym);
    }
    let scale = xs.last().unwrap() - xs.first().unwrap();
    if sxx <= 1e-12 * sw * scale * scale {
        return ym;
    }
    ym + sxy / sxx * (x0 - xm)
}

fn window(n: usize, span: f64) -> usize {
    ((span * n as f64).ceil() as usize).clamp(1, n)
}

/// LOWESS smooth of `y` on `x`, evaluated at each (sorted) `x`.
pub fn lowess(x: &[f64], y: &[f64], span: f64) -> Result<LowessFit> {
    check(x, y, span)?;
    let (xs, ys) = canonical(x, y);
    let k = window(xs.len(), span);
    let mut buf = Vec::with_capacity(xs.len());
    let fitted = xs
        .iter()
        .map(|&x0| local_fit(&xs, &ys, x0, k, &mut buf))
        .collect();
    Ok(LowessFit { x: xs, fitted })
}

/// LOWESS smooth of `y` on `x`, evaluated at arbitrary points.
pub fn lowess_at(x: &[f64], y: &[f64], span: f64, at: &[f64]) -> Result<Vec<f64>> {
    check(x, y, span)?;
    let (xs, ys) = canonical(x, y);
    let k = window(xs.len(), span);
    let mut buf = Vec::with_capacity(xs.len());
    Ok(at
        .iter()
        .map(|&x0| local_fit(&xs, &ys, x0, k, &mut buf))
        .collect())
}
