use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pca::{center, column_means};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// PLS1 decomposition of centred `X` against a single response.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    pub x_means: DVector<f64>,
    pub y_mean: f64,
    /// K x A unit weight vectors, one per extracted component.
    pub weights: DMatrix<f64>,
    /// K x A X-loadings.
    pub x_loadings: DMatrix<f64>,
    /// Regression coefficient of the response on each score column.
    pub y_loadings: DVector<f64>,
    /// N x A training scores; columns are mutually orthogonal.
    pub scores: DMatrix<f64>,
    /// K x A map from centred X to scores, `W (P^T W)^-1`.
    pub rotations: DMatrix<f64>,
    /// In-sample RMSEP using the first 1..=A components.
    pub rmsep: Vec<f64>,
    /// Number of retained components.
    pub n_components: usize,
}

impl PlsModel {
    pub fn n_extracted(&self) -> usize {
        self.weights.ncols()
    }

    pub fn with_components(mut self, m: usize) -> Result<Self> {
        if m < 1 || m > self.n_extracted() {
            return Err(Error::invalid(format!(
                "cannot retain {m} of {} components",
                self.n_extracted()
            )));
        }
        self.n_components = m;
        Ok(self)
    }

    /// Response predicted from the first `m` components.
    pub fn predict(&self, x: &DMatrix<f64>, m: usize) -> Result<DVector<f64>> {
        let t = project(self, x, m)?;
        Ok(t * self.y_loadings.rows(0, m) + DVector::from_element(x.nrows(), self.y_mean))
    }

    pub fn write_rmsep_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<rmsep>", e);
        writeln!(w, "m,rmsep").map_err(io)?;
        for (i, r) in self.rmsep.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, r).map_err(io)?;
        }
        Ok(())
    }

    /// Weights, loadings and rotations as rows named by feature, with
    /// columns `pls_1..pls_A` for each kind.
    pub fn write_loadings_csv<W: Write>(&self, feature_names: &[String], mut w: W) -> Result<()> {
        let io = |e| Error::io("<loadings>", e);
        let a = self.n_extracted();
        write!(w, "feature,kind").map_err(io)?;
        for c in 1..=a {
            write!(w, ",pls_{c}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for (kind, mat) in [
            ("weight", &self.weights),
            ("x_loading", &self.x_loadings),
            ("rotation", &self.rotations),
        ] {
            for (i, name) in feature_names.iter().enumerate() {
                write!(w, "{name},{kind}").map_err(io)?;
                for c in 0..a {
                    write!(w, ",{}", mat[(i, c)]).map_err(io)?;
                }
                writeln!(w).map_err(io)?;
            }
        }
        write!(w, "y,y_loading").map_err(io)?;
        for c in 0..a {
            write!(w, ",{}", self.y_loadings[c]).map_err(io)?;
        }
        writeln!(w).map_err(io)
    }
}

fn project(model: &PlsModel, x: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    if x.ncols() != model.x_means.len() {
        return Err(Error::Shape(format!(
            "PLS fitted on {} columns, got {}",
            model.x_means.len(),
            x.ncols()
        )));
    }
    if m > model.n_extracted() {
        return Err(Error::invalid(format!(
            "only {} components extracted",
            model.n_extracted()
        )));
    }
    Ok(center(x, &model.x_means) * model.rotations.columns(0, m))
}

fn validate_response(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows but {} responses",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "response contains missing or non-finite values",
        ));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    if y.iter()
        .all(|v| (v - mean).abs() <= f64::EPSILON * mean.abs().max(1.0))
    {
        return Err(Error::invalid("response has zero variance"));
    }
    Ok(())
}

/// NIPALS PLS1 on raw matrices. Extraction stops early if the deflated
/// covariance `X^T y` vanishes, i.e. `X` has no further rank to offer.
fn fit_raw(x: &DMatrix<f64>, y: &[f64], max_components: usize) -> Result<PlsModel> {
    let (n, k) = x.shape();
    validate_response(y, n)?;
    if max_components < 1 {
        return Err(Error::invalid("max_components must be at least 1"));
    }
    if max_components >= n {
        return Err(Error::invalid(format!(
            "max_components {max_components} must be smaller than the number of rows {n}"
        )));
    }
    if max_components > k {
        return Err(Error::invalid(format!(
            "max_components {max_components} exceeds the number of features {k}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "PLS input contains non-finite values".into(),
        ));
    }
    let x_means = column_means(x);
    let mut xd = center(x, &x_means);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut yd = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let first_cov = (xd.transpose() * &yd).norm();
    let (mut ws, mut ps, mut ts, mut qs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..max_components {
        let mut w = xd.transpose() * &yd;
        let wn = w.norm();
        if !(wn > first_cov * 1e-12) {
            break;
        }
        w /= wn;
        let t = &xd * &w;
        let tt = t.dot(&t);
        let p = xd.transpose() * &t / tt;
        let q = yd.dot(&t) / tt;
        xd -= &t * p.transpose();
        yd -= &t * q;
        ws.push(w);
        ps.push(p);
        ts.push(t);
        qs.push(q);
    }
    if ws.is_empty() {
        return Err(Error::invalid(
            "features carry no covariance with the response",
        ));
    }
    let weights = DMatrix::from_columns(&ws);
    let x_loadings = DMatrix::from_columns(&ps);
    let scores = DMatrix::from_columns(&ts);
    let y_loadings = DVector::from_vec(qs);
    let ptw = x_loadings.transpose() * &weights;
    let inv = ptw
        .try_inverse()
        .ok_or_else(|| Error::Numeric("P^T W is singular".into()))?;
    let rotations = &weights * inv;

    // Training scores are orthogonal, so the fit on the first m components
    // is the running sum of q_m t_m.
    let mut fitted = DVector::zeros(n);
    let y_c = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut rmsep = Vec::with_capacity(ws.len());
    for (m, t) in scores.column_iter().enumerate() {
        fitted += t * y_loadings[m];
        rmsep.push(((&fitted - &y_c).norm_squared() / n as f64).sqrt());
    }
    let a = rmsep.len();
    Ok(PlsModel {
        x_means,
        y_mean,
        weights,
        x_loadings,
        y_loadings,
        scores,
        rotations,
        rmsep,
        n_components: a,
    })
}

/// Fits PLS1 with up to `max_components` components and retains the number
/// chosen by the one-standard-error rule on the in-sample RMSEP curve.
pub fn pls_fit(x: &FeatureMatrix, y: &[f64], max_components: usize) -> Result<PlsModel> {
    let model = fit_raw(x.values(), y, max_components)?;
    let m = one_se_rule(&model.rmsep)?;
    model.with_components(m)
}

/// Scores of `x` on the retained components, named `pls_1..pls_M`.
pub fn pls_scores(model: &PlsModel, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let t = project(model, x.values(), model.n_components)?;
    FeatureMatrix::with_prefix(x.subject_ids().to_vec(), "pls", t)
}

/// RMSEP of `y` regressed by least squares (with intercept) on the first
/// `1..=A` score columns of `x`.
pub fn rmsep_curve(model: &PlsModel, x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} responses", y.len())));
    }
    let t = project(model, x, model.n_extracted())?;
    // Modified Gram-Schmidt over [1, t_1, t_2, ...], updating the residual.
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0 / (n as f64).sqrt())];
    let mut resid = DVector::from_column_slice(y);
    resid -= &basis[0] * basis[0].dot(&resid);
    let mut curve = Vec::with_capacity(t.ncols());
    for col in t.column_iter() {
        let mut v = col.into_owned();
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-12 * col.norm().max(f64::MIN_POSITIVE) {
            v /= norm;
            resid -= &v * v.dot(&resid);
            basis.push(v);
        }
        curve.push((resid.norm_squared() / n as f64).sqrt());
    }
    Ok(curve)
}

/// How the RMSEP curve and its standard error are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RmsepMode {
    /// In-sample curve; SE is the standard deviation of the curve's values
    /// divided by the square root of its length.
    #[default]
    InSample,
    /// K-fold cross-validated curve; SE is the fold-to-fold standard error
    /// of RMSEP at the minimising component count.
    CrossValidated { folds: usize },
}

/// Smallest `M` (1-based) whose RMSEP is below `min + SE`, where `SE` is the
/// standard error of the curve's values. The minimiser itself always
/// qualifies, so a flat curve selects 1.
pub fn one_se_rule(curve: &[f64]) -> Result<usize> {
    let se = if curve.len() > 1 {
        let n = curve.len() as f64;
        let mean = curve.iter().sum::<f64>() / n;
        let var = curve.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt() / n.sqrt()
    } else {
        0.0
    };
    one_se_with(curve, se)
}

fn one_se_with(curve: &[f64], se: f64) -> Result<usize> {
    if curve.is_empty() {
        return Err(Error::invalid("RMSEP curve is empty"));
    }
    let argmin = argmin(curve);
    let bound = curve[argmin] + se;
    let m = curve
        .iter()
        .enumerate()
        .position(|(i, &r)| r < bound || i == argmin)
        .expect("argmin qualifies");
    Ok(m + 1)
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap()
}

/// Chooses the number of components for `model` on data `(x, y)`.
pub fn select_m(model: &PlsModel, x: &FeatureMatrix, y: &[f64], mode: RmsepMode) -> Result<usize> {
    match mode {
        RmsepMode::InSample => one_se_rule(&rmsep_curve(model, x.values(), y)?),
        RmsepMode::CrossValidated { folds } => {
            let (curve, se) = cross_validated_curve(x.values(), y, model.n_extracted(), folds)?;
            one_se_with(&curve, se)
        }
    }
}

/// Pooled CV RMSEP per component count, and the fold standard error at the
/// minimiser. Folds are assigned round-robin by row index.
fn cross_validated_curve(
    x: &DMatrix<f64>,
    y: &[f64],
    a: usize,
    folds: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = x.nrows();
    if folds < 2 || folds > n {
        return Err(Error::invalid(format!(
            "cannot use {folds} folds on {n} rows"
        )));
    }
    let mut sse = vec![0.0; a];
    let mut per_fold = vec![vec![0.0; a]; folds];
    for (f, fold_rmsep) in per_fold.iter_mut().enumerate() {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != f).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % folds == f).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = fit_raw(&x.select_rows(&train), &yt, a.min(train.len() - 1))?;
        let xs = x.select_rows(&test);
        for m in 1..=a {
            let mm = m.min(model.n_extracted());
            let pred = model.predict(&xs, mm)?;
            let e: f64 = test
                .iter()
                .zip(pred.iter())
                .map(|(&i, p)| (p - y[i]).powi(2))
                .sum();
            sse[m - 1] += e;
            fold_rmsep[m - 1] = (e / test.len() as f64).sqrt();
        }
    }
    let curve: Vec<f64> = sse.iter().map(|s| (s / n as f64).sqrt()).collect();
    let best = argmin(&curve);
    let vals: Vec<f64> = per_fold.iter().map(|r| r[best]).collect();
    let mean = vals.iter().sum::<f64>() / folds as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (folds as f64 - 1.0)).sqrt();
    Ok((curve, sd / (folds as f64).sqrt()))
}
