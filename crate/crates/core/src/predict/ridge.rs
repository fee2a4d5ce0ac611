use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Identity link, squared-error loss.
    Gaussian,
    /// Logit link, binomial deviance; responses are 0/1.
    Binomial,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "gaussian-identity" => Ok(Family::Gaussian),
            "binomial" | "binomial-logit" => Ok(Family::Binomial),
            other => Err(Error::config(format!("unknown family `{other}`"))),
        }
    }
}

/// A fitted ridge GLM. Features are standardised on the training data for
/// fitting; coefficients are reported on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeGlm {
    pub family: Family,
    /// One coefficient per input column; dropped columns hold 0.
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub penalty: f64,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Zero-variance columns excluded from the fit.
    pub dropped: Vec<usize>,
}

impl RidgeGlm {
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::Shape(format!(
                "model has {} coefficients, data has {} columns",
                self.coefficients.len(),
                x.ncols()
            )));
        }
        Ok(x * &self.coefficients + DVector::from_element(x.nrows(), self.intercept))
    }

    /// Predicted mean response: the linear predictor for gaussian, the
    /// probability for binomial.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let eta = self.linear_predictor(x)?;
        Ok(match self.family {
            Family::Gaussian => eta,
            Family::Binomial => eta.map(logistic),
        })
    }
}

fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

struct Standardized {
    z: DMatrix<f64>,
    kept: Vec<usize>,
    means: Vec<f64>,
    sds: Vec<f64>,
    dropped: Vec<usize>,
}

fn standardize(x: &DMatrix<f64>) -> Standardized {
    let n = x.nrows() as f64;
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (j, col) in x.column_iter().enumerate() {
        let m = col.sum() / n;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        means.push(m);
        sds.push(sd);
        if sd > 1e-12 * m.abs().max(1.0) {
            kept.push(j);
        } else {
            dropped.push(j);
        }
    }
    let z = DMatrix::from_fn(x.nrows(), kept.len(), |i, c| {
        let j = kept[c];
        (x[(i, j)] - means[j]) / sds[j]
    });
    Standardized {
        z,
        kept,
        means,
        sds,
        dropped,
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64], family: Family, lambda: f64) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows but {} responses",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::invalid("need at least two training rows"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "penalty {lambda} must be a finite non-negative number"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "training data contain missing or non-finite values",
        ));
    }
    if family == Family::Binomial && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("binomial responses must be 0 or 1"));
    }
    Ok(())
}

/// Minimises `mean loss + lambda * |beta|^2` with an unpenalised intercept,
/// where the loss is half the squared error (gaussian) or the negative
/// log-likelihood (binomial, by iteratively reweighted least squares).
///
/// With `lambda = 0` and perfectly separable binomial data the coefficients
/// diverge and the fit fails with a numeric error.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], family: Family, lambda: f64) -> Result<RidgeGlm> {
    check_inputs(x, y, family, lambda)?;
    let s = standardize(x);
    let n = x.nrows() as f64;
    let p = s.kept.len();
    let ybar = y.iter().sum::<f64>() / n;

    let (b0, beta) = match family {
        Family::Gaussian => {
            let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ybar));
            if p == 0 {
                (ybar, DVector::zeros(0))
            } else {
                let mut a = s.z.transpose() * &s.z / n;
                for d in 0..p {
                    a[(d, d)] += 2.0 * lambda;
                }
                let rhs = s.z.transpose() * yc / n;
                let beta = a
                    .cholesky()
                    .ok_or_else(|| {
                        Error::Numeric(
                            "normal equations are singular; use a positive penalty".into(),
                        )
                    })?
                    .solve(&rhs);
                (ybar, beta)
            }
        }
        Family::Binomial => irls(&s.z, y, lambda)?,
    };

    let mut coefficients = DVector::zeros(x.ncols());
    let mut intercept = b0;
    for (c, &j) in s.kept.iter().enumerate() {
        coefficients[j] = beta[c] / s.sds[j];
        intercept -= coefficients[j] * s.means[j];
    }
    Ok(RidgeGlm {
        family,
        coefficients,
        intercept,
        penalty: lambda,
        means: s.means,
        sds: s.sds,
        dropped: s.dropped,
    })
}

fn binomial_objective(
    z: &DMatrix<f64>,
    y: &[f64],
    b0: f64,
    beta: &DVector<f64>,
    lambda: f64,
) -> f64 {
    let eta = z * beta;
    let n = y.len() as f64;
    let nll: f64 = eta
        .iter()
        .zip(y)
        .map(|(&e, &yi)| {
            let e = e + b0;
            // log(1 + exp(e)) - y e, computed stably.
            let softplus = if e > 0.0 {
                e + (-e).exp().ln_1p()
            } else {
                e.exp().ln_1p()
            };
            softplus - yi * e
        })
        .sum();
    nll / n + lambda * beta.norm_squared()
}

fn irls(z: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<(f64, DVector<f64>)> {
    const MAX_ITER: usize = 100;
    let n = y.len();
    let p = z.ncols();
    let nf = n as f64;
    let ybar = y.iter().sum::<f64>() / nf;
    if ybar == 0.0 || ybar == 1.0 {
        return Err(Error::invalid("binomial response has a single class"));
    }
    let mut b0 = (ybar / (1.0 - ybar)).ln();
    let mut beta = DVector::zeros(p);
    let mut obj = binomial_objective(z, y, b0, &beta, lambda);
    for _ in 0..MAX_ITER {
        let eta = z * &beta;
        let mut grad = DVector::zeros(p + 1);
        let mut hess = DMatrix::zeros(p + 1, p + 1);
        for i in 0..n {
            let mu = logistic(eta[i] + b0);
            let w = mu * (1.0 - mu);
            let r = mu - y[i];
            grad[0] += r;
            hess[(0, 0)] += w;
            for a in 0..p {
                let za = z[(i, a)];
                grad[a + 1] += r * za;
                hess[(0, a + 1)] += w * za;
                for b in a..p {
                    hess[(a + 1, b + 1)] += w * za * z[(i, b)];
                }
            }
        }
        for a in 0..=p {
            for b in a..=p {
                hess[(a, b)] /= nf;
                hess[(b, a)] = hess[(a, b)];
            }
            grad[a] /= nf;
        }
        for a in 0..p {
            grad[a + 1] += 2.0 * lambda * beta[a];
            hess[(a + 1, a + 1)] += 2.0 * lambda;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                return Err(Error::Numeric(
                    "IRLS Hessian is singular (perfect separation with zero penalty?)".into(),
                ))
            }
        };
        let mut t = 1.0;
        let (mut nb0, mut nbeta, mut nobj);
        loop {
            nb0 = b0 - t * step[0];
            nbeta = &beta - step.rows(1, p) * t;
            nobj = binomial_objective(z, y, nb0, &nbeta, lambda);
            if nobj <= obj + 1e-15 * obj.abs() || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        let moved = (t * step.amax()).abs();
        b0 = nb0;
        beta = nbeta;
        let improvement = obj - nobj;
        obj = nobj;
        if !b0.is_finite() || beta.iter().any(|v| !v.is_finite()) || beta.amax() > 1e8 {
            break;
        }
        if moved < 1e-10 || (improvement.abs() < 1e-16 && moved < 1e-6) {
            return Ok((b0, beta));
        }
    }
    Err(Error::Numeric(format!(
        "IRLS did not converge in {MAX_ITER} iterations (perfect separation with a small penalty?)"
    )))
}

/// Mean squared error (gaussian) or mean negative log-likelihood (binomial).
pub fn validation_loss(model: &RidgeGlm, x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    let pred = model.predict(x)?;
    let n = y.len() as f64;
    Ok(match model.family {
        Family::Gaussian => {
            pred.iter()
                .zip(y)
                .map(|(p, t)| (p - t).powi(2))
                .sum::<f64>()
                / n
        }
        Family::Binomial => {
            -pred
                .iter()
                .zip(y)
                .map(|(&p, &t)| {
                    let p = p.clamp(1e-15, 1.0 - 1e-15);
                    t * p.ln() + (1.0 - t) * (1.0 - p).ln()
                })
                .sum::<f64>()
                / n
        }
    })
}

/// `n` log-spaced penalties from `lambda_max` down to `lambda_max * ratio`.
/// `lambda_max` follows the usual ridge-path convention: the largest
/// standardised gradient at the null model, divided by 0.001.
pub fn lambda_grid(x: &DMatrix<f64>, y: &[f64], n: usize, ratio: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("penalty grid must be non-empty"));
    }
    let s = standardize(x);
    let nf = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / nf;
    let r = DVector::from_iterator(y.len(), y.iter().map(|v| v - ybar));
    let g = (s.z.transpose() * r).amax() / nf;
    // The penalty here is lambda * |beta|^2, i.e. twice the usual lambda / 2.
    let lambda_max = if g > 0.0 { g / (2.0 * 1e-3) } else { 1.0 };
    if n == 1 {
        return Ok(vec![lambda_max]);
    }
    let step = ratio.ln() / (n - 1) as f64;
    Ok((0..n)
        .map(|i| lambda_max * (step * i as f64).exp())
        .collect())
}

/// Penalty with the lowest validation loss; ties go to the larger penalty.
pub fn select_penalty(
    x_train: &DMatrix<f64>,
    y_train: &[f64],
    x_val: &DMatrix<f64>,
    y_val: &[f64],
    family: Family,
    grid: &[f64],
) -> Result<(f64, RidgeGlm)> {
    let mut best: Option<(f64, f64, RidgeGlm)> = None;
    for &lambda in grid {
        let model = fit_ridge(x_train, y_train, family, lambda)?;
        let loss = validation_loss(&model, x_val, y_val)?;
        let better = match &best {
            None => true,
            Some((bl, bloss, _)) => loss < *bloss || (loss == *bloss && lambda > *bl),
        };
        if better {
            best = Some((lambda, loss, model));
        }
    }
    let (lambda, _, model) =
        best.ok_or_else(|| Error::invalid("penalty grid must be non-empty"))?;
    Ok((lambda, model))
}
