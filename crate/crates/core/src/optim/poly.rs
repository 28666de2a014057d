//! Multivariate polynomial feature maps and models.

use super::{lm_fit, LmFit, LmSettings, OptimError};

/// Number of monomials of total degree ≤ `degree` in `input_dim` variables,
/// i.e. C(input_dim + degree, degree).
pub fn monomial_count(input_dim: usize, degree: u32) -> usize {
    let mut count: usize = 1;
    for i in 1..=degree as usize {
        count = count * (input_dim + i) / i;
    }
    count
}

/// Exponent tuples of all monomials of total degree ≤ `degree`, in graded
/// lexicographic order starting with the constant term.
///
/// For two variables and degree 2 the order is `1, x, y, x², xy, y²`.
pub fn monomial_exponents(input_dim: usize, degree: u32) -> Vec<Vec<u8>> {
    fn fill(
        prefix: &mut Vec<u8>,
        remaining_vars: usize,
        remaining_deg: u8,
        out: &mut Vec<Vec<u8>>,
    ) {
        if remaining_vars == 0 {
            if remaining_deg == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        if remaining_vars == 1 {
            prefix.push(remaining_deg);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining_deg).rev() {
            prefix.push(e);
            fill(prefix, remaining_vars - 1, remaining_deg - e, out);
            prefix.pop();
        }
    }

    let mut out = Vec::with_capacity(monomial_count(input_dim, degree));
    for total in 0..=degree as u8 {
        fill(&mut Vec::new(), input_dim, total, &mut out);
    }
    out
}

/// Evaluate the monomial vector of `x` up to `degree`, in the fixed order of
/// [`monomial_exponents`].
pub fn poly_features(x: &[f64], degree: u32) -> Vec<f64> {
    let exponents = monomial_exponents(x.len(), degree);
    features_for(&exponents, x)
}

fn features_for(exponents: &[Vec<u8>], x: &[f64]) -> Vec<f64> {
    exponents
        .iter()
        .map(|exps| {
            let mut v = 1.0;
            for (xi, &e) in x.iter().zip(exps) {
                for _ in 0..e {
                    v *= xi;
                }
            }
            v
        })
        .collect()
}

/// Polynomial map from `input_dim` variables to `output_dim` values with all
/// monomials of total degree ≤ `degree`.
///
/// Coefficients are stored per output dimension, each block in the monomial
/// order of [`monomial_exponents`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialModel {
    pub input_dim: usize,
    pub degree: u32,
    pub output_dim: usize,
    pub coefficients: Vec<f64>,
}

impl PolynomialModel {
    /// All-zero model.
    pub fn zeros(input_dim: usize, degree: u32, output_dim: usize) -> Self {
        Self {
            input_dim,
            degree,
            output_dim,
            coefficients: vec![0.0; monomial_count(input_dim, degree) * output_dim],
        }
    }

    pub fn coefficient_count(&self) -> usize {
        monomial_count(self.input_dim, self.degree) * self.output_dim
    }

    /// Evaluate the model at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, OptimError> {
        if x.len() != self.input_dim {
            return Err(OptimError::DimMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let feats = poly_features(x, self.degree);
        Ok(self.eval_features(&feats))
    }

    /// Evaluate from a precomputed feature vector.
    pub fn eval_features(&self, feats: &[f64]) -> Vec<f64> {
        let n_mono = feats.len();
        (0..self.output_dim)
            .map(|o| {
                let block = &self.coefficients[o * n_mono..(o + 1) * n_mono];
                block.iter().zip(feats).map(|(c, f)| c * f).sum()
            })
            .collect()
    }
}

/// Fit a polynomial of the given degree to `(x, y)` samples by least squares
/// through [`lm_fit`], starting from the zero model.
pub fn fit_polynomial_lm(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    degree: u32,
    settings: &LmSettings,
) -> Result<(PolynomialModel, LmFit), OptimError> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(OptimError::EmptyDataset);
    }
    let input_dim = xs[0].len();
    let output_dim = ys[0].len();
    let exponents = monomial_exponents(input_dim, degree);
    let feats: Vec<Vec<f64>> = xs.iter().map(|x| features_for(&exponents, x)).collect();
    let n_mono = exponents.len();

    let template = PolynomialModel::zeros(input_dim, degree, output_dim);
    let residual = |params: &[f64]| {
        let mut r = Vec::with_capacity(xs.len() * output_dim);
        for (f, y) in feats.iter().zip(ys) {
            for o in 0..output_dim {
                let block = &params[o * n_mono..(o + 1) * n_mono];
                let pred: f64 = block.iter().zip(f).map(|(c, v)| c * v).sum();
                r.push(pred - y[o]);
            }
        }
        r
    };

    let init = vec![0.0; template.coefficient_count()];
    let fit = lm_fit(residual, &init, settings)?;
    let model = PolynomialModel {
        coefficients: fit.params.clone(),
        ..template
    };
    Ok((model, fit))
}
