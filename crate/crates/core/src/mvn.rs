//! Dense multivariate normal and inverse-Wishart primitives used by the
//! hierarchical updates. Everything works through Cholesky factors; the
//! matrices involved are small (one row/column per model statistic).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A positive-definite covariance with its cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct CholCov {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl CholCov {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::NotPositiveDefinite(format!("{}x{} covariance", matrix.nrows(), matrix.ncols())))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(CholCov { matrix, chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Lower Cholesky factor.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Log-density of N(mean, self) at x.
    pub fn log_density(&self, x: &DVector<f64>, mean: &DVector<f64>) -> f64 {
        let p = self.dim() as f64;
        let centered = x - mean;
        let solved = self.chol.solve(&centered);
        let quad = centered.dot(&solved);
        -0.5 * (p * (2.0 * std::f64::consts::PI).ln() + self.log_det + quad)
    }

    /// Draws mean + L eps with eps standard normal.
    pub fn sample<R: Rng>(&self, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let eps = standard_normal_vector(self.dim(), rng);
        mean + self.chol.l() * eps
    }
}

pub fn standard_normal_vector<R: Rng>(p: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)))
}

/// Multivariate normal log-density with an explicit covariance matrix.
pub fn log_mvn(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    Ok(CholCov::new(cov.clone())?.log_density(x, mean))
}

/// Draws from the Wishart distribution W(df, scale) via the Bartlett
/// decomposition: scale = L Lᵀ, A lower-triangular with chi distributed
/// diagonal, W = (L A)(L A)ᵀ.
pub fn sample_wishart<R: Rng>(df: f64, scale: &CholCov, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = scale.dim();
    if df <= (p - 1) as f64 {
        return Err(Error::InvalidConfig(format!(
            "Wishart degrees of freedom {df} too small for dimension {p}"
        )));
    }
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = scale.chol.l() * a;
    Ok(&la * la.transpose())
}

/// Draws from the inverse-Wishart distribution with density
/// proportional to |Σ|^{-(ν+p+1)/2} exp(-tr(S Σ⁻¹)/2).
///
/// Implemented as the inverse of a Wishart(ν, S⁻¹) draw.
pub fn sample_inverse_wishart<R: Rng>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let s = CholCov::new(scale.clone())?;
    let s_inv = CholCov::new(s.inverse())?;
    let w = sample_wishart(df, &s_inv, rng)?;
    let w_chol = Cholesky::new(w).ok_or_else(|| Error::NotPositiveDefinite("Wishart draw".into()))?;
    let mut inv = w_chol.inverse();
    // enforce exact symmetry against round-off drift
    for i in 0..inv.nrows() {
        for j in 0..i {
            let avg = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = avg;
            inv[(j, i)] = avg;
        }
    }
    Ok(inv)
}

/// Symmetric positive-definite sanity check used when loading priors.
pub fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("{what} is not square")));
    }
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::NotPositiveDefinite(format!("{what} is not symmetric")));
            }
        }
    }
    Cholesky::new(m.clone())
        .map(|_| ())
        .ok_or_else(|| Error::NotPositiveDefinite(what.into()))
}
