use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::estimator::{
    fit_lasso, fit_lasso_covariance, CovarianceForm, LassoProblem, LassoSolution, LinkKind, SolverOptions,
};

/// Observed design rows and responses, with running sums `Σ x xᵀ` and `Σ y x`
/// kept alongside so linear-link refits never touch the raw rows.
#[derive(Debug, Clone)]
pub struct History {
    d: usize,
    rows: Vec<f64>,
    y: Vec<f64>,
    gram_sum: DMatrix<f64>,
    xty_sum: DVector<f64>,
}

impl History {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            rows: Vec::new(),
            y: Vec::new(),
            gram_sum: DMatrix::zeros(d, d),
            xty_sum: DVector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn push(&mut self, x: &DVector<f64>, y: f64) {
        debug_assert_eq!(x.len(), self.d);
        self.rows.extend(x.iter());
        self.y.push(y);
        self.gram_sum.ger(1.0, x, x, 1.0);
        self.xty_sum.axpy(y, x, 1.0);
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Observed rows as an `n × d` matrix.
    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.d, &self.rows)
    }

    /// Empirical Gram matrix `(1/n) Σ x xᵀ`.
    pub fn empirical_gram(&self) -> DMatrix<f64> {
        &self.gram_sum / self.len().max(1) as f64
    }

    pub fn covariance_form(&self) -> CovarianceForm {
        let n = self.len().max(1) as f64;
        CovarianceForm { gram: &self.gram_sum / n, xty: &self.xty_sum / n }
    }

    pub fn problem(&self, lambda: f64, link: LinkKind) -> Result<LassoProblem> {
        LassoProblem::new(self.design(), DVector::from_column_slice(&self.y), lambda, link)
    }

    /// Lasso fit on everything observed so far. Requires at least one row.
    pub fn fit(
        &self,
        lambda: f64,
        link: LinkKind,
        init: Option<&DVector<f64>>,
        opts: &SolverOptions,
    ) -> Result<LassoSolution> {
        match link {
            LinkKind::Linear => fit_lasso_covariance(&self.covariance_form(), lambda, init, opts),
            LinkKind::Logistic => fit_lasso(&self.problem(lambda, link)?, init, opts),
        }
    }
}
