//! Residual accumulation.

use nalgebra::{DMatrix, DVector};

/// Largest absolute defect of an identity and the size of the terms that
/// entered it. `normalized = max_abs / scale`, with `scale ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub max_abs: f64,
    pub scale: f64,
}

impl Default for Residual {
    fn default() -> Self {
        Residual { max_abs: 0.0, scale: 1.0 }
    }
}

impl Residual {
    pub fn normalized(&self) -> f64 {
        self.max_abs / self.scale
    }

    /// Records a scalar defect and the magnitudes of its terms. NaN defects
    /// poison the residual so they cannot pass a tolerance check.
    pub fn record(&mut self, defect: f64, terms: &[f64]) {
        let d = defect.abs();
        if d.is_nan() || d > self.max_abs {
            self.max_abs = if self.max_abs.is_nan() { self.max_abs } else { d };
        }
        for t in terms {
            self.scale = self.scale.max(t.abs());
        }
    }

    pub fn record_vector(&mut self, defect: &DVector<f64>, terms: &[&DVector<f64>]) {
        let t: Vec<f64> = terms.iter().map(|v| v.amax()).collect();
        self.record(defect.amax(), &t);
    }

    pub fn record_matrix(&mut self, defect: &DMatrix<f64>, terms: &[&DMatrix<f64>]) {
        let t: Vec<f64> = terms.iter().map(|m| m.amax()).collect();
        self.record(defect.amax(), &t);
    }

    pub fn merge(&mut self, other: &Residual) {
        self.record(other.max_abs, &[other.scale]);
    }
}
