use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::model::PreparedCircuit;
use crate::{Error, Result};

/// Linear map from descriptor to label with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl RidgeModel {
    /// Minimizes `Σ wᵢ (yᵢ − b − xᵢ·β)² + λ‖β‖²` in closed form. Centering
    /// with the weighted means removes the intercept from the penalty.
    pub fn fit(x: &[Vec<f64>], y: &[f64], weights: &[f64], lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!("ridge penalty must be positive, got {lambda}")));
        }
        if x.is_empty() || x.len() != y.len() || x.len() != weights.len() {
            return Err(Error::Data(format!("ridge fit with {} rows, {} labels, {} weights", x.len(), y.len(), weights.len())));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::Data("ridge rows differ in length".into()));
        }
        if weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(Error::Data("ridge weights must be finite and non-negative".into()));
        }
        let wsum: f64 = weights.iter().sum();
        if wsum <= 0.0 {
            return Err(Error::Data("ridge weights sum to zero".into()));
        }
        let mut xmean = vec![0.0; d];
        let mut ymean = 0.0;
        for ((row, &yi), &w) in x.iter().zip(y).zip(weights) {
            for (m, &v) in xmean.iter_mut().zip(row) {
                *m += w * v;
            }
            ymean += w * yi;
        }
        xmean.iter_mut().for_each(|m| *m /= wsum);
        ymean /= wsum;

        let mut gram = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        let mut xc = vec![0.0; d];
        for ((row, &yi), &w) in x.iter().zip(y).zip(weights) {
            for ((c, &v), &m) in xc.iter_mut().zip(row).zip(&xmean) {
                *c = v - m;
            }
            let yc = yi - ymean;
            for i in 0..d {
                let wi = w * xc[i];
                rhs[i] += wi * yc;
                for j in i..d {
                    gram[(i, j)] += wi * xc[j];
                }
            }
        }
        for i in 0..d {
            gram[(i, i)] += lambda;
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Numeric("ridge normal equations are not positive definite".into()))?;
        let beta = chol.solve(&rhs);
        let coef: Vec<f64> = beta.iter().copied().collect();
        let intercept = ymean - coef.iter().zip(&xmean).map(|(b, m)| b * m).sum::<f64>();
        if !intercept.is_finite() || coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numeric("ridge fit produced non-finite coefficients".into()));
        }
        Ok(RidgeModel { intercept, coef })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Fits on every (circuit, qubit) of `train` against `labels` and predicts
/// every qubit of `eval`.
pub fn ridge_predictions(
    train: &[&PreparedCircuit],
    labels: &BTreeMap<(usize, usize), f64>,
    eval: &[&PreparedCircuit],
    lambda: f64,
) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for c in train {
        for (&q, desc) in c.qubits.iter().zip(&c.descriptors) {
            let label = labels
                .get(&(c.circuit_id, q))
                .ok_or_else(|| Error::Data(format!("no label for circuit {} qubit {q}", c.circuit_id)))?;
            x.push(desc.clone());
            y.push(*label);
        }
    }
    let model = RidgeModel::fit(&x, &y, &vec![1.0; y.len()], lambda)?;
    let mut out = BTreeMap::new();
    for c in eval {
        for (&q, desc) in c.qubits.iter().zip(&c.descriptors) {
            if desc.len() != model.coef.len() {
                return Err(Error::Data(format!("descriptor of length {} for a {}-feature fit", desc.len(), model.coef.len())));
            }
            out.insert((c.circuit_id, q), model.predict(desc));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.1, ((i * 7) % 5) as f64, 1.0]).collect();
        let y = x.iter().map(|r| 0.3 + 2.0 * r[0] - 0.5 * r[1] + 0.01 * (r[0] * 13.0).sin()).collect();
        (x, y)
    }

    #[test]
    fn recovers_linear_map_at_small_penalty() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 0.3 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let m = RidgeModel::fit(&x, &y, &vec![1.0; 20], 1e-10).unwrap();
        assert!((m.intercept - 0.3).abs() < 1e-6);
        assert!((m.coef[0] - 2.0).abs() < 1e-6 && (m.coef[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn huge_penalty_predicts_mean() {
        let (x, y) = toy();
        let m = RidgeModel::fit(&x, &y, &vec![1.0; y.len()], 1e12).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        for r in &x {
            assert!((m.predict(r) - mean).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicated_rows_equal_doubled_weights() {
        let (x, y) = toy();
        let mut xd = x.clone();
        let mut yd = y.clone();
        xd.extend(x[..4].iter().cloned());
        yd.extend_from_slice(&y[..4]);
        let mut w = vec![1.0; y.len()];
        w[..4].iter_mut().for_each(|v| *v = 2.0);
        let a = RidgeModel::fit(&xd, &yd, &vec![1.0; yd.len()], 0.1).unwrap();
        let b = RidgeModel::fit(&x, &y, &w, 0.1).unwrap();
        assert!((a.intercept - b.intercept).abs() < 1e-12);
        for (p, q) in a.coef.iter().zip(&b.coef) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_is_harmless() {
        let (x, y) = toy();
        let m = RidgeModel::fit(&x, &y, &vec![1.0; y.len()], 1e-3).unwrap();
        assert_eq!(m.coef[2], 0.0);
    }

    #[test]
    fn zero_penalty_rejected() {
        let (x, y) = toy();
        assert_eq!(RidgeModel::fit(&x, &y, &vec![1.0; y.len()], 0.0).unwrap_err().exit_code(), 2);
    }
}
