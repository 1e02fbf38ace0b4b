use serde::{Deserialize, Serialize};

use super::NoiseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extrapolation {
    /// Least-squares line evaluated at λ = 0.
    #[default]
    Linear,
    /// Interpolating polynomial through every point, evaluated at λ = 0.
    Richardson,
}

/// Extrapolates `(λ, value)` pairs to λ = 0, clamped to `[−1, 1]`.
pub fn zne_extrapolate(points: &[(f64, f64)], method: Extrapolation) -> Result<f64, NoiseError> {
    if points.len() < 2 {
        return Err(NoiseError::TooFewPoints(points.len()));
    }
    for (i, &(l, y)) in points.iter().enumerate() {
        if !(l.is_finite() && y.is_finite() && l >= 1.0) {
            return Err(NoiseError::InvalidPoint(l, y));
        }
        if points[..i].iter().any(|&(m, _)| m == l) {
            return Err(NoiseError::DuplicateScale(l));
        }
    }
    let value = match method {
        Extrapolation::Linear => {
            let n = points.len() as f64;
            let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
            let my = points.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = points.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = points.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
            my - (sxy / sxx) * mx
        }
        Extrapolation::Richardson => points
            .iter()
            .enumerate()
            .map(|(i, &(li, yi))| {
                let w: f64 = points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &(lj, _))| lj / (lj - li))
                    .product();
                w * yi
            })
            .sum(),
    };
    Ok(value.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_line() {
        let v = zne_extrapolate(&[(1.0, 0.8), (3.0, 0.4)], Extrapolation::Linear).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_data() {
        for m in [Extrapolation::Linear, Extrapolation::Richardson] {
            let v = zne_extrapolate(&[(1.0, 0.37), (3.0, 0.37)], m).unwrap();
            assert!((v - 0.37).abs() < 1e-15);
        }
    }

    #[test]
    fn richardson_on_linear_data() {
        let v = zne_extrapolate(&[(1.0, 0.9), (2.0, 0.8), (3.0, 0.7)], Extrapolation::Richardson).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_exact_on_quadratic() {
        let f = |l: f64| 0.6 - 0.1 * l + 0.02 * l * l;
        let pts: Vec<_> = [1.0, 2.0, 3.5].iter().map(|&l| (l, f(l))).collect();
        let v = zne_extrapolate(&pts, Extrapolation::Richardson).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
    }

    #[test]
    fn clamps_overshoot() {
        let v = zne_extrapolate(&[(1.0, 0.9), (2.0, 0.5)], Extrapolation::Linear).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(zne_extrapolate(&[(1.0, 0.5)], Extrapolation::Linear), Err(NoiseError::TooFewPoints(1)));
        assert_eq!(
            zne_extrapolate(&[(1.0, 0.5), (1.0, 0.4)], Extrapolation::Richardson),
            Err(NoiseError::DuplicateScale(1.0))
        );
        assert!(zne_extrapolate(&[(0.5, 0.5), (1.0, 0.4)], Extrapolation::Linear).is_err());
    }
}
