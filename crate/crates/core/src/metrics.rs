//! Generalization-error metrics evaluated on validation sets.

use crate::error::{Error, Result};

/// Normalized mean-square error: squared prediction error divided by the
/// squared deviation of the truth from its own mean.
pub fn nmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::invalid("nmse needs at least two samples"));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let denom: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if denom <= 0.0 {
        return Err(Error::degenerate("y_true is constant, nmse undefined"));
    }
    let num: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(y, yh)| (y - yh).powi(2))
        .sum();
    Ok(num / denom)
}

/// Mean absolute error.
pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("mae needs at least one sample"));
    }
    Ok(y_true
        .iter()
        .zip(y_pred)
        .map(|(y, yh)| (y - yh).abs())
        .sum::<f64>()
        / y_true.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn nmse_perfect_prediction_is_zero() {
        let y = [1.0, 2.0, 3.0];
        assert_relative_eq!(nmse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn nmse_mean_prediction_is_one() {
        let y = [1.0, 2.0, 3.0, 10.0];
        let mean = y.iter().sum::<f64>() / 4.0;
        let pred = [mean; 4];
        assert_relative_eq!(nmse(&y, &pred).unwrap(), 1.0);
    }

    #[test]
    fn nmse_direct_arithmetic() {
        // numerator 1, denominator 2
        assert_relative_eq!(
            nmse(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap(),
            0.5
        );
    }

    #[test]
    fn nmse_constant_truth_errors() {
        assert!(nmse(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn mae_cases() {
        assert_relative_eq!(mae(&[1.0, -1.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert_relative_eq!(mae(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(
            mae(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap(),
            1.0 / 3.0
        );
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        // nmse is invariant under a common shift and a common nonzero scaling
        #[test]
        fn nmse_shift_and_scale_invariance(
            ys in proptest::collection::vec(-50.0..50.0f64, 3..20),
            ps in proptest::collection::vec(-50.0..50.0f64, 3..20),
            c in -10.0..10.0f64,
            a in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64],
        ) {
            let n = ys.len().min(ps.len());
            let y = &ys[..n];
            let p = &ps[..n];
            prop_assume!(nmse(y, p).is_ok());
            let base = nmse(y, p).unwrap();

            let y_c: Vec<f64> = y.iter().map(|v| v + c).collect();
            let p_c: Vec<f64> = p.iter().map(|v| v + c).collect();
            prop_assert!((nmse(&y_c, &p_c).unwrap() - base).abs() < 1e-9 * (1.0 + base));

            let y_a: Vec<f64> = y.iter().map(|v| v * a).collect();
            let p_a: Vec<f64> = p.iter().map(|v| v * a).collect();
            prop_assert!((nmse(&y_a, &p_a).unwrap() - base).abs() < 1e-9 * (1.0 + base));
        }

        // mae scales linearly with |a|
        #[test]
        fn mae_scales_linearly(
            ys in proptest::collection::vec(-50.0..50.0f64, 1..20),
            ps in proptest::collection::vec(-50.0..50.0f64, 1..20),
            a in -10.0..10.0f64,
        ) {
            let n = ys.len().min(ps.len());
            let y = &ys[..n];
            let p = &ps[..n];
            let base = mae(y, p).unwrap();
            let y_a: Vec<f64> = y.iter().map(|v| v * a).collect();
            let p_a: Vec<f64> = p.iter().map(|v| v * a).collect();
            prop_assert!((mae(&y_a, &p_a).unwrap() - a.abs() * base).abs() < 1e-9 * (1.0 + base));
        }
    }
}
