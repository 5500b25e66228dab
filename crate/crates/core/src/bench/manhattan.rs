//! Piecewise two-dimensional validation function on `[-1, 1]^2` with three
//! global regions: a checkerboard of 0/1 plateaus on the right half, a
//! product of sines in the lower-left quadrant and a shifted paraboloid in
//! the upper-left quadrant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManhattanSpec {
    /// Checkerboard cells along the vertical direction.
    pub checker_rows: usize,
    /// Checkerboard cells along the horizontal direction.
    pub checker_cols: usize,
}

impl Default for ManhattanSpec {
    fn default() -> Self {
        Self {
            checker_rows: 4,
            checker_cols: 4,
        }
    }
}

/// Evaluate the function. Ties: the line `x1 = 0` belongs to the
/// checkerboard, the ray `x1 < 0, x2 = 0` to the paraboloid.
pub fn manhattan(x: &[f64], spec: &ManhattanSpec) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::invalid("the function is two-dimensional"));
    }
    let (x1, x2) = (x[0], x[1]);
    if !(-1.0..=1.0).contains(&x1) || !(-1.0..=1.0).contains(&x2) {
        return Err(Error::invalid(format!(
            "point ({x1}, {x2}) lies outside [-1, 1]^2"
        )));
    }
    if spec.checker_rows == 0 || spec.checker_cols == 0 {
        return Err(Error::invalid("checkerboard needs at least one cell"));
    }
    Ok(if x1 >= 0.0 {
        let col = ((x1 * spec.checker_cols as f64) as usize).min(spec.checker_cols - 1);
        let row = (((x2 + 1.0) / 2.0 * spec.checker_rows as f64) as usize)
            .min(spec.checker_rows - 1);
        if (row + col) % 2 == 0 {
            1.0
        } else {
            0.0
        }
    } else if x2 >= 0.0 {
        1.0 + (2.0 / 7.0) * (2.0 * x1 + 1.0).powi(2) + (2.0 * x2 + 1.0).powi(2)
    } else {
        (7.0 * x1).sin() * (4.0 * x2).sin()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn paraboloid_value() {
        let spec = ManhattanSpec::default();
        // (2 x1 + 1) vanishes at x1 = -0.5: 1 + 0 + (2*0.5+1)^2 = 5
        assert_relative_eq!(manhattan(&[-0.5, 0.5], &spec).unwrap(), 5.0);
    }

    #[test]
    fn sine_region_value() {
        let spec = ManhattanSpec::default();
        let v = manhattan(&[-0.5, -0.5], &spec).unwrap();
        assert_relative_eq!(v, (-3.5f64).sin() * (-2.0f64).sin(), epsilon = 1e-15);
        assert_relative_eq!(v, -0.3189, epsilon = 1e-4);
    }

    #[test]
    fn checkerboard_is_binary() {
        let spec = ManhattanSpec::default();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut seen = [false; 2];
        for _ in 0..10_000 {
            let x = [rng.random::<f64>(), rng.random::<f64>() * 2.0 - 1.0];
            let v = manhattan(&x, &spec).unwrap();
            assert!(v == 0.0 || v == 1.0, "checker value {v} at {x:?}");
            seen[v as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn branch_tie_rules() {
        let spec = ManhattanSpec::default();
        // x1 = 0 resolves to the checkerboard: first column
        let v = manhattan(&[0.0, -0.99], &spec).unwrap();
        assert!(v == 0.0 || v == 1.0);
        // x1 < 0, x2 = 0 resolves to the paraboloid
        let v = manhattan(&[-0.5, 0.0], &spec).unwrap();
        assert_relative_eq!(v, 1.0 + 0.0 + 1.0);
    }

    #[test]
    fn every_point_hits_exactly_one_branch() {
        let spec = ManhattanSpec::default();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let x = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
            let checker = x[0] >= 0.0;
            let poly = x[0] < 0.0 && x[1] >= 0.0;
            let sine = x[0] < 0.0 && x[1] < 0.0;
            assert_eq!(usize::from(checker) + usize::from(poly) + usize::from(sine), 1);
            manhattan(&x, &spec).unwrap();
        }
    }

    #[test]
    fn rejects_out_of_domain() {
        let spec = ManhattanSpec::default();
        assert!(manhattan(&[1.2, 0.0], &spec).is_err());
        assert!(manhattan(&[0.0], &spec).is_err());
    }
}
