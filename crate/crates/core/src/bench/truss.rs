//! Snap-through of a shallow two-bar truss under a tip load. The
//! equilibrium load at inclination `a` (initial inclination `a0`) is
//! `P = -2 E A tan(a) (cos(a0) - cos(a))`; past the critical load the
//! structure jumps to the far equilibrium branch, making the tip
//! displacement a discontinuous function of the load.

use serde::{Deserialize, Serialize};

use crate::dist::{DistFamily, InputModel, MarginalDistribution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrussSpec {
    /// Undeformed bar length in meters.
    pub l0: f64,
    /// Initial inclination in radians.
    pub alpha0: f64,
    /// Marginals of (load, Young's modulus in GPa, section area in cm^2).
    pub input_model: InputModel,
    /// Multiplier applied to the sampled load before use, in newtons per
    /// table unit. The default reads the tabulated load as kilonewtons,
    /// which places the load distribution across the critical load.
    pub load_unit_scale: f64,
}

impl Default for TrussSpec {
    fn default() -> Self {
        let input_model = InputModel::new(vec![
            MarginalDistribution::new(DistFamily::Gumbel, 430.0, 0.20).unwrap(),
            MarginalDistribution::new(DistFamily::Lognormal, 210.0, 0.10).unwrap(),
            MarginalDistribution::new(DistFamily::Gaussian, 10.0, 0.05).unwrap(),
        ])
        .unwrap();
        Self {
            l0: 5.0,
            alpha0: 10.0_f64.to_radians(),
            input_model,
            load_unit_scale: 1000.0,
        }
    }
}

/// Equilibrium load at inclination `alpha`.
fn load_at(alpha: f64, alpha0: f64, ea: f64) -> f64 {
    -2.0 * ea * alpha.tan() * (alpha0.cos() - alpha.cos())
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-14 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisection for `f(x) = 0` on a bracket with `f(a) >= 0 >= f(b)` or the
/// reverse; converges to machine-level bracket width.
fn bisect(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::numerical(format!(
            "no sign change on bracket [{a}, {b}] (f = {fa:.3e}, {fb:.3e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a).abs() <= f64::EPSILON * a.abs().max(b.abs()).max(1e-3) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Critical load and the inclination where it is attained, by bounded
/// scalar maximization of the equilibrium load over the initial branch.
fn critical_point(e_modulus: f64, area: f64, alpha0: f64) -> (f64, f64) {
    let ea = e_modulus * area;
    let alpha_star = golden_max(1e-12, alpha0 - 1e-12, |a| load_at(a, alpha0, ea));
    (load_at(alpha_star, alpha0, ea), alpha_star)
}

/// Largest load the pre-snap branch can carry.
pub fn truss_critical_load(e_modulus: f64, area: f64, alpha0: f64) -> f64 {
    critical_point(e_modulus, area, alpha0).0
}

/// Tip displacement under load `p` (newtons): the stable pre-snap
/// equilibrium up to the critical load, the far post-snap equilibrium
/// beyond it.
pub fn truss_displacement(p: f64, e_modulus: f64, area: f64, spec: &TrussSpec) -> Result<f64> {
    if p < 0.0 {
        return Err(Error::invalid(format!("load must be non-negative, got {p}")));
    }
    let ea = e_modulus * area;
    let alpha0 = spec.alpha0;
    let (p_cr, alpha_star) = critical_point(e_modulus, area, alpha0);

    let alpha = if p <= p_cr {
        // stable branch: load decreases from the critical value to zero as
        // the inclination grows back to alpha0
        bisect(alpha_star, alpha0, |a| load_at(a, alpha0, ea) - p)?
    } else {
        // post-snap branch on the far side: load grows without bound as the
        // inclination approaches the vertical
        let mut b = -alpha0 - 1e-6;
        let mut k = 0;
        while load_at(b, alpha0, ea) < p {
            b = -alpha0 - (std::f64::consts::FRAC_PI_2 - alpha0 - 1e-9) * (1.0 - 0.5f64.powi(k));
            k += 1;
            if k > 60 {
                return Err(Error::numerical(format!(
                    "failed to bracket the post-snap equilibrium for P = {p:.3e}"
                )));
            }
        }
        bisect(-alpha0, b, |a| load_at(a, alpha0, ea) - p)?
    };
    Ok(spec.l0 * alpha0.cos() * (alpha0.tan() - alpha.tan()))
}

/// Displacement as a function of the tabulated inputs
/// (load, modulus in GPa, area in cm^2), applying the unit conventions.
pub fn truss_model(x: &[f64], spec: &TrussSpec) -> Result<f64> {
    if x.len() != 3 {
        return Err(Error::invalid("truss model takes (load, modulus, area)"));
    }
    let p = x[0] * spec.load_unit_scale;
    let e = x[1] * 1e9;
    let a = x[2] * 1e-4;
    truss_displacement(p.max(0.0), e, a, spec)
}

/// True branch indicator of a tabulated input point: false on the pre-snap
/// branch, true once the load exceeds the critical load.
pub fn truss_snapped(x: &[f64], spec: &TrussSpec) -> bool {
    let p = x[0] * spec.load_unit_scale;
    p > truss_critical_load(x[1] * 1e9, x[2] * 1e-4, spec.alpha0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    const EA: (f64, f64) = (210.0e9, 10.0e-4);

    #[test]
    fn critical_load_matches_small_angle_estimate() {
        let spec = TrussSpec::default();
        let (p_cr, alpha_star) = critical_point(EA.0, EA.1, spec.alpha0);
        // small-angle closed form E A a0^3 * 2 / (3 sqrt 3)
        let approx_pcr = EA.0 * EA.1 * spec.alpha0.powi(3) * 2.0 / (3.0 * 3.0_f64.sqrt());
        assert_relative_eq!(p_cr, approx_pcr, max_relative = 5e-3);
        assert_relative_eq!(p_cr, 4.297e5, max_relative = 1e-3);
        // exact maximizer satisfies cos(a*) = cbrt(cos(a0)); the argmax is
        // quadratically flat so the load is far more accurate than the angle
        assert_relative_eq!(alpha_star.cos(), spec.alpha0.cos().cbrt(), epsilon = 1e-7);
        let exact_alpha = spec.alpha0.cos().cbrt().acos();
        let exact_pcr =
            -2.0 * EA.0 * EA.1 * exact_alpha.tan() * (spec.alpha0.cos() - exact_alpha.cos());
        assert_relative_eq!(p_cr, exact_pcr, max_relative = 1e-12);
    }

    #[test]
    fn critical_load_scales_linearly_in_ea() {
        let spec = TrussSpec::default();
        let p1 = truss_critical_load(EA.0, EA.1, spec.alpha0);
        let p2 = truss_critical_load(EA.0, 2.0 * EA.1, spec.alpha0);
        assert_relative_eq!(p2, 2.0 * p1, max_relative = 1e-12);
        // vanishes with the initial inclination
        let tiny = truss_critical_load(EA.0, EA.1, 0.01_f64.to_radians());
        assert!(tiny < 1.0, "P_cr at 0.01 degrees = {tiny}");
    }

    #[test]
    fn zero_load_is_the_undeformed_state() {
        let spec = TrussSpec::default();
        let w = truss_displacement(0.0, EA.0, EA.1, &spec).unwrap();
        assert_relative_eq!(w, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pre_snap_displacement_matches_grid_scan() {
        let spec = TrussSpec::default();
        let p = 1e5;
        let w = truss_displacement(p, EA.0, EA.1, &spec).unwrap();
        // independent dense scan of the equilibrium equation over the
        // stable branch
        let ea = EA.0 * EA.1;
        let (_, alpha_star) = critical_point(EA.0, EA.1, spec.alpha0);
        let mut best = (f64::INFINITY, 0.0);
        let steps = 2_000_000;
        for i in 0..=steps {
            let a = alpha_star + (spec.alpha0 - alpha_star) * i as f64 / steps as f64;
            let gap = (load_at(a, spec.alpha0, ea) - p).abs();
            if gap < best.0 {
                best = (gap, a);
            }
        }
        let w_ref = spec.l0 * spec.alpha0.cos() * (spec.alpha0.tan() - best.1.tan());
        assert_relative_eq!(w, w_ref, epsilon = 1e-6);
        assert_relative_eq!(w, 0.042, epsilon = 2e-3);
    }

    #[test]
    fn equilibrium_residual_is_tiny() {
        let spec = TrussSpec::default();
        let ea = EA.0 * EA.1;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = rng.random::<f64>() * 1.2e6;
            let w = truss_displacement(p, EA.0, EA.1, &spec).unwrap();
            // recover the inclination from the displacement and check the
            // equilibrium equation reproduces the load
            let alpha = (spec.alpha0.tan() - w / (spec.l0 * spec.alpha0.cos())).atan();
            let p_back = load_at(alpha, spec.alpha0, ea);
            assert!(
                (p_back - p).abs() <= 1e-9 * p.max(1.0),
                "residual {} at P = {p}",
                (p_back - p).abs()
            );
        }
    }

    #[test]
    fn displacement_gap_separates_the_branches() {
        let spec = TrussSpec::default();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (mut pre, mut post) = (0usize, 0usize);
        for _ in 0..10_000 {
            let p = rng.random::<f64>() * 1.0e6;
            let w = truss_displacement(p, EA.0, EA.1, &spec).unwrap();
            assert!(
                w < 0.38 || w > 1.73,
                "displacement {w} inside the forbidden gap at P = {p}"
            );
            if w < 0.38 {
                pre += 1;
            } else {
                post += 1;
            }
        }
        assert!(pre > 0 && post > 0);
    }

    #[test]
    fn jump_at_the_critical_load_exceeds_one_meter() {
        let spec = TrussSpec::default();
        let p_cr = truss_critical_load(EA.0, EA.1, spec.alpha0);
        let left = truss_displacement(p_cr * (1.0 - 1e-9), EA.0, EA.1, &spec).unwrap();
        let right = truss_displacement(p_cr * (1.0 + 1e-9), EA.0, EA.1, &spec).unwrap();
        assert!(
            right - left > 1.0,
            "jump {} too small (left {left}, right {right})",
            right - left
        );
    }

    #[test]
    fn tabulated_units_give_the_documented_stiffness() {
        let spec = TrussSpec::default();
        // mean inputs: 430 kN load units, 210 GPa, 10 cm^2
        let w = truss_model(&[100.0, 210.0, 10.0], &spec).unwrap();
        let direct = truss_displacement(1e5, 210.0e9, 10.0e-4, &spec).unwrap();
        assert_relative_eq!(w, direct, epsilon = 1e-12);
    }

    #[test]
    fn snap_indicator_matches_displacement_branch() {
        let spec = TrussSpec::default();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..500 {
            let x = [
                rng.random::<f64>() * 900.0 + 50.0,
                rng.random::<f64>() * 100.0 + 160.0,
                rng.random::<f64>() * 4.0 + 8.0,
            ];
            let w = truss_model(&x, &spec).unwrap();
            assert_eq!(truss_snapped(&x, &spec), w > 1.0, "at {x:?}, w = {w}");
        }
    }

    #[test]
    fn rejects_negative_load() {
        let spec = TrussSpec::default();
        assert!(truss_displacement(-1.0, EA.0, EA.1, &spec).is_err());
    }

    #[test]
    fn sampled_displacements_are_bimodal() {
        // with the kilonewton load convention the snap probability is
        // intermediate and the displacement histogram splits in two
        let spec = TrussSpec::default();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut lows = 0usize;
        let mut highs = 0usize;
        for _ in 0..10_000 {
            let u: Vec<f64> = (0..3)
                .map(|_| rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12))
                .collect();
            let x = spec.input_model.transform_row(&u).unwrap();
            let w = truss_model(&x, &spec).unwrap();
            if w < 0.38 {
                lows += 1;
            } else if w > 1.73 {
                highs += 1;
            } else {
                panic!("sampled displacement {w} inside the gap");
            }
        }
        let frac = highs as f64 / (lows + highs) as f64;
        assert!(
            (0.05..=0.95).contains(&frac),
            "snap fraction {frac} not intermediate"
        );
    }

    #[test]
    fn displacement_density_has_two_modes() {
        let spec = TrussSpec::default();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut hist = [0usize; 60];
        let (lo, hi) = (0.0, 3.0);
        for _ in 0..10_000 {
            let u: Vec<f64> = (0..3)
                .map(|_| rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12))
                .collect();
            let x = spec.input_model.transform_row(&u).unwrap();
            let w = truss_model(&x, &spec).unwrap().clamp(lo, hi - 1e-12);
            hist[((w - lo) / (hi - lo) * 60.0) as usize] += 1;
        }
        // smooth lightly, then count strict local maxima above a floor
        let smooth: Vec<f64> = (0..60)
            .map(|i| {
                let a = if i > 0 { hist[i - 1] } else { 0 };
                let c = if i < 59 { hist[i + 1] } else { 0 };
                (a + 2 * hist[i] + c) as f64 / 4.0
            })
            .collect();
        let floor = 10_000.0 / 60.0 * 0.5;
        let mut modes = 0;
        for i in 1..59 {
            if smooth[i] > floor && smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1] {
                modes += 1;
            }
        }
        assert!(modes >= 2, "found {modes} modes in {hist:?}");
    }
}
