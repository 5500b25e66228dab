//! Cross-module behavior on the benchmark problems that the acceptance
//! gate does not already cover.

use ccgp::bench::{truss_critical_load, BenchProblem, ManhattanSpec, TrussSpec};
use ccgp::data::Standardizer;
use ccgp::dpmm::{self, DpmmConfig};
use ccgp::pipeline::{self, PipelineConfig, Recombination};

/// Nested quasi-random designs share their prefix, so growing the design
/// can only refine the partition: the cluster count must not shrink for
/// most seeds (the paper observes it growing with the data).
#[test]
fn cluster_count_grows_with_nested_designs() {
    let problem = BenchProblem::Manhattan(ManhattanSpec::default());
    let mut non_decreasing = 0usize;
    let mut pairs = Vec::new();
    for seed in 0..20u64 {
        let small = problem.sample_design(100, 3000 + seed).unwrap();
        let medium = problem.sample_design(200, 3000 + seed).unwrap();
        // prefix property of the underlying sequence
        for i in 0..100 {
            assert_eq!(small.inputs().row(i), medium.inputs().row(i));
        }
        let k_of = |design: &ccgp::data::ExperimentalDesign| {
            let st = Standardizer::fit(design).unwrap();
            let joint = st.joint_to_standard(&design.joint());
            let (_, result) = dpmm::fit(&joint, &DpmmConfig::defaults(3), seed).unwrap();
            result.n_clusters
        };
        let k_small = k_of(&small);
        let k_medium = k_of(&medium);
        pairs.push((k_small, k_medium));
        if k_medium >= k_small {
            non_decreasing += 1;
        }
    }
    assert!(
        non_decreasing >= 15,
        "cluster count grew in only {non_decreasing}/20 seeds: {pairs:?}"
    );
}

/// Deep inside either regime of the snap-through problem the coupled class
/// probability is essentially certain.
#[test]
fn deep_regime_membership_is_confident() {
    let spec = TrussSpec::default();
    let problem = BenchProblem::Truss(spec.clone());
    let design = problem.sample_design(200, 808).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.recombination = Recombination::Hard;
    let fitted = pipeline::fit_pipeline(&design, &cfg, 808).unwrap();
    assert_eq!(fitted.n_clusters(), 2);

    // probe points far from the critical surface on both sides: load at
    // 60% and 160% of the critical load for mean stiffness
    let p_cr_mean = truss_critical_load(210.0e9, 10.0e-4, spec.alpha0) / spec.load_unit_scale;
    let mut checked = 0;
    for (factor, snapped) in [(0.6, false), (1.6, true)] {
        let x = [p_cr_mean * factor, 210.0, 10.0];
        let pred = fitted.predict_hard(&x).unwrap();
        let p_max = pred
            .class_probs
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            p_max > 0.99,
            "membership only {p_max:.4} at {factor} x critical load"
        );
        // the predicted branch must be the true one this deep inside
        let w = pred.mean;
        assert_eq!(w > 1.0, snapped, "wrong branch at factor {factor}");
        checked += 1;
    }
    assert_eq!(checked, 2);
}
