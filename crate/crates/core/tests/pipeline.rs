//! Cross-module checks: constructions fed into the mesh, selection and
//! spectral machinery, compared against plain enumeration.

use proptest::prelude::*;
use sidonlab::construction::{embed_theorem1, n_nu, quarter_klog2k_ceil, theorem1_witness};
use sidonlab::growth::GrowthFunction;
use sidonlab::mesh::{mesh_count, CoefficientDomain, DigitIndex, Mesh};
use sidonlab::qi::verify_qi_exhaustive;
use sidonlab::selection::{lemma_search, sample_lambda, sample_sub_lambda, verify_certificate, FreenessRatio, SelectionConfig};
use sidonlab::spectral::{analyticity_witness, default_rho, sample_flat_lambda};
use sidonlab::theorem2::{build_theorem2_prefix, sample_theorem2_meshes, theorem2_mesh_checks};
use sidonlab::LatticePoint;

const CAP: u64 = 1 << 20;

#[test]
fn theorem1_witness_matches_enumeration() {
    let c = embed_theorem1(2).unwrap();
    for k in 2..8u64 {
        let w = theorem1_witness(k, &c).unwrap();
        assert_eq!(w.count as u64, n_nu(w.nu));
        assert!(w.count as u64 >= quarter_klog2k_ceil(k));
        assert_eq!(mesh_count(&c.lambda, &w.mesh, CAP).unwrap(), w.count);
    }
}

#[test]
fn theorem1_set_is_quasi_independent_for_small_levels() {
    let c = embed_theorem1(2).unwrap();
    assert!(verify_qi_exhaustive(&c.lambda).unwrap().qi);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn digit_index_agrees_with_enumeration(
        picks in prop::collection::vec(1usize..12, 1..4),
        h in 1u32..3,
    ) {
        let c = embed_theorem1(2).unwrap();
        let index = DigitIndex::new(c.basis.system(), &c.lambda);
        let basis: Vec<LatticePoint> = picks
            .iter()
            .map(|&j| LatticePoint::scalar(c.basis.beta(j.min(c.basis.len())).clone()))
            .collect();
        let mesh = Mesh::new(basis, CoefficientDomain::Box { h }).unwrap();
        if let Some(fast) = index.count(&mesh) {
            prop_assert_eq!(fast, mesh_count(&c.lambda, &mesh, CAP).unwrap());
        }
    }
}

#[test]
fn sub_selection_stays_inside_selection() {
    let cfg = SelectionConfig::new(3, 8, 4, 11, 20).unwrap();
    for trial in 0..5 {
        let lambda = sample_lambda(&cfg, trial).unwrap();
        let sub = sample_sub_lambda(&lambda, &cfg, trial);
        assert!(sub.iter().all(|x| lambda.contains(x)));
    }
}

#[test]
fn lemma_certificate_round_trips() {
    let cfg = SelectionConfig::new(2, 16, 4, 5, 1).unwrap();
    let cert = lemma_search(&cfg, FreenessRatio::Exact, 50).unwrap();
    assert!(verify_certificate(&cert).unwrap());
}

#[test]
fn theorem2_prefix_meets_mesh_condition() {
    let w: GrowthFunction = "double-log:1".parse().unwrap();
    let c = build_theorem2_prefix(3, &w, 3, 9, 24).unwrap();
    let meshes = sample_theorem2_meshes(&c, 9, 60, 4, 2).unwrap();
    for check in theorem2_mesh_checks(&c, &meshes).unwrap() {
        assert!(check.report.pass);
        assert!(check.rank_additive);
        assert!(check.rank_bound_holds);
    }
}

#[test]
fn flat_sample_feeds_the_witness() {
    let ell = 401;
    let sample = sample_flat_lambda(16, ell, 3, 20).unwrap();
    assert_eq!(sample.sigma_one, sample.lambda.len() as f64);
    let rho = default_rho(ell).min(15);
    let w = analyticity_witness(16, ell, &sample.lambda, rho, None).unwrap();
    assert!(w.lower_bound > 0.0);
    assert_eq!(w.pass, w.lower_bound >= w.target);
}
