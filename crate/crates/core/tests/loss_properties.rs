use proptest::prelude::*;
use resmin::ansatz::{AnsatzMode, AnsatzSpec};
use resmin::geometry::Domain;
use resmin::losses::{
    interior_loss, penalty_loss, sobolev_loss, LossConfig, LossVariant, NetworkObjective,
};
use resmin::network::NetworkParams;
use resmin::problems::ProblemId;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn losses_are_ordered_and_nonnegative(seed in 0u64..10_000) {
        let p = ProblemId::P1.problem();
        let params = NetworkParams::xavier(&[2, 6, 1], seed).unwrap();
        let spec = AnsatzSpec::new(params, p.domain.clone(), p.lift.clone(), AnsatzMode::ExactBc).unwrap();
        let cfg = LossConfig::new(LossVariant::Penalty, &p.domain, 8, Some(3.0)).unwrap();
        let interior = interior_loss(&spec, &p, &cfg).unwrap();
        prop_assert!(interior >= 0.0);
        prop_assert!(sobolev_loss(&spec, &p, &cfg).unwrap() >= interior);
        let pen = penalty_loss(&spec, &p, &cfg).unwrap();
        prop_assert!((pen - interior).abs() <= 1e-14 * interior);
    }

    #[test]
    fn network_objective_matches_generic_evaluation(seed in 0u64..10_000) {
        let p = ProblemId::P2.problem();
        let params = NetworkParams::xavier(&[2, 5, 1], seed).unwrap();
        let spec = AnsatzSpec::new(params, p.domain.clone(), p.lift.clone(), AnsatzMode::ExactBc).unwrap();
        let cfg = LossConfig::new(LossVariant::Interior, &p.domain, 6, None).unwrap();
        let obj = NetworkObjective::new(&spec, &p, &cfg).unwrap();
        let fast = obj.value(spec.params.as_flat()).unwrap();
        let slow = interior_loss(&spec, &p, &cfg).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12 * slow);
    }
}

#[test]
fn variant_problem_mismatches_are_rejected() {
    let heat = ProblemId::P4.problem();
    let elliptic = ProblemId::P1.problem();
    let cfg = LossConfig::new(LossVariant::Interior, &Domain::unit_square(), 4, None).unwrap();
    let params = NetworkParams::zeros(&[2, 3, 1]).unwrap();
    let spec = AnsatzSpec::new(
        params,
        Domain::unit_square(),
        elliptic.lift.clone(),
        AnsatzMode::ExactBc,
    )
    .unwrap();
    assert!(interior_loss(&spec, &heat, &cfg).is_err());
    let unconstrained = AnsatzSpec {
        mode: AnsatzMode::Unconstrained,
        ..spec
    };
    assert!(interior_loss(&unconstrained, &elliptic, &cfg).is_err());
    assert!(penalty_loss(&unconstrained, &elliptic, &cfg).is_err());
}
