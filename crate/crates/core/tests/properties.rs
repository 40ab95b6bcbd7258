mod common;

use bellkit_core::kupczynski::{
    evaluate_model3, postselect, universal_construct, Party,
};
use bellkit_core::lhv::{certify_family, fit_coupling};
use bellkit_core::probcore::rational;
use bellkit_core::{
    chsh, compose, coupling_of, expectation_xy, factor, no_signalling, predict, Alphabet,
    CondFamily, ExactProb, Outcome, PairPmf, Rational, Setting,
};
use num_traits::Zero;
use proptest::prelude::*;

fn seeds() -> impl Strategy<Value = u64> {
    any::<u64>()
}

fn weight() -> impl Strategy<Value = (u64, u64)> {
    (0u64..=60).prop_flat_map(|n| (Just(n), n.max(1)..=60))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factor_inverts_compose(seed in seeds()) {
        let mut rng = common::rng(seed);
        let s = common::settings(&mut rng, true);
        let q = if seed % 2 == 0 { common::binary_family(&mut rng) } else { common::ternary_family(&mut rng) };
        let (s2, q2) = factor(&compose(&s, &q)).unwrap();
        prop_assert_eq!(s2, s);
        prop_assert_eq!(q2, q);
    }

    #[test]
    fn expectation_is_linear_in_mixtures(seed in seeds(), (n, d) in weight()) {
        let mut rng = common::rng(seed);
        let p = common::binary_pair(&mut rng);
        let r = common::binary_pair(&mut rng);
        let alpha = ExactProb::ratio(n, d);
        let mixed = p.mix(&alpha, &r).unwrap();
        let lhs = expectation_xy(&mixed);
        let rhs = alpha.value() * expectation_xy(&p)
            + alpha.complement().unwrap().value() * expectation_xy(&r);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn chsh_invariant_under_outcome_flips(seed in seeds(), flip in 0usize..16) {
        let mut rng = common::rng(seed);
        let q = common::binary_family(&mut rng);
        let f = |s: Setting, bit: usize| move |o: Outcome| if flip >> (bit + s.index()) & 1 == 1 { o.negate() } else { o };
        let flipped = CondFamily::from_fn(Alphabet::Binary, |a, b| q.get(a, b).relabel(f(a, 0), f(b, 2))).unwrap();
        prop_assert_eq!(chsh(&flipped).unwrap().s_max, chsh(&q).unwrap().s_max);
    }

    #[test]
    fn product_families_do_not_signal(seed in seeds()) {
        let mut rng = common::rng(seed);
        let marg = |rng: &mut common::TestRng| {
            let p = common::pmf(rng, 2, false);
            [ExactProb::new(p[0].clone()).unwrap(), ExactProb::zero(), ExactProb::new(p[1].clone()).unwrap()]
        };
        let fx = [marg(&mut rng), marg(&mut rng)];
        let gy = [marg(&mut rng), marg(&mut rng)];
        let q = CondFamily::from_fn(Alphabet::Binary, |a, b| {
            PairPmf::product(Alphabet::Binary, &fx[a.index()], &gy[b.index()]).unwrap()
        }).unwrap();
        prop_assert!(no_signalling(&q).unwrap().max_delta.is_zero());
    }

    #[test]
    fn coupling_correlations_are_affine(seed in seeds(), (n, d) in weight()) {
        let mut rng = common::rng(seed);
        let c1 = coupling_of(&common::lhv_model(&mut rng, 6));
        let c2 = coupling_of(&common::lhv_model(&mut rng, 6));
        let alpha = ExactProb::ratio(n, d);
        let mixed = c1.mix(&alpha, &c2).unwrap().conditional_family().correlations();
        let (e1, e2) = (c1.conditional_family().correlations(), c2.conditional_family().correlations());
        let beta = alpha.complement().unwrap();
        for (a, b) in Setting::pairs() {
            let (i, j) = (a.index(), b.index());
            prop_assert_eq!(&mixed[i][j], &(alpha.value() * &e1[i][j] + beta.value() * &e2[i][j]));
        }
    }

    #[test]
    fn lhv_predictions_do_not_signal(seed in seeds()) {
        let mut rng = common::rng(seed);
        let model = common::lhv_model(&mut rng, 8);
        let settings = common::settings(&mut rng, true);
        let (_, q) = factor(&predict(&model, &settings)).unwrap();
        prop_assert!(no_signalling(&q).unwrap().max_delta.is_zero());
        prop_assert!(chsh(&q).unwrap().s_max <= rational(2, 1));
    }

    #[test]
    fn universal_construction_reproduces_target(seed in seeds()) {
        let mut rng = common::rng(seed);
        let q = common::binary_family(&mut rng);
        let spec = universal_construct(&q).unwrap();
        prop_assert_eq!(evaluate_model3(&spec).unwrap(), q);
        prop_assert!(spec.instrument_spaces_disjoint());
        for (a, b) in Setting::pairs() {
            prop_assert!(spec.off_block_mass(a, b).is_zero());
            for (la, lb, _) in spec.instrument_support(a, b) {
                prop_assert_eq!((la.party, la.setting), (Party::Alice, a));
                prop_assert_eq!((lb.party, lb.setting), (Party::Bob, b));
            }
        }
    }

    #[test]
    fn postselection_is_identity_on_binary_laws(seed in seeds()) {
        let mut rng = common::rng(seed);
        let s = common::settings(&mut rng, true);
        let q = common::binary_family(&mut rng);
        let rep = postselect(&compose(&s, &q)).unwrap();
        prop_assert_eq!(rep.detection_rate, ExactProb::one());
        prop_assert_eq!(rep.conditional_family, q);
        prop_assert_eq!(rep.postselected_settings, s);
    }

    #[test]
    fn coupling_fit_agrees_with_fine(seed in seeds()) {
        let mut rng = common::rng(seed);
        // Half the cases are LHV-realizable, the rest random correlations.
        let q = if seed % 2 == 0 {
            coupling_of(&common::lhv_model(&mut rng, 4)).conditional_family()
        } else {
            let e: [[Rational; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| {
                let p = common::pmf(&mut rng, 2, false);
                &p[0] - &p[1]
            }));
            bellkit_core::families::with_correlations(e)
        };
        let fit = fit_coupling(&q).unwrap();
        prop_assert_eq!(fit.is_some(), common::fine_admits_coupling(&q));
        if let Some(c) = fit {
            prop_assert_eq!(c.conditional_family(), q.clone());
            prop_assert!(certify_family(&q).unwrap().is_some());
        }
    }
}

