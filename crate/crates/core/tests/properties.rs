use proptest::prelude::*;

use qcorr::correlations::certify_collapse;
use qcorr::divergence::{div, DivergenceKind};
use qcorr::entropies::{cond_entropy, Cut};
use qcorr::linalg::{self, frob};
use qcorr::premeasurement::{build_isometry, premeasure, random_basis_pvm, Pvm};
use qcorr::states::{is_mq, random_pure, random_state, random_unitary, rng_from_seed, CLASS_TOL};
use qcorr::uncertainty::{check_eur, play_game, EurRelation, GameInput};

const SLACK: f64 = -1e-9;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn divergence_orders_across_kinds(seed in any::<u64>(), d in 2usize..5, rank in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let rho = random_state(&[d], rank.min(d), &mut rng).mat;
        let sigma = random_state(&[d], d, &mut rng).mat;
        let v = |k| div(k, &rho, &sigma).unwrap().to_f64();
        let (fid, half, vn, two, max) =
            (v(DivergenceKind::Dfid), v(DivergenceKind::Renyi(0.5)), v(DivergenceKind::VonNeumann), v(DivergenceKind::Renyi(2.0)), v(DivergenceKind::Dmax));
        prop_assert!(fid >= SLACK);
        prop_assert!(half - fid >= SLACK);
        prop_assert!(vn - half >= SLACK);
        prop_assert!(two - vn >= SLACK);
        prop_assert!(max - vn >= SLACK);
    }

    #[test]
    fn divergence_vanishes_on_equal_arguments(seed in any::<u64>(), d in 2usize..5) {
        let rho = random_state(&[d], d, &mut rng_from_seed(seed)).mat;
        for k in [DivergenceKind::VonNeumann, DivergenceKind::Renyi(0.5), DivergenceKind::Renyi(2.0), DivergenceKind::Dmax, DivergenceKind::Dfid] {
            prop_assert!(div(k, &rho, &rho).unwrap().to_f64().abs() < 1e-8, "{}", k.label());
        }
    }

    #[test]
    fn conditional_entropies_are_ordered_and_bounded(seed in any::<u64>(), da in 2usize..4, db in 1usize..4, rank in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let rho = random_state(&[da, db], rank.min(da * db), &mut rng);
        let h = |k| cond_entropy(k, &rho, Cut::OnSecond).unwrap().value;
        let (hmin, hvn, hmax) = (h(DivergenceKind::Dmax), h(DivergenceKind::VonNeumann), h(DivergenceKind::Dfid));
        let log_da = (da as f64).log2();
        prop_assert!(hmin + log_da >= -1e-6);
        prop_assert!(hvn - hmin >= -1e-6);
        prop_assert!(hmax - hvn >= -1e-6);
        prop_assert!(log_da - hmax >= -1e-6);
    }

    #[test]
    fn premeasured_states_are_mq_and_collapse(seed in any::<u64>(), ds in 2usize..4) {
        let mut rng = rng_from_seed(seed);
        let x = random_basis_pvm(ds, &mut rng);
        let w = random_unitary(ds, &mut rng);
        let rho_s = random_state(&[ds], 1 + (seed as usize) % ds, &mut rng);
        let st = premeasure(&rho_s, &build_isometry(&w, &x).unwrap()).unwrap().state;
        prop_assert!(is_mq(&st, CLASS_TOL).unwrap().member);
        let c = certify_collapse(&st, DivergenceKind::VonNeumann, 1e-6).unwrap();
        prop_assert!(c.collapsed && c.gap.abs() <= 1e-6);
    }

    #[test]
    fn eur_verdict_matches_slack(seed in any::<u64>(), rank in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let rho = random_state(&[2, 2], rank, &mut rng);
        let w = Pvm::computational(2).elements;
        let z = Pvm::from_basis(&qcorr::premeasurement::fourier_basis(&linalg::identity(2))).unwrap().elements;
        let c = check_eur(EurRelation::Berta, &rho, &[w, z], 0.0).unwrap();
        prop_assert_eq!(c.pass, c.slack >= -c.tolerance);
        prop_assert!(c.slack >= SLACK);
        prop_assert!((c.lhs - c.rhs - c.slack).abs() < 1e-12);
    }

    #[test]
    fn game_total_ignores_outcome_labels_and_phase(seed in any::<u64>(), theta in 0.0f64..6.28) {
        let mut rng = rng_from_seed(seed);
        let psi = random_pure(&[2], &mut rng);
        let strategy: Vec<Pvm> = (0..3).map(|_| random_basis_pvm(2, &mut rng)).collect();
        let base = play_game(&GameInput::Pure(psi.density()), &strategy, 2).unwrap().total_yield;

        let relabeled: Vec<Pvm> = strategy.iter().map(|p| Pvm::new(p.elements.iter().rev().cloned().collect()).unwrap()).collect();
        let phased = psi.density().conjugate_by(&(linalg::identity(2) * linalg::c(theta.cos(), theta.sin())), &[2]);
        prop_assert!(frob(&(&phased.mat - &psi.density().mat)) < 1e-12);
        let other = play_game(&GameInput::Pure(phased), &relabeled, 2).unwrap().total_yield;
        prop_assert!((base - other).abs() < 1e-10);
    }
}
