mod common;

use std::sync::Arc;

use laserbound_core::distribution::{entropy_of, marginal_values, psi_weights, symmetrize, Distribution};
use laserbound_core::format::Real;
use laserbound_core::omega::{margin_linear, BoundCertificate, CertComponent, CertGlobal, SCHEMA};
use laserbound_core::solvers::{certify, gamma_bound, solve_opt2, BarrierNewton, MirrorDescent, Opt1Strategy, OrbitModel, SolverConfig};
use laserbound_core::support::{induced_group, make_support, CoordinateGroup, SymmetryGroup, Triple};
use proptest::prelude::*;

use common::instance;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gamma_is_nonnegative_and_dual_bound_dominates_entropy(seed in any::<u64>()) {
        let inst = instance(seed, 2, 10);
        let g = gamma_bound(&inst.support, &inst.weights, &SolverConfig::default());
        prop_assert!(g.gamma >= 0.0);
        // max entropy over compatible distributions is at least H(P) itself
        prop_assert!(g.max_entropy.entropy_bound >= entropy_of(&inst.weights) - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn opt2_reproduces_feasible_marginals(seed in any::<u64>()) {
        let inst = instance(seed, 2, 12);
        let targets = [0, 1, 2].map(|axis| marginal_values(&inst.support, &inst.weights, axis));
        let sol = solve_opt2(&inst.support, &targets, &SolverConfig::default()).unwrap();
        for axis in 0..3 {
            let got = marginal_values(&inst.support, &sol.weights, axis);
            for (a, b) in got.iter().zip(&targets[axis]) {
                prop_assert!((a - b).abs() <= 1e-12, "axis {axis}: {a} vs {b}");
            }
        }
        prop_assert!(entropy_of(&sol.weights) >= entropy_of(&inst.weights) - 1e-10);
    }

    #[test]
    fn opt1_reaches_kkt_stationarity(seed in any::<u64>()) {
        let inst = instance(seed, 2, 12);
        let group = SymmetryGroup::trivial(&inst.support);
        let model = OrbitModel::new(inst.support.clone(), &group, &inst.logvals).unwrap();
        let sol = BarrierNewton.solve(&model, &model.uniform(), &SolverConfig::default()).unwrap();
        prop_assert!(sol.kkt_residual <= 1e-10, "residual {}", sol.kkt_residual);
        prop_assert!(model.kkt_residual(&model.expand(&sol.orbit_masses)) <= 1e-10);
    }

    #[test]
    fn strategies_agree_on_the_optimum(seed in any::<u64>()) {
        let inst = instance(seed, 2, 6);
        let group = SymmetryGroup::trivial(&inst.support);
        let model = OrbitModel::new(inst.support.clone(), &group, &inst.logvals).unwrap();
        let cfg = SolverConfig { max_iters: 20000, grad_tol: 1e-9, ..SolverConfig::default() };
        let a = BarrierNewton.solve(&model, &model.uniform(), &SolverConfig::default()).unwrap();
        let b = MirrorDescent.solve(&model, &model.uniform(), &cfg);
        let pb = match b {
            Ok(s) => s.orbit_masses,
            Err(laserbound_core::Error::Opt1NoConvergence { best, .. }) => model.compress(&best),
            Err(e) => panic!("{e}"),
        };
        prop_assert!(model.psi(&a.orbit_masses) >= model.psi(&pb) - 1e-9);
        prop_assert!(model.psi(&a.orbit_masses) - model.psi(&pb) <= 1e-5);
    }

    #[test]
    fn psi_is_concave(seed in any::<u64>(), other in any::<u64>(), lambda in 0.0f64..1.0) {
        let inst = instance(seed, 2, 10);
        let mut rng_inst = instance(other, 2, 10);
        // reuse the first support with the second instance's random masses
        rng_inst.weights.resize(inst.support.len(), 0.5);
        let total: f64 = rng_inst.weights.iter().sum();
        let q: Vec<f64> = rng_inst.weights.iter().map(|w| w / total).collect();
        let mix: Vec<f64> = inst.weights.iter().zip(&q).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let f = |w: &[f64]| psi_weights(&inst.support, w, &inst.logvals).unwrap();
        prop_assert!(f(&mix) >= lambda * f(&inst.weights) + (1.0 - lambda) * f(&q) - 1e-12);
    }

    #[test]
    fn certified_bound_never_exceeds_psi(seed in any::<u64>()) {
        let inst = instance(seed, 2, 10);
        let p = Distribution::new(inst.support.clone(), inst.weights.clone()).unwrap();
        let out = certify(&inst.support, &p, &inst.logvals, &SolverConfig::default()).unwrap();
        let psi = psi_weights(&inst.support, &inst.weights, &inst.logvals).unwrap();
        prop_assert!(out.log_bound <= psi + 1e-15);
        prop_assert!((out.log_bound - (psi - out.gamma_value)).abs() <= 1e-12);
    }

    #[test]
    fn psi_is_invariant_under_coordinate_symmetry(seed in any::<u64>()) {
        let inst = instance(seed, 2, 10);
        // close the support under S3 and give orbit-constant log values
        let full = CoordinateGroup::full();
        let mut triples: Vec<Triple> = Vec::new();
        for t in inst.support.triples() {
            triples.extend(full.orbit_of(t));
        }
        let support = Arc::new(make_support(triples).unwrap());
        let logvals: Vec<f64> = support.triples().iter().map(|t| {
            let r = full.representative(t);
            (r.0[0] * 7 + r.0[1] * 3 + r.0[2]) as f64 * 0.1
        }).collect();
        let n = support.len();
        let weights: Vec<f64> = (0..n).map(|i| 1.0 + ((seed >> (i % 60)) & 7) as f64).collect();
        let total: f64 = weights.iter().sum();
        let p = Distribution::new(support.clone(), weights.iter().map(|w| w / total).collect()).unwrap();
        let group = induced_group(&support, &full).unwrap();
        let base = psi_weights(&support, p.weights(), &logvals).unwrap();
        for perm in full.perms() {
            let permuted: Vec<f64> = support.triples().iter().map(|t| {
                let inv = [0, 1, 2].map(|k| perm.iter().position(|&x| x == k).unwrap());
                p.weight_of(&t.permute(inv)).unwrap()
            }).collect();
            let v = psi_weights(&support, &permuted, &logvals).unwrap();
            prop_assert!((v - base).abs() <= 1e-12);
        }
        // symmetrizing can only help a concave invariant objective
        let sym = symmetrize(&p, &group);
        prop_assert!(psi_weights(&support, sym.weights(), &logvals).unwrap() >= base - 1e-12);
    }

    #[test]
    fn margin_sign_matches_log_difference(log_bound in 0.0f64..80.0, threshold in 0.0f64..80.0) {
        let m = margin_linear(log_bound, threshold);
        prop_assert_eq!(m > 0.0, log_bound > threshold);
        prop_assert_eq!(m < 0.0, log_bound < threshold);
    }

    #[test]
    fn certificate_json_round_trips_bit_exactly(values in proptest::collection::vec(any::<f64>(), 1..20), rho in 2.0f64..3.0) {
        let support: Vec<Triple> = (0..values.len() as i64).map(|i| Triple::new(i, 0, 0)).collect();
        let cert = BoundCertificate {
            schema: SCHEMA,
            construction: "cw".into(),
            q: 5,
            power: 2,
            rho: Real(rho),
            components: vec![CertComponent {
                level: 1,
                abc: Triple::new(2, 1, 1),
                support,
                distribution: values.iter().copied().map(Real).collect(),
                log_value: Real(values[0]),
            }],
            global: CertGlobal { distribution: values.iter().copied().map(Real).collect(), log_value: Real(rho) },
            threshold_log: Real(values[values.len() - 1]),
            omega_claim: Some(Real(rho)),
            margin: Real(1e-9),
            config: SolverConfig::default(),
            seed: 7,
            metadata: Default::default(),
        };
        let text = cert.to_json().unwrap();
        let back = BoundCertificate::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), text);
        for (a, b) in back.global.distribution.iter().zip(&values) {
            prop_assert!(a.0.to_bits() == b.to_bits() || (a.0.is_nan() && b.is_nan()));
        }
    }
}
