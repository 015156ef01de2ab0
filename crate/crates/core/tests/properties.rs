use proptest::prelude::*;
use sparseplq_core::data::{make_instance, read_instance, write_instance, Covariance, NoiseDist, Signal};
use sparseplq_core::linalg::{dist_sq, norm_sq};
use sparseplq_core::penalty::{
    moreau_l1, prox_l1_scaled, prox_weighted_l1_ridge, surrogate_penalty, theta_objective, w_rho, zero_norm_objective,
};
use sparseplq_core::problem::{l1_loss, spectral_norm_sq};
use sparseplq_core::{DenseMatrix, PenaltyParams, ProblemInstance, SyntheticSpec};

fn params() -> impl Strategy<Value = PenaltyParams> {
    (2.1f64..10.0, 0.01f64..2.0, 1.0f64..20.0).prop_map(|(a, l, r)| PenaltyParams::new(a, l, r).unwrap())
}

fn small_instance() -> impl Strategy<Value = (ProblemInstance, Vec<f64>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * p),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-2.0f64..2.0, p),
            0.0f64..0.5,
        )
            .prop_map(move |(a, b, x, mu)| {
                let m = DenseMatrix::from_row_major(n, p, &a).unwrap();
                (ProblemInstance::new(m, b, mu).unwrap(), x)
            })
    })
}

proptest! {
    #[test]
    fn penalty_between_zero_and_nu(t in -50.0f64..50.0, pr in params()) {
        let v = surrogate_penalty(t, &pr);
        prop_assert!(v >= -1e-15 && v <= pr.nu() * (1.0 + 1e-12));
    }

    #[test]
    fn weights_in_unit_interval(x in prop::collection::vec(-5.0f64..5.0, 1..20), pr in params()) {
        prop_assert!(w_rho(&x, &pr).iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn surrogate_below_zero_norm_objective((inst, x) in small_instance(), pr in params()) {
        let theta = theta_objective(&x, &inst, &pr).unwrap();
        let zn = zero_norm_objective(&x, &inst, pr.nu()).unwrap();
        prop_assert!(theta <= zn + 1e-12 * (1.0 + zn.abs()));
    }

    #[test]
    fn spectral_bound_holds((inst, x) in small_instance()) {
        let ax = inst.a().matvec(&x);
        prop_assert!(norm_sq(&ax) <= spectral_norm_sq(inst.a()) * norm_sq(&x) + 1e-12);
    }

    #[test]
    fn moreau_sandwich(z in prop::collection::vec(-5.0f64..5.0, 1..10), eps in 0.01f64..3.0) {
        let n = z.len();
        let f = l1_loss(&z);
        let e = moreau_l1(&z, eps, n);
        prop_assert!(e <= f + 1e-14);
        prop_assert!(e >= f - eps / (2.0 * n as f64) - 1e-14);
    }

    #[test]
    fn proxes_are_nonexpansive(
        u in prop::collection::vec(-5.0f64..5.0, 1..10),
        shift in prop::collection::vec(-1.0f64..1.0, 10),
        gamma in 0.05f64..5.0,
        mu in 0.0f64..2.0,
    ) {
        let v: Vec<f64> = u.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let omega = vec![0.3; u.len()];
        let pu = prox_weighted_l1_ridge(&u, &omega, mu, gamma);
        let pv = prox_weighted_l1_ridge(&v, &omega, mu, gamma);
        prop_assert!(dist_sq(&pu, &pv) <= dist_sq(&u, &v) * (1.0 + 1e-12));
        let qu = prox_l1_scaled(&u, u.len(), gamma);
        let qv = prox_l1_scaled(&v, u.len(), gamma);
        prop_assert!(dist_sq(&qu, &qv) <= dist_sq(&u, &v) * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn instances_round_trip_and_match_model(
        n in 5usize..30,
        p in 16usize..40,
        frac in 0.0f64..0.6,
        seed in any::<u64>(),
        cs in any::<bool>(),
    ) {
        let spec = SyntheticSpec {
            n,
            p,
            cov: if cs { Covariance::Cs(0.6) } else { Covariance::Ar(0.5) },
            signal: Signal::Fixed16,
            noise: NoiseDist::Laplace,
            corrupt_count: (frac * n as f64) as usize,
            seed,
            noise_cap: None,
        };
        let si = make_instance(&spec).unwrap();
        let ax = si.instance.a().matvec(&si.x_true);
        for (i, (bi, axi)) in si.instance.b().iter().zip(&ax).enumerate() {
            prop_assert_eq!(*bi, axi + si.noise[i]);
            prop_assert_eq!(si.noise[i] != 0.0, si.corrupt_set.contains(&i));
        }
        let mut buf = Vec::new();
        write_instance(&si, &mut buf).unwrap();
        let back = read_instance(buf.as_slice()).unwrap();
        let mut again = Vec::new();
        write_instance(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }
}
