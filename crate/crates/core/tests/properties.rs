mod common;

use common::*;
use cubecover::anticonc::{
    atom_probability, concentration_window_prob, max_atom_probability, scale_partition,
    subset_sum_counts, validate_scales, ProbMode,
};
use cubecover::construct::lr_cover;
use cubecover::cube::{enumerate_uncovered, evaluate_row, sample_uncovered};
use cubecover::decompose::{
    check_decomposition1, check_decomposition2, first_decomposition, second_decomposition,
};
use cubecover::params::Params;
use cubecover::plank::{bang_inequality_holds, bang_objective, bang_signs, find_uncovered_small_norm};
use cubecover::refute::{attempt_refutation, Status};
use cubecover::scalar::{clear_denominators, int, ratio, Scalar};
use cubecover::system::{
    apply_rescaling, row_squared_norms, CoveringSystem, RowScaling, UnitRow, Vertex,
};
use cubecover::verify::verify_essential;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scalar() -> impl Strategy<Value = Scalar> {
    (-40i64..=40, 1i64..=12).prop_map(|(p, q)| ratio(p, q))
}

fn nonzero_scalar() -> impl Strategy<Value = Scalar> {
    scalar().prop_filter("nonzero", |x| !x.is_zero())
}

fn positive_scalar() -> impl Strategy<Value = Scalar> {
    (1i64..=30, 1i64..=12).prop_map(|(p, q)| ratio(p, q))
}

/// Small random system with right-hand sides hit by random vertices.
fn system(max_n: usize, max_k: usize) -> impl Strategy<Value = CoveringSystem> {
    (1..=max_n, 1..=max_k, any::<u64>()).prop_map(|(n, k, seed)| {
        random_system(&mut ChaCha8Rng::seed_from_u64(seed), k, n)
    })
}

fn nonzero_int_vector(max_dim: usize) -> impl Strategy<Value = Vec<Scalar>> {
    prop::collection::vec(-4i64..=4, 1..=max_dim)
        .prop_filter("nonzero", |v| v.iter().any(|&x| x != 0))
        .prop_map(|v| v.into_iter().map(int).collect())
}

fn params() -> Params {
    Params::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_arithmetic_is_exact(a in scalar(), b in nonzero_scalar()) {
        prop_assert_eq!(&(&a + &b) - &b, a.clone());
        prop_assert_eq!(&(&a * &b) / &b, a);
    }

    #[test]
    fn rescaling_preserves_membership_and_scales_norms(
        s in system(8, 4),
        factors in prop::collection::vec(positive_scalar(), 4),
        mask in any::<u64>(),
    ) {
        let phi = RowScaling::from_factors(factors[..s.k()].to_vec());
        let t = apply_rescaling(&s, &phi).unwrap();
        let x = Vertex::from_mask(mask & ((1 << s.n()) - 1), s.n());
        for i in 0..s.k() {
            prop_assert_eq!(evaluate_row(&s, i, &x).unwrap(), evaluate_row(&t, i, &x).unwrap());
        }
        for (i, (q, q2)) in row_squared_norms(&s).iter().zip(row_squared_norms(&t)).enumerate() {
            prop_assert_eq!(&factors[i] * &factors[i] * q, q2);
        }
    }

    #[test]
    fn essential_verdicts_survive_rescaling(
        s in system(7, 5),
        factors in prop::collection::vec(positive_scalar(), 5),
    ) {
        let t = apply_rescaling(&s, &RowScaling::from_factors(factors[..s.k()].to_vec())).unwrap();
        let (a, b) = (verify_essential(&s, &params()).unwrap(), verify_essential(&t, &params()).unwrap());
        prop_assert_eq!((a.e1, a.e2, a.e3, a.is_essential), (b.e1, b.e2, b.e3, b.is_essential));
        if a.is_essential {
            prop_assert!(a.support_bound_ok);
        }
        if let Some(w) = &a.uncovered_witness {
            prop_assert!(!covered(&s, w.bits()));
        }
        for (i, w) in a.exclusive_witnesses.iter().enumerate() {
            if let Some(w) = w {
                for j in 0..s.k() {
                    prop_assert_eq!(evaluate_row(&s, j, w).unwrap(), i == j);
                }
            }
        }
    }

    #[test]
    fn enumeration_matches_reference(s in system(10, 6)) {
        let r = enumerate_uncovered(&s, &params()).unwrap();
        let (count, first) = naive_uncovered(&s);
        prop_assert_eq!(r.uncovered_count, count);
        prop_assert_eq!(r.witness.map(|w| w.bits().to_vec()), first);
    }

    #[test]
    fn sampling_is_sound_and_deterministic(s in system(30, 4), trials in 1u64..200, seed in any::<u64>()) {
        let a = sample_uncovered(&s, trials, seed).unwrap();
        prop_assert_eq!(&a, &sample_uncovered(&s, trials, seed).unwrap());
        if let Some(w) = &a.witness {
            for i in 0..s.k() {
                prop_assert!(!evaluate_row(&s, i, w).unwrap());
            }
        }
    }

    #[test]
    fn atoms_respect_littlewood_offord(v in nonzero_int_vector(12)) {
        let supp = v.iter().filter(|x| !x.is_zero()).count() as i64;
        let dist = naive_distribution(&v);
        let total = Scalar::from_integer((1u64 << v.len()).into());
        for (a, count) in &dist {
            let p = atom_probability(&v, a, ProbMode::Exact, &params()).unwrap().value;
            prop_assert_eq!(&p, &(int(*count as i64) / &total));
            prop_assert!(&p * &p * int(supp) <= Scalar::one());
        }
        let (p, _) = max_atom_probability(&v, &params()).unwrap();
        prop_assert_eq!(p, int(*dist.values().max().unwrap() as i64) / &total);
        let ints = clear_denominators(&v);
        prop_assert_eq!(subset_sum_counts(&ints).values().sum::<u64>(), 1u64 << v.len());
    }

    #[test]
    fn window_probability_reaches_one_over_c0(row in prop::collection::vec(scalar(), 1..=10)) {
        prop_assume!(row.iter().any(|x| !x.is_zero()));
        let unit = UnitRow::normalize(row).unwrap();
        let w = concentration_window_prob(&unit, &params().c0, ProbMode::Exact, &params()).unwrap();
        prop_assert!(w.ok);
    }

    #[test]
    fn scale_partitions_validate(v in prop::collection::vec(scalar(), 1..=12), target in 1usize..4) {
        prop_assume!(v.iter().any(|x| !x.is_zero()));
        let c1 = params().c1();
        let sp = scale_partition(&v, &c1, None).unwrap();
        prop_assert!(validate_scales(&v, &sp).unwrap());
        if let Ok(sp) = scale_partition(&v, &c1, Some(target)) {
            prop_assert_eq!(sp.s(), target);
            prop_assert!(validate_scales(&v, &sp).unwrap());
        }
    }

    #[test]
    fn bang_output_is_flip_optimal(
        k in 1usize..=6,
        entries in prop::collection::vec(-2.0f64..2.0, 36),
        zeta in prop::collection::vec(-3.0f64..3.0, 6),
        theta in prop::collection::vec(0.0f64..2.0, 6),
        seed in any::<u64>(),
    ) {
        let mut m = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let x = entries[i * 6 + j];
                m[i][j] = if i == j { x.abs() } else { x };
                m[j][i] = m[i][j];
            }
        }
        let (zeta, theta) = (&zeta[..k], &theta[..k]);
        let r = bang_signs(&m, zeta, theta, seed, &params()).unwrap();
        let m_max = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        prop_assert!(bang_inequality_holds(&m, zeta, theta, &r.signs.signs, 1e-9 * (1.0 + m_max)));
        let best = bang_objective(&m, zeta, theta, &r.signs.signs);
        let scale = 1.0 + m_max * theta.iter().sum::<f64>().powi(2) + zeta.iter().map(|z| z.abs()).sum::<f64>() * 4.0;
        for t in 0..k {
            let mut e = r.signs.signs.clone();
            e[t] = -e[t];
            prop_assert!(bang_objective(&m, zeta, theta, &e) <= best + 1e-9 * scale);
        }
    }

    #[test]
    fn finder_vertices_are_uncovered(seed in any::<u64>(), block in 8usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = disjoint_sign_blocks(&mut rng, 4, block);
        let rows: Vec<UnitRow> = s.rows().iter().map(|r| UnitRow::normalize(r.clone()).unwrap()).collect();
        let out = find_uncovered_small_norm(&rows, s.mu(), &params().with_seed(seed)).unwrap();
        prop_assert!(!covered(&s, out.vertex.bits()));
        // |y'_j| = |theta (V^T eps)_j| stays inside [-1, 1].
        for j in 0..s.n() {
            let yp: f64 = rows.iter().zip(&out.signs.signs).map(|(r, &e)| r.to_f64()[j] * f64::from(e)).sum::<f64>() * out.theta;
            prop_assert!(yp.abs() <= 1.0 + 1e-9);
            prop_assert!((out.y[j] - (yp + 1.0) / 2.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn first_decomposition_invariants(
        k in 1usize..=8,
        n in 1usize..=24,
        s in 1usize..=3,
        w in prop::sample::select(vec![ratio(1, 10_000), ratio(1, 50), ratio(1, 3), int(1), int(5)]),
        seed in any::<u64>(),
        density in 0.1f64..0.9,
    ) {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, k, n, density);
        let d = first_decomposition(&m, s, &w, &p).unwrap();
        prop_assert!(check_decomposition1(&m, &d, &p).unwrap());
        prop_assert!(d.removal_order.len() <= n);
        prop_assert!(int(d.m2.len() as i64) * p.tau() / &w <= int((k * s) as i64));
        for i in &d.l2 {
            prop_assert_eq!(d.scale_partitions[i].s(), s);
        }
        for f in &d.rescaling.factors {
            prop_assert!(*f > Scalar::zero());
        }
    }

    #[test]
    fn second_decomposition_invariants(
        k in 1usize..=8,
        n in 1usize..=32,
        s in 1usize..=3,
        w in prop::sample::select(vec![ratio(1, 10_000), ratio(1, 50), ratio(1, 3), int(1)]),
        seed in any::<u64>(),
        density in 0.05f64..0.9,
    ) {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = CoveringSystem::new(n, random_matrix(&mut rng, k, n, density), vec![int(0); k]).unwrap();
        let d = second_decomposition(&sys, s, &w, &p).unwrap();
        prop_assert!(check_decomposition2(&sys, &d, &p).unwrap());
        prop_assert!(d.trace.len() <= k + n + 1);
        for i in &d.k4 {
            prop_assert_eq!(d.scale_partitions[i].s(), s);
        }
    }

    #[test]
    fn refutations_are_sound(s in system(12, 5), seed in any::<u64>()) {
        let out = attempt_refutation(&s, &params().with_seed(seed));
        match out.status {
            Status::Uncovered => prop_assert!(!covered(&s, out.vertex.unwrap().bits())),
            Status::Failed => prop_assert!(out.vertex.is_none() && out.stage.is_some()),
        }
    }

    #[test]
    fn rescaled_covers_are_never_refuted(
        half in 1usize..=7,
        factors in prop::collection::vec(positive_scalar(), 8),
        seed in any::<u64>(),
    ) {
        let base = lr_cover(2 * half).unwrap();
        let s = apply_rescaling(&base, &RowScaling::from_factors(factors[..base.k()].to_vec())).unwrap();
        let out = attempt_refutation(&s, &params().with_seed(seed));
        prop_assert_eq!(out.status, Status::Failed);
        prop_assert!(!out.detail.message.is_empty());
    }
}
