use banach_sgd::spaces::{bregman_distance, dual_pairing, lr_norm};
use banach_sgd::SpaceDescriptor;
use proptest::prelude::*;

const RS: [f64; 5] = [1.1, 1.5, 2.0, 3.0, 4.0];

/// `(r, p)` from the test grid together with a vector whose entries stay away from zero.
fn space_and_vector() -> impl Strategy<Value = (SpaceDescriptor, Vec<f64>)> {
    (0..RS.len(), any::<bool>(), 1usize..=64).prop_flat_map(|(ri, p_is_r, n)| {
        let r = RS[ri];
        let d = SpaceDescriptor::new(r, if p_is_r { r } else { 2.0 }).unwrap();
        let entry = (0.02f64..2.0, any::<bool>()).prop_map(|(m, neg)| if neg { -m } else { m });
        (Just(d), prop::collection::vec(entry, n))
    })
}

fn triple() -> impl Strategy<Value = (SpaceDescriptor, Vec<f64>, Vec<f64>, Vec<f64>)> {
    space_and_vector().prop_flat_map(|(d, x)| {
        let n = x.len();
        let v = prop::collection::vec(-1.0f64..1.0, n);
        (
            Just(d),
            prop::collection::vec(-1.0f64..1.0, n),
            v.clone(),
            v,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn defining_identities((d, x) in space_and_vector()) {
        let j = d.duality_map(&x);
        let n = d.norm(&x);
        let pairing = dual_pairing(&j, &x).unwrap();
        prop_assert!((pairing - n.powf(d.p())).abs() <= 1e-12 * n.powf(d.p()));
        let jn = lr_norm(&j, d.conjugate_r()).unwrap();
        prop_assert!((jn - n.powf(d.p() - 1.0)).abs() <= 1e-12 * n.powf(d.p() - 1.0));
    }

    #[test]
    fn inverse_round_trip((d, x) in space_and_vector()) {
        let back = d.inverse_duality_map(&d.duality_map(&x));
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn three_point_identity((d, z, w, v) in triple()) {
        let (jz, jv) = (d.duality_map(&z), d.duality_map(&v));
        let cross: f64 = jv.iter().zip(&jz).zip(w.iter().zip(&v)).map(|((a, b), (c, e))| (a - b) * (c - e)).sum();
        let lhs = d.bregman(&z, &w);
        let rhs = d.bregman(&z, &v) + d.bregman(&v, &w) + cross;
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn bregman_is_nonnegative((d, z, w, _v) in triple()) {
        prop_assert!(d.bregman(&z, &w) >= -1e-12);
        prop_assert!(d.bregman(&w, &z) >= -1e-12);
        prop_assert!(d.bregman(&z, &z).abs() < 1e-12);
    }

    #[test]
    fn hilbert_bregman_equals_half_squared_distance(
        z in prop::collection::vec(-1.0f64..1.0, 1..64),
        seed in any::<u64>(),
    ) {
        let w: Vec<f64> = z.iter().enumerate().map(|(i, v)| v + ((seed >> (i % 60)) & 7) as f64 / 8.0 - 0.4).collect();
        let half: f64 = 0.5 * z.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let d = bregman_distance(&z, &w, &SpaceDescriptor::hilbert()).unwrap();
        prop_assert!((d - half).abs() < 1e-12);
    }
}

#[test]
fn duality_map_of_zero_is_zero() {
    for r in RS {
        for p in [2.0, r] {
            let d = SpaceDescriptor::new(r, p).unwrap();
            assert_eq!(d.duality_map(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
            assert_eq!(d.inverse_duality_map(&[0.0, 0.0]), vec![0.0; 2]);
        }
    }
}

#[test]
fn conjugate_exponents_sum_to_one() {
    for r in RS {
        let d = SpaceDescriptor::new(r, 2.0).unwrap();
        assert!((1.0 / d.r() + 1.0 / d.conjugate_r() - 1.0).abs() < 1e-14);
        assert!((1.0 / d.p() + 1.0 / d.conjugate_p() - 1.0).abs() < 1e-14);
        assert!((d.dual().dual().r() - d.r()).abs() < 1e-12);
    }
}
