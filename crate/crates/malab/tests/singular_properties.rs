use malab::singular::cantor::lengths_exact;
use malab::singular::{build_cantor, CantorStructure, SpikeFunction};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cantor_structure_is_consistent(k in 1usize..=14) {
        let c = build_cantor(k).unwrap();
        c.validate().unwrap();
        prop_assert_eq!(c.survivors.len(), 1 << k);
        let back = CantorStructure::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn exact_lengths_tile(k in 1usize..=30) {
        let ex = lengths_exact(k);
        let two = BigRational::from_integer(BigInt::from(2));
        let mut total = BigRational::zero();
        for j in 1..=k {
            total += &ex.removed[j] * Pow::pow(two.clone(), (j - 1) as u32);
        }
        total += &ex.survivor[k] * Pow::pow(two, k as u32);
        prop_assert_eq!(total, BigRational::one());
    }

    #[test]
    fn v_slopes_nondecreasing(xs in prop::collection::vec(-1.0f64..1.0, 3..60)) {
        let v = SpikeFunction::new(8).unwrap();
        let mut xs = xs;
        xs.push(-1.0);
        xs.push(1.0);
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let vals: Vec<f64> = xs.iter().map(|&x| v.v_eval(x).unwrap()).collect();
        let slopes: Vec<f64> = (0..xs.len() - 1).map(|i| (vals[i + 1] - vals[i]) / (xs[i + 1] - xs[i])).collect();
        for w in slopes.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-6 * (1.0 + w[0].abs()), "{:?}", w);
        }
    }

    #[test]
    fn v_increases_with_depth_within_tail(x in -1.0f64..1.0, k in 2usize..12) {
        let a = SpikeFunction::new(k).unwrap();
        let b = SpikeFunction::new(k + 1).unwrap();
        let (va, vb) = (a.v_eval(x).unwrap(), b.v_eval(x).unwrap());
        prop_assert!(vb >= va - 1e-12 && vb <= va + a.tail_bound() + 1e-12);
    }
}

#[test]
fn survivor_products_approach_120_slowly() {
    // 2^k L_k = 120 / ((k+1)...(k+5)) exactly, so 2^k L_k k^5 = 120 (1 - 15/k + ...)
    let ex = lengths_exact(160);
    let int = |n: usize| BigRational::from_integer(BigInt::from(n));
    let mut last = 0.0;
    for k in 1..=160 {
        let scaled = &ex.survivor[k] * Pow::pow(int(2), k as u32);
        let den: BigRational = (1..=5).map(|j| int(k + j)).fold(BigRational::one(), |a, b| a * b);
        assert_eq!(scaled.clone(), int(120) / den);
        let v = malab::singular::cantor::to_f64(&(scaled * Pow::pow(int(k), 5u32)));
        assert!(v > last && v < 120.0, "k = {k}: {v}");
        assert_eq!((v / 120.0 - 1.0).abs() <= 0.1, k >= 141, "k = {k}: {v}");
        last = v;
    }
}
