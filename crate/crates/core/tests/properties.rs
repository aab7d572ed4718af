use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use qinf_core::codec::{cylinder_of, decode, encode_rational};
use qinf_core::constructions::tsl::tsl_scheme;
use qinf_core::dimest::box_count;
use qinf_core::measures::{entropy_ratio_dimension, local_dimension_series};
use qinf_core::numeric::{derive_seed, ratio};
use qinf_core::{Digit, DigitLaw, DigitSequence, MeasureKind, ProductMeasure, Real, SequenceTail, StochasticVector};

fn vectors() -> impl Strategy<Value = StochasticVector> {
    prop_oneof![
        Just(StochasticVector::luroth()),
        (1u64..9).prop_map(|n| StochasticVector::geometric(ratio(n, 10)).unwrap()),
    ]
}

fn point() -> impl Strategy<Value = BigRational> {
    (2u64..1_000_000_000).prop_flat_map(|d| (0..d).prop_map(move |n| ratio(n, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn point_lies_in_its_cylinder(v in vectors(), x in point(), depth in 1usize..25) {
        let seq = encode_rational(&x, &v, depth).unwrap();
        prop_assert_eq!(seq.len(), depth);
        let cyl = cylinder_of(&seq.digits, &v).unwrap();
        prop_assert_eq!(cyl.contains(&x), Some(true));
        if seq.tail == SequenceTail::ZeroTail {
            prop_assert_eq!(decode(&seq, &v).unwrap(), Real::Exact(x));
        }
    }

    #[test]
    fn word_round_trips_through_its_left_end(v in vectors(), word in prop::collection::vec(0u64..40, 1..12)) {
        let seq = DigitSequence::from_u64s(&word, SequenceTail::ZeroTail);
        let x = decode(&seq, &v).unwrap();
        let x = x.as_exact().unwrap().clone();
        let back = encode_rational(&x, &v, word.len()).unwrap();
        prop_assert_eq!(back.digits, seq.digits);
        prop_assert_eq!(back.tail, SequenceTail::ZeroTail);
    }

    #[test]
    fn children_tile_the_parent(word in prop::collection::vec(0u64..20, 0..6), n in 0u64..30) {
        let v = StochasticVector::luroth();
        let digits: Vec<Digit> = word.iter().map(|&d| Digit::from(d)).collect();
        let parent = cylinder_of(&digits, &v).unwrap();
        let kids = parent.children(&Digit::ZERO, &Digit::from(n), &v).unwrap();
        let mut left = parent.left.as_exact().unwrap().clone();
        for kid in &kids {
            prop_assert_eq!(kid.left.as_exact().unwrap(), &left);
            left += kid.length.as_exact().unwrap();
        }
        // The first n + 1 children cover the fraction 1 - 1/(n + 2) of the parent.
        let covered = &left - parent.left.as_exact().unwrap();
        let want = parent.length.as_exact().unwrap() * (BigRational::one() - ratio(1, n + 2));
        prop_assert_eq!(covered, want);
    }

    #[test]
    fn entropy_is_at_most_the_cross_entropy(v in vectors(), l in 1u64..300) {
        let law = DigitLaw::TruncatedRenormalized { l };
        let m = ProductMeasure::new(&v, MeasureKind::Iid { law: law.clone() }).unwrap();
        let (h, b) = m.law_entropy(&law).unwrap();
        prop_assert!(h >= -1e-12);
        prop_assert!(h <= b + 1e-12, "h = {h}, b = {b}");
        // Oracle: direct sums over the renormalised weights.
        let q: Vec<f64> = (0..l).map(|i| v.weight(&Digit::from(i)).unwrap().to_f64()).collect();
        let s: f64 = q.iter().sum();
        let h_direct: f64 = q.iter().map(|x| -(x / s) * (x / s).ln()).sum();
        let b_direct: f64 = q.iter().map(|x| -(x / s) * x.ln()).sum();
        prop_assert!((h - h_direct).abs() <= 1e-9 * h_direct.abs().max(1.0));
        prop_assert!((b - b_direct).abs() <= 1e-9 * b_direct.abs().max(1.0));
    }

    #[test]
    fn box_counts_grow_as_boxes_shrink(points in prop::collection::vec(0.0f64..1.0, 100..400)) {
        let exps: Vec<u32> = (1..=12).collect();
        if let Ok(report) = box_count(&points, &exps) {
            let counts: Vec<f64> = report.series.iter().map(|s| s[0]).collect();
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(counts.iter().all(|&c| c >= 1.0 && c <= points.len() as f64));
        }
    }
}

#[test]
fn sampled_local_dimension_tracks_the_entropy_ratio() {
    let v = StochasticVector::luroth();
    let scheme = tsl_scheme(&v, 4, 16, 3).unwrap();
    let bounds = scheme.boundaries(3).unwrap();
    let depth = bounds[2].n.to_usize().unwrap();
    let m = ProductMeasure::xi(&v, scheme).unwrap();
    let report = entropy_ratio_dimension(&m, 3, 1).unwrap();
    let target = report.checkpoints[2].ratio;
    let mut ratios: Vec<f64> = (0..41)
        .map(|i| {
            let word = m.sample(depth, derive_seed(7, i)).unwrap();
            *local_dimension_series(&m, &word.digits).unwrap().ratio.last().unwrap()
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!((median - target).abs() < 0.05, "median {median}, entropy ratio {target}, depth {depth}");
}

#[test]
fn encoding_rejects_points_outside_the_unit_interval() {
    let v = StochasticVector::luroth();
    assert!(encode_rational(&BigRational::one(), &v, 3).is_err());
    assert!(encode_rational(&BigRational::new(BigInt::from(-1), BigInt::from(2)), &v, 3).is_err());
    let zero = encode_rational(&BigRational::zero(), &v, 4).unwrap();
    assert_eq!(zero.tail, SequenceTail::ZeroTail);
    assert!(zero.digits.iter().all(Digit::is_zero));
}
