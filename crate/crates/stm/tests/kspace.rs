use bomai_stm::{bits_from_hex, bits_from_str, k_space_estimate, k_space_estimates, DEFAULT_BUDGET};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn empty_string_has_zero_complexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = k_space_estimate(&[], 0.5, 500, &mut rng).unwrap();
    assert_eq!(e.k, 0.0);
    assert_eq!(e.hits, 500);
    assert!(!e.censored);
    assert_eq!(e.std_error, 0.0);
}

#[test]
fn bit_parsing() {
    assert_eq!(bits_from_hex("a1").unwrap(), bits_from_str("10100001").unwrap());
    assert!(bits_from_hex("xy").is_err());
    assert!(bits_from_str("012").is_err());
    assert!(bits_from_hex("").unwrap().is_empty());
}

#[test]
fn prefixes_are_monotone() {
    let x = bits_from_hex("b5e3").unwrap();
    let prefixes: Vec<Vec<bool>> = (0..=x.len()).map(|n| x[..n].to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let est = k_space_estimates(&prefixes, 0.5, 3_000, DEFAULT_BUDGET, &mut rng).unwrap();
    for w in est.windows(2) {
        assert!(w[0].hits >= w[1].hits);
        assert!(w[0].k <= w[1].k);
    }
    // independent samples agree within their reported error
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zero = k_space_estimate(&[false], 0.5, 3_000, &mut rng).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let zero_one = k_space_estimate(&[false, true], 0.5, 3_000, &mut rng).unwrap();
    let slack = 3.0 * (zero.std_error.powi(2) + zero_one.std_error.powi(2)).sqrt();
    assert!(zero.k <= zero_one.k + slack);
}

#[test]
fn short_and_long_strings_separate() {
    let long = bits_from_hex("b5e3").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let est = k_space_estimates(&[vec![false], long], 0.5, 4_000, DEFAULT_BUDGET, &mut rng).unwrap();
    let (short, long) = (&est[0], &est[1]);
    assert!(!short.censored);
    assert!(short.separated_below(long, 3.0), "{short:?} {long:?}");
}

#[test]
fn censored_estimates_are_flagged() {
    let x = bits_from_hex("b5e3b5e3").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let e = k_space_estimate(&x, 0.01, 200, &mut rng).unwrap();
    assert!(e.censored);
    assert_eq!(e.k, (200f64).ln());
    assert!(e.k_lower < e.k);
}

#[test]
fn zero_samples_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(k_space_estimate(&[true], 0.5, 0, &mut rng).is_err());
    assert!(k_space_estimate(&[true], 1.5, 10, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimates_replay(seed in any::<u64>(), bits in prop::collection::vec(any::<bool>(), 0..6)) {
        let run = || k_space_estimate(&bits, 0.3, 200, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(run(), run());
    }
}
