use quantband_wasm::{oracle_series, read_signal, score_intervals};

#[test]
fn interval_scores_match_a_hand_count() {
    // Two of four covered; mean width 2 over a range of 6.
    let s = score_intervals(&[0.0, 2.0, 4.0, 6.0], &[-1.0, 3.0, 3.0, 7.0], &[1.0, 5.0, 5.0, 9.0], 0.1, 30.0, false).unwrap();
    assert_eq!(s.picp, 0.5);
    assert!((s.pinaw - 1.0 / 3.0).abs() < 1e-15);
    let expected = (2.0 / 3.0) * (-30.0 * (0.5 - 0.81f64)).exp();
    assert!((s.cwc - expected).abs() < 1e-9 * expected);
    assert!(score_intervals(&[1.0], &[0.0, 1.0], &[2.0], 0.1, 30.0, false).is_err());
}

#[test]
fn oversold_price_under_the_band_buys() {
    let r = read_signal(&[98.0, 99.0, 100.0, 101.0, 102.0], 97.5, 0.02, 25.0).unwrap();
    assert_eq!(r.signal, "buy");
    assert_eq!(r.bands.lower, 98.0);
    assert!((r.shape.mean - 100.0).abs() < 1e-9);
    assert!(r.shape.skewness.abs() < 1e-9);
    assert!(read_signal(&[3.0, 2.0, 1.0, 4.0, 5.0], 1.0, 0.02, 25.0).is_err());
}

#[test]
fn oracle_bands_bracket_the_median_path() {
    let s = oracle_series("gaussian-ar1", 200, 4).unwrap();
    assert_eq!((s.prices.len(), s.lower.len(), s.upper.len()), (200, 199, 199));
    assert!(s.lower.iter().zip(&s.upper).all(|(l, u)| l < u));
    assert!(oracle_series("brownian", 10, 0).is_err());
}
