use serde::{Deserialize, Serialize};

use super::{MarketDataError, Result};

/// Per-feature extrema for min-max scaling, frozen after fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

impl NormalizationParams {
    /// Builds params from explicit extrema, rejecting zero or negative ranges.
    pub fn new(x_min: Vec<f64>, x_max: Vec<f64>) -> Result<Self> {
        if x_min.len() != x_max.len() {
            return Err(MarketDataError::InvalidArgument(format!(
                "{} minima vs {} maxima",
                x_min.len(),
                x_max.len()
            )));
        }
        for (feature, (&lo, &hi)) in x_min.iter().zip(&x_max).enumerate() {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(MarketDataError::DegenerateFeature { feature, value: lo });
            }
        }
        Ok(Self { x_min, x_max })
    }

    pub fn num_features(&self) -> usize {
        self.x_min.len()
    }

    pub fn range(&self, feature: usize) -> f64 {
        self.x_max[feature] - self.x_min[feature]
    }

    #[inline]
    pub fn apply(&self, feature: usize, x: f64) -> f64 {
        (x - self.x_min[feature]) / self.range(feature)
    }

    #[inline]
    pub fn invert(&self, feature: usize, y: f64) -> f64 {
        y * self.range(feature) + self.x_min[feature]
    }
}

/// Fits exact column extrema. Each inner slice is one feature.
pub fn fit_minmax<S: AsRef<[f64]>>(columns: &[S]) -> Result<NormalizationParams> {
    if columns.is_empty() {
        return Err(MarketDataError::EmptyInput);
    }
    let mut x_min = Vec::with_capacity(columns.len());
    let mut x_max = Vec::with_capacity(columns.len());
    for (feature, col) in columns.iter().enumerate() {
        let col = col.as_ref();
        if col.is_empty() {
            return Err(MarketDataError::EmptyInput);
        }
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            return Err(MarketDataError::DegenerateFeature { feature, value: lo });
        }
        x_min.push(lo);
        x_max.push(hi);
    }
    NormalizationParams::new(x_min, x_max)
}

/// Scales one feature column. Values outside the fitted range land outside [0, 1].
pub fn apply_minmax(values: &[f64], params: &NormalizationParams, feature: usize) -> Vec<f64> {
    values.iter().map(|&x| params.apply(feature, x)).collect()
}

pub fn invert_minmax(normalized: &[f64], params: &NormalizationParams, feature: usize) -> Vec<f64> {
    normalized.iter().map(|&y| params.invert(feature, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extrema() {
        let p = fit_minmax(&[vec![0.0, 5.0, 10.0]]).unwrap();
        assert_eq!((p.x_min[0], p.x_max[0]), (0.0, 10.0));
    }

    #[test]
    fn constant_feature_is_degenerate() {
        let err = fit_minmax(&[vec![3.0, 3.0, 3.0]]).unwrap_err();
        assert!(matches!(err, MarketDataError::DegenerateFeature { feature: 0, .. }));
    }

    #[test]
    fn features_fitted_independently() {
        let p = fit_minmax(&[vec![1.0, -2.0], vec![100.0, 300.0]]).unwrap();
        assert_eq!(p.x_min, vec![-2.0, 100.0]);
        assert_eq!(p.x_max, vec![1.0, 300.0]);
    }

    #[test]
    fn apply_and_extrapolate() {
        let p = NormalizationParams::new(vec![0.0], vec![10.0]).unwrap();
        assert_eq!(apply_minmax(&[0.0, 5.0, 10.0], &p, 0), vec![0.0, 0.5, 1.0]);
        assert_eq!(apply_minmax(&[12.0], &p, 0), vec![1.2]);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(NormalizationParams::new(vec![1.0], vec![1.0]).is_err());
        assert!(NormalizationParams::new(vec![2.0], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn invert_undoes_apply(
            lo in -1e6f64..1e6,
            width in 1e-3f64..1e6,
            xs in prop::collection::vec(-1e7f64..1e7, 1..50),
        ) {
            let p = NormalizationParams::new(vec![lo], vec![lo + width]).unwrap();
            let back = invert_minmax(&apply_minmax(&xs, &p, 0), &p, 0);
            for (x, y) in xs.iter().zip(&back) {
                let scale = x.abs().max(lo.abs()).max(width).max(1e-300);
                prop_assert!((x - y).abs() <= 1e-12 * scale, "{x} vs {y}");
            }
        }
    }
}
