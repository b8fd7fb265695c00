use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

const LEVEL_MATCH_TOL: f64 = 1e-9;

/// Strictly increasing probabilities in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(ModelError::InvalidLevels("no levels".into()));
        }
        if levels.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(ModelError::InvalidLevels(format!("{levels:?} not all in (0,1)")));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidLevels(format!("{levels:?} not strictly increasing")));
        }
        Ok(Self(levels))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Column index of `level`, matched to within 1e-9.
    pub fn index_of(&self, level: f64) -> Option<usize> {
        self.0.iter().position(|&p| (p - level).abs() < LEVEL_MATCH_TOL)
    }
}

impl Default for QuantileLevels {
    fn default() -> Self {
        Self(vec![0.05, 0.10, 0.50, 0.90, 0.95])
    }
}

impl TryFrom<Vec<f64>> for QuantileLevels {
    type Error = ModelError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileLevels> for Vec<f64> {
    fn from(l: QuantileLevels) -> Self {
        l.0
    }
}

/// Pinball loss of predicting `q_hat` for the `beta`-quantile when `y` is observed.
#[inline]
pub fn pinball_loss(q_hat: f64, y: f64, beta: f64) -> f64 {
    if q_hat >= y {
        (1.0 - beta) * (q_hat - y)
    } else {
        beta * (y - q_hat)
    }
}

/// Derivative of [`pinball_loss`] with respect to `q_hat` (right derivative at the kink).
#[inline]
pub fn pinball_grad(q_hat: f64, y: f64, beta: f64) -> f64 {
    if q_hat >= y {
        1.0 - beta
    } else {
        -beta
    }
}

/// Predicted quantile values, one row per sample and one column per level.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileForecast {
    pub levels: QuantileLevels,
    /// Row-major (N x Q).
    pub values: Vec<f64>,
}

impl QuantileForecast {
    pub fn new(levels: QuantileLevels, values: Vec<f64>) -> Result<Self> {
        if values.len() % levels.len() != 0 {
            return Err(ModelError::ShapeMismatch(format!(
                "{} values is not a multiple of {} levels",
                values.len(),
                levels.len()
            )));
        }
        Ok(Self { levels, values })
    }

    pub fn from_rows(levels: QuantileLevels, rows: &[Vec<f64>]) -> Result<Self> {
        let q = levels.len();
        if let Some(r) = rows.iter().find(|r| r.len() != q) {
            return Err(ModelError::ShapeMismatch(format!("row of {} values for {q} levels", r.len())));
        }
        Ok(Self { levels, values: rows.concat() })
    }

    pub fn num_samples(&self) -> usize {
        self.values.len() / self.levels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let q = self.levels.len();
        &self.values[i * q..(i + 1) * q]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.levels.len())
    }

    /// Column of values for one level.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            levels: self.levels.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Sorts every row ascending. Already-sorted rows come back bit-identical.
pub fn repair_monotonic(forecast: &QuantileForecast) -> QuantileForecast {
    let mut values = forecast.values.clone();
    for row in values.chunks_mut(forecast.levels.len()) {
        if row.windows(2).any(|w| w[0] > w[1]) {
            row.sort_by(f64::total_cmp);
        }
    }
    QuantileForecast {
        levels: forecast.levels.clone(),
        values,
    }
}

/// `[lower, upper]` built from levels `beta/2` and `1 - beta/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    pub beta: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Column indices of the `beta/2` and `1 - beta/2` levels.
pub fn interval_columns(levels: &QuantileLevels, beta: f64) -> Result<(usize, usize)> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(ModelError::InvalidLevels(format!("miscoverage {beta} not in (0,1)")));
    }
    let lo = levels.index_of(beta / 2.0).ok_or(ModelError::MissingLevel(beta / 2.0))?;
    let hi = levels.index_of(1.0 - beta / 2.0).ok_or(ModelError::MissingLevel(1.0 - beta / 2.0))?;
    Ok((lo, hi))
}

/// Per-sample `(1 - beta)` intervals, taken after monotonic repair.
pub fn predict_intervals(forecast: &QuantileForecast, beta: f64) -> Result<Vec<PredictionInterval>> {
    let (lo, hi) = interval_columns(&forecast.levels, beta)?;
    let repaired = repair_monotonic(forecast);
    Ok(repaired
        .rows()
        .map(|r| PredictionInterval { lower: r[lo], upper: r[hi], beta })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn forecast(rows: &[Vec<f64>]) -> QuantileForecast {
        QuantileForecast::from_rows(QuantileLevels::default(), rows).unwrap()
    }

    #[test]
    fn pinball_spot_values() {
        assert!((pinball_loss(10.0, 12.0, 0.9) - 1.8).abs() < 1e-12);
        assert!((pinball_loss(10.0, 8.0, 0.9) - 0.2).abs() < 1e-12);
        for beta in [0.05, 0.5, 0.95] {
            assert_eq!(pinball_loss(3.0, 3.0, beta), 0.0);
        }
    }

    #[test]
    fn levels_validation() {
        assert!(QuantileLevels::new(vec![0.1, 0.1]).is_err());
        assert!(QuantileLevels::new(vec![0.5, 0.1]).is_err());
        assert!(QuantileLevels::new(vec![0.0, 0.5]).is_err());
        assert!(QuantileLevels::new(vec![]).is_err());
        assert_eq!(QuantileLevels::default().as_slice(), &[0.05, 0.10, 0.50, 0.90, 0.95]);
    }

    #[test]
    fn repair_sorts_crossed_rows() {
        let f = forecast(&[vec![5.0, 4.0, 6.0, 7.0, 8.0]]);
        assert_eq!(repair_monotonic(&f).values, vec![4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn repair_leaves_monotone_and_tied_rows() {
        let f = forecast(&[vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![2.0; 5]]);
        assert_eq!(repair_monotonic(&f), f);
    }

    #[test]
    fn interval_columns_for_default_levels() {
        let f = forecast(&[vec![1.0, 2.0, 3.0, 4.0, 5.0]]);
        let pi = predict_intervals(&f, 0.1).unwrap();
        assert_eq!((pi[0].lower, pi[0].upper), (1.0, 5.0));
        let pi = predict_intervals(&f, 0.2).unwrap();
        assert_eq!((pi[0].lower, pi[0].upper), (2.0, 4.0));
        assert!(matches!(predict_intervals(&f, 0.5), Err(ModelError::MissingLevel(l)) if (l - 0.25).abs() < 1e-12));
    }

    #[test]
    fn intervals_use_repaired_rows() {
        let f = forecast(&[vec![9.0, 2.0, 3.0, 4.0, 1.0]]);
        let pi = predict_intervals(&f, 0.1).unwrap();
        assert_eq!((pi[0].lower, pi[0].upper), (1.0, 9.0));
    }

    proptest! {
        #[test]
        fn repair_is_sorted_idempotent_and_preserves_values(row in prop::collection::vec(-1e3f64..1e3, 5)) {
            let f = forecast(&[row.clone()]);
            let once = repair_monotonic(&f);
            prop_assert!(once.values.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(&repair_monotonic(&once), &once);
            let mut a = row.clone();
            a.sort_by(f64::total_cmp);
            prop_assert_eq!(once.values, a);
        }

        #[test]
        fn pinball_non_negative(q in -1e3f64..1e3, y in -1e3f64..1e3, beta in 0.001f64..0.999) {
            prop_assert!(pinball_loss(q, y, beta) >= 0.0);
        }
    }
}
