//! Tick ingestion, bar resampling, min-max scaling and windowing.

mod artifact;
mod bars;
mod normalize;
mod ticks;
mod windows;

use std::fmt;

use chrono::{DateTime, NaiveDateTime, NaiveTime, Timelike};
use thiserror::Error;

pub use artifact::{read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use bars::{resample, write_bars_csv, read_bars_csv, Bar};
pub use normalize::{apply_minmax, fit_minmax, invert_minmax, NormalizationParams};
pub use ticks::{parse_ticks, write_ticks_csv, ParsedTicks, TickField, TickRecord, TickSchema};
pub use windows::{decision_inputs, fit_scalers, make_windows, Feature, WindowedDataset};

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("timestamp went backwards at line {line}: {previous} -> {current}")]
    NonMonotoneTimestamp {
        line: u64,
        previous: Timestamp,
        current: Timestamp,
    },
    #[error("header is missing required field `{0}`")]
    MissingField(String),
    #[error("empty input")]
    EmptyInput,
    #[error("feature {feature} has zero range (min == max == {value})")]
    DegenerateFeature { feature: usize, value: f64 },
    #[error("insufficient data: need at least {needed} bars, got {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("invalid dataset artifact: {0}")]
    InvalidArtifact(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = MarketDataError> = std::result::Result<T, E>;

/// Milliseconds on a single monotone clock.
///
/// Feeds that only carry a time of day (`HH:MM:SS`) map to milliseconds since
/// midnight; full date-times map to milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

const MS_PER_DAY: i64 = 86_400_000;

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    /// Combines an `UpdateTime` string with its `UpdateMillisec` companion.
    pub fn parse(update_time: &str, millis: u32) -> Option<Self> {
        let s = update_time.trim();
        let base_ms = if let Ok(t) = NaiveTime::parse_from_str(s, "%H:%M:%S") {
            i64::from(t.num_seconds_from_midnight()) * 1000
        } else {
            let dt = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
                .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y%m%d %H:%M:%S"))
                .ok()?;
            dt.and_utc().timestamp() * 1000
        };
        Some(Timestamp(base_ms + i64::from(millis)))
    }

    /// Splits into the `(UpdateTime, UpdateMillisec)` pair used by the tick format.
    pub fn to_parts(self) -> (String, u32) {
        let ms = self.0.rem_euclid(1000) as u32;
        let secs = self.0.div_euclid(1000);
        if (0..MS_PER_DAY).contains(&self.0) {
            let t = NaiveTime::from_num_seconds_from_midnight_opt(secs as u32, 0)
                .expect("seconds within a day");
            (t.format("%H:%M:%S").to_string(), ms)
        } else {
            let dt = DateTime::from_timestamp(secs, 0).expect("timestamp in chrono range");
            (dt.naive_utc().format("%Y-%m-%d %H:%M:%S").to_string(), ms)
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (time, ms) = self.to_parts();
        write!(f, "{time}.{ms:03}")
    }
}
