use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{MarketDataError, Result, TickRecord, Timestamp};

/// OHLC summary of the ticks falling in one resampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    #[serde(with = "ts_millis")]
    pub open_time: Timestamp,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume_delta: u64,
    /// Bid-ask spread of the last tick in the interval.
    pub spread: f64,
}

impl Bar {
    /// A bar with o = h = l = c.
    pub fn flat(open_time: Timestamp, price: f64) -> Self {
        Bar {
            open_time,
            open: price,
            high: price,
            low: price,
            close: price,
            volume_delta: 0,
            spread: 0.0,
        }
    }
}

mod ts_millis {
    use super::Timestamp;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(ts.millis())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        i64::deserialize(d).map(Timestamp)
    }
}

/// Aggregates ticks into fixed-width bars of `interval_ms`.
///
/// Intervals with no ticks between the first and last populated interval are
/// forward-filled with the previous close and a zero volume delta.
pub fn resample(ticks: &[TickRecord], interval_ms: i64) -> Result<Vec<Bar>> {
    if interval_ms <= 0 {
        return Err(MarketDataError::InvalidArgument(format!(
            "resample interval must be positive, got {interval_ms} ms"
        )));
    }
    let first = ticks.first().ok_or(MarketDataError::EmptyInput)?;

    let mut bars: Vec<Bar> = Vec::new();
    let mut current_bucket = first.timestamp.millis().div_euclid(interval_ms);
    let mut prev_volume = first.volume;

    for tick in ticks {
        let bucket = tick.timestamp.millis().div_euclid(interval_ms);
        let delta = tick.volume.saturating_sub(prev_volume);
        prev_volume = tick.volume;

        match bars.last_mut() {
            Some(bar) if bucket == current_bucket => {
                bar.high = bar.high.max(tick.last_price);
                bar.low = bar.low.min(tick.last_price);
                bar.close = tick.last_price;
                bar.volume_delta += delta;
                bar.spread = tick.spread();
                continue;
            }
            Some(bar) => {
                let prev_close = bar.close;
                for gap in current_bucket + 1..bucket {
                    bars.push(Bar::flat(Timestamp(gap * interval_ms), prev_close));
                }
            }
            None => {}
        }
        current_bucket = bucket;
        bars.push(Bar {
            open_time: Timestamp(bucket * interval_ms),
            open: tick.last_price,
            high: tick.last_price,
            low: tick.last_price,
            close: tick.last_price,
            volume_delta: delta,
            spread: tick.spread(),
        });
    }
    Ok(bars)
}

pub fn write_bars_csv<W: Write>(writer: W, bars: &[Bar]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for bar in bars {
        wtr.serialize(bar)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_bars_csv<R: Read>(reader: R) -> Result<Vec<Bar>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let bars = rdr.deserialize().collect::<Result<Vec<Bar>, _>>()?;
    Ok(bars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tick(ms: i64, price: f64, volume: u64) -> TickRecord {
        TickRecord {
            timestamp: Timestamp(ms),
            last_price: price,
            volume,
            bid_price1: price - 0.5,
            bid_volume1: 1,
            ask_price1: price + 0.5,
            ask_volume1: 1,
        }
    }

    #[test]
    fn aggregates_one_interval() {
        let ticks = [tick(0, 5.0, 10), tick(500, 7.0, 12), tick(1000, 6.0, 15)];
        let bars = resample(&ticks, 30_000).unwrap();
        assert_eq!(bars.len(), 1);
        let b = bars[0];
        assert_eq!((b.open, b.high, b.low, b.close), (5.0, 7.0, 5.0, 6.0));
        assert_eq!(b.volume_delta, 5);
    }

    #[test]
    fn single_tick() {
        let bars = resample(&[tick(100, 9.0, 1)], 1000).unwrap();
        assert_eq!(bars, vec![Bar { spread: 1.0, ..Bar::flat(Timestamp(0), 9.0) }]);
    }

    #[test]
    fn gaps_are_forward_filled() {
        let ticks = [tick(0, 5.0, 1), tick(2500, 8.0, 4)];
        let bars = resample(&ticks, 1000).unwrap();
        assert_eq!(bars.len(), 3);
        assert_eq!(bars[1], Bar::flat(Timestamp(1000), 5.0));
        assert_eq!(bars[2].open, 8.0);
        assert_eq!(bars[2].open_time, Timestamp(2000));
        assert_eq!(bars[2].volume_delta, 3);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(resample(&[], 1000), Err(MarketDataError::EmptyInput)));
    }

    #[test]
    fn csv_round_trip() {
        let bars = resample(&[tick(0, 5.0, 1), tick(2500, 8.25, 4)], 1000).unwrap();
        let mut buf = Vec::new();
        write_bars_csv(&mut buf, &bars).unwrap();
        assert_eq!(read_bars_csv(buf.as_slice()).unwrap(), bars);
    }

    proptest! {
        #[test]
        fn volume_is_conserved(steps in prop::collection::vec((0i64..4000, 0u64..50, 1.0f64..100.0), 1..60)) {
            let mut ms = 0;
            let mut vol = 1000;
            let ticks: Vec<_> = steps.iter().map(|&(dt, dv, p)| {
                ms += dt;
                vol += dv;
                tick(ms, p, vol)
            }).collect();
            let bars = resample(&ticks, 1000).unwrap();
            let total: u64 = bars.iter().map(|b| b.volume_delta).sum();
            prop_assert_eq!(total, ticks.last().unwrap().volume - ticks[0].volume);
            for b in &bars {
                prop_assert!(b.low <= b.open && b.open <= b.high);
                prop_assert!(b.low <= b.close && b.close <= b.high);
            }
            for w in bars.windows(2) {
                prop_assert_eq!(w[1].open_time.millis() - w[0].open_time.millis(), 1000);
            }
        }
    }
}
