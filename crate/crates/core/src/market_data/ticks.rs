use std::io::{Read, Write};

use super::{MarketDataError, Result, Timestamp};

/// One level-1 order-book snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    /// `UpdateTime` combined with `UpdateMillisec`.
    pub timestamp: Timestamp,
    pub last_price: f64,
    /// Cumulative traded volume.
    pub volume: u64,
    pub bid_price1: f64,
    pub bid_volume1: u64,
    pub ask_price1: f64,
    pub ask_volume1: u64,
}

impl TickRecord {
    pub fn update_millisec(&self) -> u32 {
        self.timestamp.millis().rem_euclid(1000) as u32
    }

    pub fn spread(&self) -> f64 {
        self.ask_price1 - self.bid_price1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TickField {
    UpdateTime,
    UpdateMillisec,
    LastPrice,
    Volume,
    BidPrice1,
    BidVolume1,
    AskPrice1,
    AskVolume1,
}

impl TickField {
    pub const ALL: [TickField; 8] = [
        TickField::UpdateTime,
        TickField::UpdateMillisec,
        TickField::LastPrice,
        TickField::Volume,
        TickField::BidPrice1,
        TickField::BidVolume1,
        TickField::AskPrice1,
        TickField::AskVolume1,
    ];

    pub fn header_name(self) -> &'static str {
        match self {
            TickField::UpdateTime => "UpdateTime",
            TickField::UpdateMillisec => "UpdateMillisec",
            TickField::LastPrice => "LastPrice",
            TickField::Volume => "Volume",
            TickField::BidPrice1 => "BidPrice1",
            TickField::BidVolume1 => "BidVolume1",
            TickField::AskPrice1 => "AskPrice1",
            TickField::AskVolume1 => "AskVolume1",
        }
    }
}

/// How a tick file is laid out and how strictly it is checked.
#[derive(Debug, Clone)]
pub struct TickSchema {
    pub delimiter: u8,
    /// Fields that must appear in the header. Column order comes from the header itself.
    pub required: Vec<TickField>,
    /// Largest timestamp regression (ms) that is tolerated.
    pub timestamp_tolerance_ms: i64,
}

impl Default for TickSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            required: TickField::ALL.to_vec(),
            timestamp_tolerance_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTicks {
    pub ticks: Vec<TickRecord>,
    /// Rows skipped because a best bid or ask was the 0 sentinel.
    pub dropped_missing_quote: usize,
    /// Data rows read, kept or not.
    pub rows: usize,
}

/// Reads delimiter-separated tick rows with a header naming the eight fields.
pub fn parse_ticks<R: Read>(reader: R, schema: &TickSchema) -> Result<ParsedTicks> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let mut columns = [usize::MAX; 8];
    for (slot, field) in TickField::ALL.iter().enumerate() {
        match headers.iter().position(|h| h == field.header_name()) {
            Some(idx) => columns[slot] = idx,
            None if schema.required.contains(field) => {
                return Err(MarketDataError::MissingField(field.header_name().to_string()))
            }
            None => {}
        }
    }
    let width = headers.len();

    let mut out = ParsedTicks::default();
    let mut previous: Option<Timestamp> = None;
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        out.rows += 1;
        if record.len() != width {
            return Err(malformed(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let tick = parse_row(&record, &columns, line)?;

        if let Some(prev) = previous {
            if tick.timestamp.millis() < prev.millis() - schema.timestamp_tolerance_ms {
                return Err(MarketDataError::NonMonotoneTimestamp {
                    line,
                    previous: prev,
                    current: tick.timestamp,
                });
            }
        }
        previous = Some(previous.map_or(tick.timestamp, |p| p.max(tick.timestamp)));

        if tick.bid_price1 == 0.0 || tick.ask_price1 == 0.0 {
            out.dropped_missing_quote += 1;
            continue;
        }
        out.ticks.push(tick);
    }
    Ok(out)
}

fn malformed(line: u64, reason: String) -> MarketDataError {
    MarketDataError::MalformedRow { line, reason }
}

fn parse_row(record: &csv::StringRecord, columns: &[usize; 8], line: u64) -> Result<TickRecord> {
    let raw = |field: TickField| -> Option<&str> {
        let idx = columns[field as usize];
        (idx != usize::MAX).then(|| &record[idx])
    };
    let float = |field: TickField| -> Result<f64> {
        match raw(field) {
            None => Ok(0.0),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("{}: `{s}` is not a number", field.header_name()))),
        }
    };
    let count = |field: TickField| -> Result<u64> {
        match raw(field) {
            None => Ok(0),
            Some(s) => parse_count(s)
                .ok_or_else(|| malformed(line, format!("{}: `{s}` is not a count", field.header_name()))),
        }
    };

    let millis = match raw(TickField::UpdateMillisec) {
        None => 0,
        Some(s) => s
            .parse::<u32>()
            .ok()
            .filter(|ms| *ms < 1000)
            .ok_or_else(|| malformed(line, format!("UpdateMillisec: `{s}` is not in 0..=999")))?,
    };
    let time_str = raw(TickField::UpdateTime).unwrap_or("00:00:00");
    let timestamp = Timestamp::parse(time_str, millis)
        .ok_or_else(|| malformed(line, format!("UpdateTime: `{time_str}` is not a time")))?;

    let tick = TickRecord {
        timestamp,
        last_price: float(TickField::LastPrice)?,
        volume: count(TickField::Volume)?,
        bid_price1: float(TickField::BidPrice1)?,
        bid_volume1: count(TickField::BidVolume1)?,
        ask_price1: float(TickField::AskPrice1)?,
        ask_volume1: count(TickField::AskVolume1)?,
    };
    if tick.last_price <= 0.0 {
        return Err(malformed(line, format!("LastPrice {} is not positive", tick.last_price)));
    }
    if tick.bid_price1 > 0.0 && tick.ask_price1 > 0.0 && tick.ask_price1 < tick.bid_price1 {
        return Err(malformed(
            line,
            format!("crossed book: ask {} < bid {}", tick.ask_price1, tick.bid_price1),
        ));
    }
    Ok(tick)
}

// Some feeds print integral volumes as "120.0".
fn parse_count(s: &str) -> Option<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let v = s.parse::<f64>().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64).then_some(v as u64)
}

/// Writes ticks in the canonical eight-column layout.
pub fn write_ticks_csv<W: Write>(writer: W, ticks: &[TickRecord], delimiter: u8) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    wtr.write_record(TickField::ALL.iter().map(|f| f.header_name()))?;
    for t in ticks {
        let (time, ms) = t.timestamp.to_parts();
        wtr.write_record([
            time,
            ms.to_string(),
            t.last_price.to_string(),
            t.volume.to_string(),
            t.bid_price1.to_string(),
            t.bid_volume1.to_string(),
            t.ask_price1.to_string(),
            t.ask_volume1.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "UpdateTime,UpdateMillisec,LastPrice,Volume,BidPrice1,BidVolume1,AskPrice1,AskVolume1\n";

    fn parse(body: &str) -> Result<ParsedTicks> {
        parse_ticks(format!("{HEADER}{body}").as_bytes(), &TickSchema::default())
    }

    #[test]
    fn maps_fields_directly() {
        let parsed = parse("09:30:00,500,5742.0,120,5741.0,3,5743.0,5\n").unwrap();
        assert_eq!(parsed.ticks.len(), 1);
        let t = parsed.ticks[0];
        assert_eq!(t.last_price, 5742.0);
        assert_eq!(t.bid_price1, 5741.0);
        assert_eq!(t.ask_price1, 5743.0);
        assert_eq!(t.volume, 120);
        assert_eq!(t.bid_volume1, 3);
        assert_eq!(t.ask_volume1, 5);
        assert_eq!(t.update_millisec(), 500);
    }

    #[test]
    fn crossed_book_is_malformed() {
        let err = parse("09:30:00,500,5742.0,120,5744.0,3,5743.0,5\n").unwrap_err();
        assert!(matches!(err, MarketDataError::MalformedRow { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_body_is_empty_sequence() {
        let parsed = parse("").unwrap();
        assert!(parsed.ticks.is_empty());
        assert_eq!(parsed.rows, 0);
    }

    #[test]
    fn header_in_any_order() {
        let text = "AskPrice1,BidPrice1,LastPrice,UpdateTime,UpdateMillisec,Volume,BidVolume1,AskVolume1\n\
                    5743,5741,5742,09:30:00,0,1,1,1\n";
        let parsed = parse_ticks(text.as_bytes(), &TickSchema::default()).unwrap();
        assert_eq!(parsed.ticks[0].ask_price1, 5743.0);
        assert_eq!(parsed.ticks[0].last_price, 5742.0);
    }

    #[test]
    fn missing_header_field() {
        let text = "UpdateTime,UpdateMillisec,LastPrice,Volume,BidPrice1,BidVolume1,AskPrice1\n";
        let err = parse_ticks(text.as_bytes(), &TickSchema::default()).unwrap_err();
        assert!(matches!(err, MarketDataError::MissingField(ref f) if f == "AskVolume1"));
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let err = parse("09:30:00,0,1,1,1,1,2,1\n09:30:00,500,5742.0\n").unwrap_err();
        assert!(matches!(err, MarketDataError::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn unparsable_number() {
        let err = parse("09:30:00,0,abc,1,1,1,2,1\n").unwrap_err();
        assert!(matches!(err, MarketDataError::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn timestamp_regression_is_an_error() {
        let err = parse("09:30:01,0,5,1,4,1,6,1\n09:30:00,500,5,1,4,1,6,1\n").unwrap_err();
        assert!(matches!(err, MarketDataError::NonMonotoneTimestamp { line: 3, .. }));
    }

    #[test]
    fn equal_timestamps_keep_arrival_order() {
        let parsed = parse("09:30:00,0,5,1,4,1,6,1\n09:30:00,0,7,2,6,1,8,1\n").unwrap();
        assert_eq!(parsed.ticks[0].last_price, 5.0);
        assert_eq!(parsed.ticks[1].last_price, 7.0);
    }

    #[test]
    fn regression_within_tolerance() {
        let schema = TickSchema { timestamp_tolerance_ms: 600, ..TickSchema::default() };
        let text = format!("{HEADER}09:30:01,0,5,1,4,1,6,1\n09:30:00,500,5,1,4,1,6,1\n");
        assert_eq!(parse_ticks(text.as_bytes(), &schema).unwrap().ticks.len(), 2);
    }

    #[test]
    fn zero_quote_rows_are_dropped_and_counted() {
        let parsed = parse("09:30:00,0,5,1,0,0,6,1\n09:30:00,500,5,1,4,1,6,1\n").unwrap();
        assert_eq!(parsed.ticks.len(), 1);
        assert_eq!(parsed.dropped_missing_quote, 1);
        assert_eq!(parsed.rows, parsed.ticks.len() + parsed.dropped_missing_quote);
    }

    #[test]
    fn non_positive_last_price_rejected() {
        assert!(parse("09:30:00,0,0,1,4,1,6,1\n").is_err());
    }

    #[test]
    fn semicolon_delimiter() {
        let schema = TickSchema { delimiter: b';', ..TickSchema::default() };
        let text = HEADER.replace(',', ";") + "09:30:00;0;5;1;4;1;6;1\n";
        assert_eq!(parse_ticks(text.as_bytes(), &schema).unwrap().ticks.len(), 1);
    }

    #[test]
    fn write_then_parse() {
        let original = parse("09:30:00,0,5.5,1,4.25,1,6,1\n09:30:00,500,5.75,3,5,2,6.5,4\n").unwrap();
        let mut buf = Vec::new();
        write_ticks_csv(&mut buf, &original.ticks, b',').unwrap();
        let again = parse_ticks(buf.as_slice(), &TickSchema::default()).unwrap();
        assert_eq!(again.ticks, original.ticks);
    }
}
