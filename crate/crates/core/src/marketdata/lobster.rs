//! Parser for LOBSTER-style message/orderbook file pairs.
//!
//! The message file carries one event per row
//! (`time-seconds,event-type,order-id,size,price,direction`); the orderbook
//! file carries the book state *after* each message
//! (`ask_price_1,ask_size_1,bid_price_1,bid_size_1[,deeper levels…]`).
//! Executions are event types 4 (visible) and 5 (hidden). The midprice before
//! a trade comes from the orderbook row of the previous message, the midprice
//! after from the trade's own row.

use std::io::BufRead;

use super::{EventSeries, MarketDataError, TradeTick};

const EVENT_EXEC_VISIBLE: i64 = 4;
const EVENT_EXEC_HIDDEN: i64 = 5;

/// Parser switches. The defaults keep every execution type.
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Keep hidden-liquidity executions (event type 5).
    pub include_hidden: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            include_hidden: true,
        }
    }
}

/// Output of [`parse_lobster`]: the event series plus the count of execution
/// rows that had to be dropped (no preceding quote context).
#[derive(Debug)]
pub struct ParseReport {
    pub series: EventSeries,
    pub rejected: usize,
}

/// Parses a message/orderbook file pair into an [`EventSeries`] of
/// executions.
///
/// Timestamps are converted exactly from decimal seconds to integer
/// nanoseconds (no float round-trip). Execution rows before the first quote
/// row are rejected and counted, never silently invented.
pub fn parse_lobster(
    asset_id: impl Into<String>,
    messages: impl BufRead,
    orderbook: impl BufRead,
    options: ParseOptions,
) -> Result<ParseReport, MarketDataError> {
    let mut ticks: Vec<TradeTick> = Vec::new();
    let mut rejected = 0usize;
    let mut prev_mid: Option<i64> = None;
    let mut prev_ts: Option<i64> = None;

    let mut book_lines = orderbook.lines();
    for (idx, msg_line) in messages.lines().enumerate() {
        let line_no = idx + 1;
        let msg_line = msg_line.map_err(|e| MarketDataError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if msg_line.trim().is_empty() {
            continue;
        }
        let book_line = book_lines
            .next()
            .ok_or(MarketDataError::RowCountMismatch)?
            .map_err(|e| MarketDataError::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;

        let msg = parse_message_row(&msg_line, line_no)?;
        let mid = parse_book_mid(&book_line, line_no)?;

        if let Some(prev) = prev_ts {
            if msg.timestamp_ns < prev {
                return Err(MarketDataError::UnsortedTimestamps {
                    line: line_no,
                    prev,
                    cur: msg.timestamp_ns,
                });
            }
        }
        prev_ts = Some(msg.timestamp_ns);

        let is_exec = msg.event_type == EVENT_EXEC_VISIBLE
            || (msg.event_type == EVENT_EXEC_HIDDEN && options.include_hidden);
        if is_exec {
            match prev_mid {
                Some(mid_before) => ticks.push(TradeTick {
                    timestamp_ns: msg.timestamp_ns,
                    direction: msg.direction,
                    size: msg.size,
                    trade_price: msg.price,
                    mid_before,
                    mid_after: mid,
                }),
                None => rejected += 1,
            }
        }
        prev_mid = Some(mid);
    }
    if book_lines.next().is_some() {
        return Err(MarketDataError::RowCountMismatch);
    }

    Ok(ParseReport {
        series: EventSeries::from_ticks(asset_id, ticks),
        rejected,
    })
}

struct MessageRow {
    timestamp_ns: i64,
    event_type: i64,
    size: u64,
    price: i64,
    direction: i8,
}

fn parse_message_row(line: &str, line_no: usize) -> Result<MessageRow, MarketDataError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 6 {
        return Err(MarketDataError::Parse {
            line: line_no,
            msg: format!("expected 6 message columns, got {}", fields.len()),
        });
    }
    let timestamp_ns = parse_seconds_to_ns(fields[0], line_no)?;
    let event_type = parse_int(fields[1], "event type", line_no)?;
    let size = parse_int(fields[3], "size", line_no)?;
    if size <= 0 {
        return Err(MarketDataError::Parse {
            line: line_no,
            msg: format!("trade size must be positive, got {size}"),
        });
    }
    let price = parse_int(fields[4], "price", line_no)?;
    let direction = parse_int(fields[5], "direction", line_no)?;
    let direction = match direction {
        1 => 1i8,
        -1 => -1i8,
        other => return Err(MarketDataError::InvalidDirection(other)),
    };
    Ok(MessageRow {
        timestamp_ns,
        event_type,
        size: size as u64,
        price,
        direction,
    })
}

fn parse_book_mid(line: &str, line_no: usize) -> Result<i64, MarketDataError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 4 {
        return Err(MarketDataError::Parse {
            line: line_no,
            msg: format!("expected at least 4 orderbook columns, got {}", fields.len()),
        });
    }
    let ask = parse_int(fields[0], "ask price", line_no)?;
    let bid = parse_int(fields[2], "bid price", line_no)?;
    if ask < bid {
        return Err(MarketDataError::Parse {
            line: line_no,
            msg: format!("crossed book: ask {ask} < bid {bid}"),
        });
    }
    Ok((ask + bid) / 2)
}

fn parse_int(field: &str, what: &str, line_no: usize) -> Result<i64, MarketDataError> {
    field.parse::<i64>().map_err(|_| MarketDataError::Parse {
        line: line_no,
        msg: format!("invalid {what}: {field:?}"),
    })
}

/// Exact decimal-seconds → integer-nanoseconds conversion.
///
/// The fractional part is read digit-by-digit (padded or truncated to nine
/// digits) so timestamps never pass through floating point.
fn parse_seconds_to_ns(field: &str, line_no: usize) -> Result<i64, MarketDataError> {
    let bad = |msg: String| MarketDataError::Parse { line: line_no, msg };
    let (sec_part, frac_part) = match field.split_once('.') {
        Some((s, f)) => (s, f),
        None => (field, ""),
    };
    let secs: i64 = sec_part
        .parse()
        .map_err(|_| bad(format!("invalid timestamp: {field:?}")))?;
    if secs < 0 {
        return Err(bad(format!("negative timestamp: {field:?}")));
    }
    let mut nanos: i64 = 0;
    for (i, c) in frac_part.chars().enumerate() {
        if i >= 9 {
            break; // sub-nanosecond digits are beyond the clock resolution
        }
        let d = c
            .to_digit(10)
            .ok_or_else(|| bad(format!("invalid timestamp fraction: {field:?}")))?;
        nanos += i64::from(d) * 10i64.pow(8 - i as u32);
    }
    Ok(secs * 1_000_000_000 + nanos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const BOOK: &str = "3350100,200,3349900,300\n3350100,200,3349900,300\n3350100,100,3349900,300\n";

    #[test]
    fn parses_single_execution_with_quote_context() {
        let messages = "34200.000100000,1,11885113,100,3349900,1\n\
                        34200.189462828,4,11885113,100,3350000,1\n\
                        34200.500000000,3,11885113,100,3349900,-1\n";
        let report = parse_lobster(
            "AAA",
            Cursor::new(messages),
            Cursor::new(BOOK),
            ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(report.rejected, 0);
        assert_eq!(report.series.ticks.len(), 1);
        let t = &report.series.ticks[0];
        assert_eq!(t.timestamp_ns, 34_200_189_462_828);
        assert_eq!(t.direction, 1);
        assert_eq!(t.size, 100);
        assert_eq!(t.trade_price, 3_350_000);
        assert_eq!(t.mid_before, 3_350_000);
        assert_eq!(t.mid_after, 3_350_000);
    }

    #[test]
    fn rejects_execution_without_prior_quote() {
        let messages = "34200.1,4,1,100,3350000,1\n34200.2,1,2,50,3349900,1\n";
        let book = "3350100,200,3349900,300\n3350100,200,3349900,300\n";
        let report = parse_lobster(
            "AAA",
            Cursor::new(messages),
            Cursor::new(book),
            ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(report.rejected, 1);
        assert!(report.series.is_empty());
    }

    #[test]
    fn hidden_executions_can_be_filtered() {
        let messages = "34200.1,1,1,100,3350000,1\n\
                        34200.2,5,0,40,3350000,1\n\
                        34200.3,4,1,60,3350100,1\n";
        let keep = parse_lobster(
            "AAA",
            Cursor::new(messages),
            Cursor::new(BOOK),
            ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(keep.series.ticks.len(), 2);
        let drop = parse_lobster(
            "AAA",
            Cursor::new(messages),
            Cursor::new(BOOK),
            ParseOptions {
                include_hidden: false,
            },
        )
        .unwrap();
        assert_eq!(drop.series.ticks.len(), 1);
        assert_eq!(drop.series.ticks[0].size, 60);
    }

    #[test]
    fn decimal_seconds_convert_exactly() {
        assert_eq!(parse_seconds_to_ns("34200.189462828", 1).unwrap(), 34_200_189_462_828);
        assert_eq!(parse_seconds_to_ns("34200", 1).unwrap(), 34_200_000_000_000);
        assert_eq!(parse_seconds_to_ns("0.5", 1).unwrap(), 500_000_000);
    }

    #[test]
    fn decreasing_timestamps_are_an_error() {
        let messages = "34200.2,1,1,100,3350000,1\n34200.1,4,1,100,3350000,1\n";
        let book = "3350100,200,3349900,300\n3350100,200,3349900,300\n";
        let err = parse_lobster(
            "AAA",
            Cursor::new(messages),
            Cursor::new(book),
            ParseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, MarketDataError::UnsortedTimestamps { .. }));
    }

    #[test]
    fn direction_outside_sign_set_is_an_error() {
        let messages = "34200.1,4,1,100,3350000,2\n";
        let book = "3350100,200,3349900,300\n";
        let err = parse_lobster(
            "AAA",
            Cursor::new(messages),
            Cursor::new(book),
            ParseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, MarketDataError::InvalidDirection(2)));
    }
}
