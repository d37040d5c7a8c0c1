//! Trade-event ingestion and regression-ready order-flow preparation.
//!
//! The unit of data is the [`TradeTick`]: one execution with the prevailing
//! midprice immediately before and after it. Ticks are grouped in an
//! [`EventSeries`] per asset/session, cleaned by [`merge_same_timestamp`] and
//! [`clip_session`], and converted into aligned `(Δp, v)` samples by
//! [`price_changes`] under one of two timing conventions.

mod lmf;
mod lobster;

pub use lmf::{synth_lmf_orderflow, LmfFlowParams};
pub use lobster::{parse_lobster, ParseOptions, ParseReport};

use thiserror::Error;

/// Default session head/tail exclusion used by [`clip_session`]: 30 minutes.
pub const DEFAULT_CLIP_NS: i64 = 30 * 60 * 1_000_000_000;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: timestamps decrease ({prev} -> {cur})")]
    UnsortedTimestamps { line: usize, prev: i64, cur: i64 },
    #[error("message and orderbook files have different row counts")]
    RowCountMismatch,
    #[error("trade direction must be -1 or +1, got {0}")]
    InvalidDirection(i64),
    #[error("need at least two ticks to form price changes, got {0}")]
    InsufficientTicks(usize),
    #[error("metaorder pool size must be at least 1")]
    EmptyMetaorderPool,
    #[error("metaorder length tail exponent must exceed 1, got {0}")]
    TailExponentTooSmall(f64),
    #[error("flow horizon must be at least 1 step")]
    ZeroHorizon,
    #[error("child size must be positive")]
    ZeroChildSize,
}

/// One execution event.
///
/// Prices are integers in 1e-4 currency units; `timestamp_ns` is integer
/// nanoseconds since the session reference point. `direction` is `+1` for a
/// buyer-initiated trade and `-1` for a seller-initiated one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeTick {
    pub timestamp_ns: i64,
    pub direction: i8,
    pub size: u64,
    pub trade_price: i64,
    pub mid_before: i64,
    pub mid_after: i64,
}

impl TradeTick {
    /// Signed volume `direction × size` in shares.
    pub fn signed_volume(&self) -> f64 {
        f64::from(self.direction) * self.size as f64
    }
}

/// A sorted series of executions for one asset over one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSeries {
    pub asset_id: String,
    pub ticks: Vec<TradeTick>,
    pub session_start_ns: i64,
    pub session_end_ns: i64,
}

impl EventSeries {
    /// Builds a series whose session bounds are taken from the first/last
    /// tick (both 0 when empty). Ticks must be sorted by timestamp.
    pub fn from_ticks(asset_id: impl Into<String>, ticks: Vec<TradeTick>) -> Self {
        let session_start_ns = ticks.first().map_or(0, |t| t.timestamp_ns);
        let session_end_ns = ticks.last().map_or(0, |t| t.timestamp_ns);
        EventSeries {
            asset_id: asset_id.into(),
            ticks,
            session_start_ns,
            session_end_ns,
        }
    }

    /// Same as [`EventSeries::from_ticks`] but with explicit session bounds
    /// (useful when the tape does not span the full trading session).
    pub fn with_session_bounds(mut self, start_ns: i64, end_ns: i64) -> Self {
        self.session_start_ns = start_ns;
        self.session_end_ns = end_ns;
        self
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }
}

/// Timing convention pairing a midprice change with a trade.
///
/// * `PostTrade`: `Δp_t = mid_after(t) − mid_after(t−1)`, paired with the
///   volume of trade `t` — the price change *up to and including* trade `t`.
/// * `PreTrade`: `Δp_t = mid_before(t+1) − mid_before(t)`, paired with the
///   volume of trade `t` — the price change *caused by* trade `t` as seen
///   just before the next trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceConvention {
    PostTrade,
    PreTrade,
}

impl PriceConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            PriceConvention::PostTrade => "post-trade",
            PriceConvention::PreTrade => "pre-trade",
        }
    }
}

/// Aligned `(Δp_t, v_t)` samples ready for least-squares calibration.
///
/// `dp` is in 1e-4 currency units, `v` in signed shares; the two vectors
/// always have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    pub dp: Vec<f64>,
    pub v: Vec<f64>,
    pub convention: PriceConvention,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.dp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dp.is_empty()
    }
}

/// Collapses consecutive ticks that share both timestamp and direction into
/// one tick: sizes add, `mid_before` comes from the first constituent,
/// `mid_after` and the trade price from the last.
///
/// Ticks at the same nanosecond with *opposite* signs are left untouched.
/// The operation is idempotent.
pub fn merge_same_timestamp(series: &EventSeries) -> EventSeries {
    let mut merged: Vec<TradeTick> = Vec::with_capacity(series.ticks.len());
    for tick in &series.ticks {
        match merged.last_mut() {
            Some(last)
                if last.timestamp_ns == tick.timestamp_ns
                    && last.direction == tick.direction =>
            {
                last.size += tick.size;
                last.mid_after = tick.mid_after;
                last.trade_price = tick.trade_price;
            }
            _ => merged.push(tick.clone()),
        }
    }
    EventSeries {
        asset_id: series.asset_id.clone(),
        ticks: merged,
        session_start_ns: series.session_start_ns,
        session_end_ns: series.session_end_ns,
    }
}

/// Result of [`clip_session`]: the clipped series plus a warning flag that is
/// set when the clip window is degenerate or removed every tick.
#[derive(Debug, Clone)]
pub struct ClippedSeries {
    pub series: EventSeries,
    pub empty_window: bool,
}

/// Drops ticks within `head_ns` of the session start and `tail_ns` of the
/// session end (both default to 30 minutes via [`DEFAULT_CLIP_NS`]).
///
/// Ticks exactly on the clip boundaries are retained. Session bounds of the
/// returned series are tightened to the clip window.
pub fn clip_session(series: &EventSeries, head_ns: i64, tail_ns: i64) -> ClippedSeries {
    let lo = series.session_start_ns + head_ns;
    let hi = series.session_end_ns - tail_ns;
    let ticks: Vec<TradeTick> = series
        .ticks
        .iter()
        .filter(|t| t.timestamp_ns >= lo && t.timestamp_ns <= hi)
        .cloned()
        .collect();
    let empty_window = hi < lo || ticks.is_empty();
    ClippedSeries {
        series: EventSeries {
            asset_id: series.asset_id.clone(),
            ticks,
            session_start_ns: lo,
            session_end_ns: hi.max(lo),
        },
        empty_window,
    }
}

/// Converts an event series into aligned `(Δp, v)` samples under the given
/// timing convention. Requires at least two ticks; the output always has
/// `series.len() − 1` samples.
pub fn price_changes(
    series: &EventSeries,
    convention: PriceConvention,
) -> Result<RegressionDataset, MarketDataError> {
    let n = series.ticks.len();
    if n < 2 {
        return Err(MarketDataError::InsufficientTicks(n));
    }
    let mut dp = Vec::with_capacity(n - 1);
    let mut v = Vec::with_capacity(n - 1);
    match convention {
        PriceConvention::PostTrade => {
            // Sample t pairs the move into trade t's post-trade mid with
            // trade t's own volume, t = 1..n-1.
            for t in 1..n {
                dp.push((series.ticks[t].mid_after - series.ticks[t - 1].mid_after) as f64);
                v.push(series.ticks[t].signed_volume());
            }
        }
        PriceConvention::PreTrade => {
            // Sample t pairs the move between successive pre-trade mids with
            // the volume of the earlier trade, t = 0..n-2.
            for t in 0..n - 1 {
                dp.push((series.ticks[t + 1].mid_before - series.ticks[t].mid_before) as f64);
                v.push(series.ticks[t].signed_volume());
            }
        }
    }
    Ok(RegressionDataset { dp, v, convention })
}
