//! Synthetic order flow with long-range sign autocorrelation.
//!
//! `M` metaorders trade concurrently: each has an i.i.d. random sign and a
//! power-law random length `L` with `P(L ≥ l) = l^{-a}`. Every step picks one
//! active metaorder uniformly at random, emits one child trade with its sign,
//! and replaces the metaorder by a fresh draw once exhausted. For
//! `1 < a < 2` the resulting sign autocorrelation decays like `τ^{-(a-1)}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{EventSeries, MarketDataError, TradeTick};

/// Flat synthetic midprice used for generated flow (the generator models
/// signs and sizes, not price formation).
const SYNTH_MID: i64 = 1_000_000;

/// Parameters of the concurrent-metaorder flow generator.
#[derive(Debug, Clone, PartialEq)]
pub struct LmfFlowParams {
    /// Number of concurrently active metaorders, `M ≥ 1`.
    pub n_metaorders: usize,
    /// Tail exponent `a > 1` of the metaorder length distribution.
    pub tail_exponent: f64,
    /// Number of child trades to emit.
    pub horizon: usize,
    /// Shares per child trade.
    pub child_size: u64,
    /// RNG seed; equal seeds give byte-identical series.
    pub seed: u64,
}

struct Metaorder {
    sign: i8,
    remaining: u64,
}

fn draw_metaorder(rng: &mut ChaCha12Rng, tail_exponent: f64) -> Metaorder {
    let sign = if rng.gen::<bool>() { 1i8 } else { -1i8 };
    // Inverse-transform sample of P(L ≥ l) = l^-a on integers l ≥ 1:
    // L = floor(U^(-1/a)). The cast saturates for astronomically small U.
    let mut u: f64 = rng.gen();
    while u == 0.0 {
        u = rng.gen();
    }
    let remaining = (u.powf(-1.0 / tail_exponent).floor() as u64).max(1);
    Metaorder { sign, remaining }
}

/// Generates a deterministic synthetic [`EventSeries`] of unit-spaced child
/// trades (one per nanosecond step) with long-memory signs.
pub fn synth_lmf_orderflow(params: &LmfFlowParams) -> Result<EventSeries, MarketDataError> {
    if params.n_metaorders == 0 {
        return Err(MarketDataError::EmptyMetaorderPool);
    }
    if !(params.tail_exponent > 1.0) {
        return Err(MarketDataError::TailExponentTooSmall(params.tail_exponent));
    }
    if params.horizon == 0 {
        return Err(MarketDataError::ZeroHorizon);
    }
    if params.child_size == 0 {
        return Err(MarketDataError::ZeroChildSize);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let mut pool: Vec<Metaorder> = (0..params.n_metaorders)
        .map(|_| draw_metaorder(&mut rng, params.tail_exponent))
        .collect();

    let mut ticks = Vec::with_capacity(params.horizon);
    for step in 0..params.horizon {
        let idx = rng.gen_range(0..pool.len());
        let sign = pool[idx].sign;
        pool[idx].remaining -= 1;
        if pool[idx].remaining == 0 {
            pool[idx] = draw_metaorder(&mut rng, params.tail_exponent);
        }
        ticks.push(TradeTick {
            timestamp_ns: step as i64,
            direction: sign,
            size: params.child_size,
            trade_price: SYNTH_MID,
            mid_before: SYNTH_MID,
            mid_after: SYNTH_MID,
        });
    }
    Ok(EventSeries::from_ticks(
        format!("synth-lmf-a{}", params.tail_exponent),
        ticks,
    ))
}
