//! Cross-exchange market making between a USD source venue and a BTC
//! downstream venue.
//!
//! Quotes on the downstream venue mirror the source book converted at the
//! BTC/USD rate and widened by a USD fee margin and a per-share put premium.
//! Downstream fills are hedged with source market orders on the opposite
//! outcome so the maker ends up holding a complete set across both venues.

mod hedge;
mod strategy;

pub use hedge::{
    execute_hedge, on_downstream_fill, on_unwind_fill, record_downstream_fill, settle_at_resolution, unwind,
    HedgeContext, HedgeState, HedgeStatus, Leg,
};
pub use strategy::{CrossMaker, CrossMmEvent, CrossMmParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{
    btc_to_usd_ceil, round_price, usd_to_btc, usd_to_btc_ceil, BtcAmount, BtcUsdRate, MoneyError, Side, TickSize,
    UsdAmount, MICROS_PER_USD, SATS_PER_BTC,
};
use crate::venue::VenueError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrossMmError {
    #[error("source quotes are not ordered: bid {bid} >= ask {ask}")]
    CrossedSource { bid: UsdAmount, ask: UsdAmount },
    #[error("degenerate quote: bid {bid_d} sat, ask {ask_d} sat")]
    Degenerate { bid_d: i64, ask_d: i64 },
    #[error("operation requires status {expected:?}, position is {actual:?}")]
    WrongStatus { expected: HedgeStatus, actual: HedgeStatus },
    #[error("fill does not belong to this position")]
    ForeignFill,
    #[error(transparent)]
    Money(#[from] MoneyError),
    #[error(transparent)]
    Venue(#[from] VenueError),
}

pub type CrossResult<T> = Result<T, CrossMmError>;

/// Downstream quote pair (satoshi per share) with the source quotes it was
/// mirrored from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuotePair {
    pub bid_d: i64,
    pub ask_d: i64,
    pub bid_s: UsdAmount,
    pub ask_s: UsdAmount,
    pub fee: UsdAmount,
    pub put_cost_per_share: BtcAmount,
}

/// Mirrors source quotes onto the BTC venue:
///
/// ```text
/// bid_d = round_down((bid_s - fee) / rate - put)
/// ask_d = round_up  ((ask_s + fee) / rate + put)
/// ```
pub fn mirror_quotes(
    bid_s: UsdAmount,
    ask_s: UsdAmount,
    fee: UsdAmount,
    put_premium: BtcAmount,
    rate: BtcUsdRate,
    tick: TickSize,
) -> CrossResult<QuotePair> {
    if bid_s >= ask_s {
        return Err(CrossMmError::CrossedSource { bid: bid_s, ask: ask_s });
    }
    let bid_raw = usd_to_btc(bid_s.checked_sub(fee)?, rate)?.checked_sub(put_premium)?;
    let ask_raw = usd_to_btc_ceil(ask_s.checked_add(fee)?, rate)?.checked_add(put_premium)?;
    let bid_d = round_price(bid_raw.0, tick, Side::Bid);
    let ask_d = round_price(ask_raw.0, tick, Side::Ask);
    if bid_d <= 0 || bid_d >= ask_d {
        return Err(CrossMmError::Degenerate { bid_d, ask_d });
    }
    Ok(QuotePair { bid_d, ask_d, bid_s, ask_s, fee, put_cost_per_share: put_premium })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum Arbitrage {
    Profitable { edge: UsdAmount },
    Unprofitable { total_cost: UsdAmount },
}

impl Arbitrage {
    pub fn is_profitable(&self) -> bool {
        matches!(self, Arbitrage::Profitable { .. })
    }
}

/// Complete-set cost check: `yes_ask_s + no_bid_d * rate + put_cost < $1`.
/// The BTC leg is valued rounding up so the check never overstates the edge.
pub fn check_arbitrage(
    yes_ask_s: UsdAmount,
    no_bid_d: BtcAmount,
    rate: BtcUsdRate,
    put_cost: UsdAmount,
) -> CrossResult<Arbitrage> {
    let total = yes_ask_s.checked_add(btc_to_usd_ceil(no_bid_d, rate)?)?.checked_add(put_cost)?;
    let edge = UsdAmount(MICROS_PER_USD).checked_sub(total)?;
    Ok(if edge.0 > 0 { Arbitrage::Profitable { edge } } else { Arbitrage::Unprofitable { total_cost: total } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HedgeNotional {
    /// Put notional equals the BTC paid for the downstream leg.
    #[default]
    Cost,
    /// Put notional equals the BTC the downstream leg pays if it wins.
    Payout,
}

/// European BTC put bought to protect the USD value of BTC-denominated legs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PutContract {
    pub strike: BtcUsdRate,
    pub notional: BtcAmount,
    pub premium: BtcAmount,
    pub expiry_tick: u64,
}

/// Payoff at expiry: `notional × max(strike − spot, 0)` in USD, floored.
pub fn put_payoff(put: &PutContract, spot: BtcUsdRate) -> CrossResult<UsdAmount> {
    let gap = put.strike.micros() - spot.micros();
    if gap <= 0 {
        return Ok(UsdAmount::ZERO);
    }
    let num = (put.notional.0 as i128).checked_mul(gap as i128).ok_or(MoneyError::Overflow)?;
    Ok(UsdAmount(crate::money::narrow(num.div_euclid(SATS_PER_BTC as i128))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn usd(s: &str) -> UsdAmount {
        UsdAmount::parse(s).unwrap()
    }

    fn r100k() -> BtcUsdRate {
        BtcUsdRate::from_usd(100_000).unwrap()
    }

    fn sat_tick() -> TickSize {
        TickSize::new(1).unwrap()
    }

    #[test]
    fn mirror_without_costs() {
        let q = mirror_quotes(usd("0.50"), usd("0.51"), UsdAmount::ZERO, BtcAmount::ZERO, r100k(), sat_tick()).unwrap();
        assert_eq!((q.bid_d, q.ask_d), (500, 510));
    }

    #[test]
    fn mirror_with_fee() {
        // (0.50 - 0.01) / 1e5 BTC = 490 sat, (0.51 + 0.01) / 1e5 = 520 sat
        let q = mirror_quotes(usd("0.50"), usd("0.51"), usd("0.01"), BtcAmount::ZERO, r100k(), sat_tick()).unwrap();
        assert_eq!((q.bid_d, q.ask_d), (490, 520));
    }

    #[test]
    fn mirror_with_put_and_tick() {
        let q = mirror_quotes(usd("0.49"), usd("0.51"), usd("0.008"), BtcAmount(2), r100k(), sat_tick()).unwrap();
        assert_eq!((q.bid_d, q.ask_d), (480, 520));
        let coarse =
            mirror_quotes(usd("0.49"), usd("0.51"), usd("0.008"), BtcAmount(2), r100k(), TickSize::new(10).unwrap())
                .unwrap();
        assert_eq!((coarse.bid_d, coarse.ask_d), (480, 520));
        let coarser =
            mirror_quotes(usd("0.49"), usd("0.51"), usd("0.001"), BtcAmount(2), r100k(), TickSize::new(25).unwrap())
                .unwrap();
        // raw bid 487, raw ask 513
        assert_eq!((coarser.bid_d, coarser.ask_d), (475, 525));
    }

    #[test]
    fn mirror_degenerate_bid() {
        let err =
            mirror_quotes(usd("0.005"), usd("0.51"), usd("0.01"), BtcAmount::ZERO, r100k(), sat_tick()).unwrap_err();
        assert!(matches!(err, CrossMmError::Degenerate { .. }));
        let err =
            mirror_quotes(usd("0.52"), usd("0.51"), UsdAmount::ZERO, BtcAmount::ZERO, r100k(), sat_tick()).unwrap_err();
        assert!(matches!(err, CrossMmError::CrossedSource { .. }));
    }

    #[test]
    fn arbitrage_examples() {
        let put = usd("0.002");
        assert_eq!(
            check_arbitrage(usd("0.51"), BtcAmount(480), r100k(), put).unwrap(),
            Arbitrage::Profitable { edge: usd("0.008") }
        );
        assert_eq!(
            check_arbitrage(usd("0.51"), BtcAmount(480), r100k(), UsdAmount::ZERO).unwrap(),
            Arbitrage::Profitable { edge: usd("0.01") }
        );
        assert_eq!(
            check_arbitrage(usd("0.51"), BtcAmount(490), r100k(), put).unwrap(),
            Arbitrage::Unprofitable { total_cost: usd("1.002") }
        );
        // exactly $1 is not an arbitrage
        assert!(!check_arbitrage(usd("0.51"), BtcAmount(490), r100k(), UsdAmount::ZERO).unwrap().is_profitable());
    }

    #[test]
    fn put_payoff_examples() {
        let put = PutContract { strike: r100k(), notional: BtcAmount(480), premium: BtcAmount(2), expiry_tick: 0 };
        assert_eq!(put_payoff(&put, BtcUsdRate::from_usd(80_000).unwrap()).unwrap(), usd("0.096"));
        assert_eq!(put_payoff(&put, r100k()).unwrap(), UsdAmount::ZERO);
        assert_eq!(put_payoff(&put, BtcUsdRate::from_usd(120_000).unwrap()).unwrap(), UsdAmount::ZERO);
    }

    proptest! {
        #[test]
        fn widening_never_narrows(
            bid in 1i64..999_999, spread in 1i64..500_000, fee in 0i64..100_000,
            put in 0i64..50, rate_usd in 1_000i64..1_000_000, tick in 1i64..20,
        ) {
            let bid_s = UsdAmount(bid);
            let ask_s = UsdAmount((bid + spread).min(999_999));
            prop_assume!(bid_s < ask_s);
            let rate = BtcUsdRate::from_usd(rate_usd).unwrap();
            let fee = UsdAmount(fee);
            if let Ok(q) = mirror_quotes(bid_s, ask_s, fee, BtcAmount(put), rate, TickSize::new(tick).unwrap()) {
                prop_assert!(q.bid_d <= usd_to_btc(bid_s - fee, rate).unwrap().0);
                prop_assert!(q.ask_d >= usd_to_btc(ask_s + fee, rate).unwrap().0);
                prop_assert!(q.bid_d > 0 && q.bid_d < q.ask_d);
                prop_assert!(q.bid_d % tick == 0 && q.ask_d % tick == 0);
            }
        }
    }
}
