//! Per-fill hedge lifecycle: downstream fill → source hedge → hold or unwind.
//!
//! Each downstream fill opens one [`HedgeState`]. USD accounting is done at
//! the time of each cash flow: BTC spent or received is valued at the rate
//! passed in the [`HedgeContext`] for that call.

use serde::Serialize;

use super::{put_payoff, CrossMmError, CrossResult, HedgeNotional, PutContract};
use crate::money::{
    btc_to_usd, btc_to_usd_ceil, notional, BtcAmount, BtcUsdRate, Shares, Side, UsdAmount, MICROS_PER_USD,
};
use crate::venue::{Denom, Fill, OrderId, Outcome, OwnerId, Venue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeStatus {
    Quoting,
    AwaitingHedge,
    Hedged,
    Unwinding,
    Flat,
    HedgeFailed,
}

/// Shares of one outcome held on one venue and what they cost in the
/// venue's native unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Leg {
    pub outcome: Outcome,
    pub size: Shares,
    pub cost: i64,
}

impl Leg {
    /// Average cost per whole share, floored.
    pub fn price(&self) -> i64 {
        if self.size.0 == 0 {
            return 0;
        }
        (self.cost as i128 * crate::money::MICROS_PER_SHARE as i128 / self.size.0 as i128) as i64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HedgeContext {
    pub maker: OwnerId,
    pub rate: BtcUsdRate,
    /// Put premium per share, BTC.
    pub put_premium: BtcAmount,
    pub hedge_notional: HedgeNotional,
    /// Extra hedge attempts allowed after a partial source fill.
    pub max_retries: u32,
    pub expiry_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HedgeState {
    pub id: u64,
    pub status: HedgeStatus,
    pub downstream_leg: Option<Leg>,
    pub source_leg: Option<Leg>,
    pub put: Option<PutContract>,
    /// USD spent on entry: both legs, venue fees and the put premium.
    pub entry_cost_usd: UsdAmount,
    /// `$1 × sets − entry_cost_usd`, set once hedged.
    pub locked_edge: Option<UsdAmount>,
    pub hedge_attempts: u32,
    pub exit_order: Option<OrderId>,
    pub exited: Shares,
    pub exit_proceeds_usd: UsdAmount,
    pub realized_pnl: Option<UsdAmount>,
}

impl HedgeState {
    pub fn quoting(id: u64) -> Self {
        Self {
            id,
            status: HedgeStatus::Quoting,
            downstream_leg: None,
            source_leg: None,
            put: None,
            entry_cost_usd: UsdAmount::ZERO,
            locked_edge: None,
            hedge_attempts: 0,
            exit_order: None,
            exited: Shares::ZERO,
            exit_proceeds_usd: UsdAmount::ZERO,
            realized_pnl: None,
        }
    }

    pub fn pending_hedge(&self) -> Shares {
        let d = self.downstream_leg.map_or(Shares::ZERO, |l| l.size);
        let s = self.source_leg.map_or(Shares::ZERO, |l| l.size);
        d - s
    }

    /// Complete sets held across the two venues.
    pub fn sets(&self) -> Shares {
        self.source_leg.map_or(Shares::ZERO, |l| l.size)
    }

    fn expect(&self, status: HedgeStatus) -> CrossResult<()> {
        if self.status != status {
            return Err(CrossMmError::WrongStatus { expected: status, actual: self.status });
        }
        Ok(())
    }
}

fn native_to_usd(denom: Denom, amount: i64, rate: BtcUsdRate, round_up: bool) -> CrossResult<UsdAmount> {
    Ok(match denom {
        Denom::Usd => UsdAmount(amount),
        Denom::Btc if round_up => btc_to_usd_ceil(BtcAmount(amount), rate)?,
        Denom::Btc => btc_to_usd(BtcAmount(amount), rate)?,
    })
}

fn sets_value(sets: Shares) -> CrossResult<UsdAmount> {
    Ok(UsdAmount(notional(MICROS_PER_USD, sets, false)?))
}

/// Books a downstream fill against the maker. A bid fill leaves the maker
/// long the filled outcome. An ask fill is covered by minting complete sets
/// so the maker is long the other outcome at `payout_unit − price`.
pub fn record_downstream_fill(
    mut state: HedgeState,
    fill: &Fill,
    downstream: &mut Venue,
    ctx: &HedgeContext,
) -> CrossResult<HedgeState> {
    state.expect(HedgeStatus::Quoting)?;
    if fill.maker != ctx.maker {
        return Err(CrossMmError::ForeignFill);
    }
    let paid = notional(fill.price, fill.size, true)?;
    let leg = match fill.taker_side {
        // taker sold into our bid
        Side::Ask => Leg { outcome: fill.outcome, size: fill.size, cost: paid },
        Side::Bid => {
            let mint_cost = downstream.mint_sets(ctx.maker, fill.size)?;
            Leg { outcome: fill.outcome.opposite(), size: fill.size, cost: mint_cost - paid }
        }
    };
    state.entry_cost_usd += native_to_usd(downstream.denom, leg.cost, ctx.rate, true)?;
    state.downstream_leg = Some(leg);
    state.status = HedgeStatus::AwaitingHedge;
    Ok(state)
}

/// Buys the opposite outcome on the source venue for whatever is still
/// unhedged. Full fill → `Hedged`; partial → `AwaitingHedge` until the
/// retry budget runs out, then `HedgeFailed`.
pub fn execute_hedge(
    mut state: HedgeState,
    source: &mut Venue,
    downstream_denom: Denom,
    downstream_unit: i64,
    ctx: &HedgeContext,
) -> CrossResult<HedgeState> {
    state.expect(HedgeStatus::AwaitingHedge)?;
    let down = state.downstream_leg.expect("awaiting hedge implies a downstream leg");
    let want = state.pending_hedge();
    let hedge_outcome = down.outcome.opposite();
    let exec = source.execute_market(ctx.maker, hedge_outcome, Side::Bid, want)?;
    if exec.filled.0 > 0 {
        let src = state.source_leg.get_or_insert(Leg { outcome: hedge_outcome, size: Shares::ZERO, cost: 0 });
        src.size += exec.filled;
        src.cost += exec.notional + exec.fees;
        state.entry_cost_usd += native_to_usd(source.denom, exec.notional + exec.fees, ctx.rate, true)?;
    }
    state.hedge_attempts += 1;
    if state.pending_hedge().0 == 0 {
        if downstream_denom == Denom::Btc && ctx.put_premium.0 > 0 {
            let notional_btc = match ctx.hedge_notional {
                HedgeNotional::Cost => BtcAmount(down.cost),
                HedgeNotional::Payout => BtcAmount(notional(downstream_unit, down.size, false)?),
            };
            let premium = BtcAmount(notional(ctx.put_premium.0, down.size, true)?);
            state.entry_cost_usd += btc_to_usd_ceil(premium, ctx.rate)?;
            state.put =
                Some(PutContract { strike: ctx.rate, notional: notional_btc, premium, expiry_tick: ctx.expiry_tick });
        }
        state.locked_edge = Some(sets_value(state.sets())?.checked_sub(state.entry_cost_usd)?);
        state.status = HedgeStatus::Hedged;
    } else if state.hedge_attempts > ctx.max_retries {
        state.status = HedgeStatus::HedgeFailed;
    }
    Ok(state)
}

/// Records the fill and hedges immediately (zero hedge delay).
pub fn on_downstream_fill(
    state: HedgeState,
    fill: &Fill,
    downstream: &mut Venue,
    source: &mut Venue,
    ctx: &HedgeContext,
) -> CrossResult<HedgeState> {
    let state = record_downstream_fill(state, fill, downstream, ctx)?;
    execute_hedge(state, source, downstream.denom, downstream.payout_unit, ctx)
}

/// Posts the downstream exit: an ask for the held downstream outcome at
/// `exit_price`.
pub fn unwind(
    mut state: HedgeState,
    downstream: &mut Venue,
    source: &mut Venue,
    exit_price: i64,
    ctx: &HedgeContext,
) -> CrossResult<HedgeState> {
    state.expect(HedgeStatus::Hedged)?;
    let leg = state.downstream_leg.expect("hedged implies a downstream leg");
    let placement = downstream.place_limit(ctx.maker, leg.outcome, Side::Ask, exit_price, leg.size - state.exited)?;
    state.exit_order = Some(placement.order_id);
    state.status = HedgeStatus::Unwinding;
    // crossing part of the exit is handled like any later fill
    for f in &placement.fills {
        state = on_unwind_fill(state, f, downstream.denom, source, ctx)?;
    }
    Ok(state)
}

/// Processes a fill of the downstream exit order and sells the matching
/// source shares at market.
pub fn on_unwind_fill(
    state: HedgeState,
    fill: &Fill,
    downstream_denom: Denom,
    source: &mut Venue,
    ctx: &HedgeContext,
) -> CrossResult<HedgeState> {
    let mut state = state;
    if state.exit_order != Some(fill.order_id) {
        return Err(CrossMmError::ForeignFill);
    }
    state.expect(HedgeStatus::Unwinding)?;
    let src_leg = state.source_leg.expect("unwinding implies a source leg");
    let received = notional(fill.price, fill.size, false)?;
    state.exit_proceeds_usd += native_to_usd(downstream_denom, received, ctx.rate, false)?;
    state.exited += fill.size;
    let exec = source.execute_market(ctx.maker, src_leg.outcome, Side::Ask, fill.size)?;
    state.exit_proceeds_usd += native_to_usd(source.denom, exec.notional - exec.fees, ctx.rate, false)?;
    if exec.unfilled.0 > 0 {
        state.status = HedgeStatus::HedgeFailed;
        return Ok(state);
    }
    if state.exited == src_leg.size {
        state.status = HedgeStatus::Flat;
        state.realized_pnl = Some(state.exit_proceeds_usd.checked_sub(state.entry_cost_usd)?);
    }
    Ok(state)
}

/// USD PnL of holding the hedged set to resolution: payout of the winning
/// leg (BTC legs valued at `spot`) plus the put payoff, minus entry cost.
pub fn settle_at_resolution(
    state: &HedgeState,
    winner: Outcome,
    spot: BtcUsdRate,
    downstream_denom: Denom,
    downstream_unit: i64,
) -> CrossResult<UsdAmount> {
    let mut value = UsdAmount::ZERO;
    if let Some(src) = state.source_leg {
        if src.outcome == winner {
            value += sets_value(src.size - state.exited.min(src.size))?;
        }
    }
    if let Some(down) = state.downstream_leg {
        if down.outcome == winner {
            let held = down.size - state.exited.min(down.size);
            value += native_to_usd(downstream_denom, notional(downstream_unit, held, false)?, spot, false)?;
        }
    }
    if let Some(put) = &state.put {
        value += put_payoff(put, spot)?;
    }
    Ok(value.checked_add(state.exit_proceeds_usd)?.checked_sub(state.entry_cost_usd)?)
}
