//! Quote management and position bookkeeping for one cross-venue maker.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    check_arbitrage, execute_hedge, mirror_quotes, on_unwind_fill, record_downstream_fill, settle_at_resolution,
    unwind, Arbitrage, CrossMmError, CrossResult, HedgeContext, HedgeNotional, HedgeState, HedgeStatus, QuotePair,
};
use crate::money::{btc_to_usd_ceil, BtcAmount, BtcUsdRate, Shares, Side, TickSize, UsdAmount};
use crate::venue::{Fill, OrderId, Outcome, OwnerId, Venue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossMmParams {
    /// USD margin added on each side of the mirrored quote.
    pub fee: UsdAmount,
    /// Put premium per share.
    pub put_premium: BtcAmount,
    pub hedge_notional: HedgeNotional,
    pub quote_size: Shares,
    /// Downstream outcomes to quote.
    pub quote_outcomes: Vec<Outcome>,
    pub max_retries: u32,
    /// Ticks between a downstream fill and the source hedge.
    pub hedge_delay: u64,
    pub tick: TickSize,
    pub expiry_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CrossMmEvent {
    Quote {
        tick: u64,
        outcome: crate::venue::Outcome,
        bid_d: Option<i64>,
        ask_d: Option<i64>,
        bid_s: UsdAmount,
        ask_s: UsdAmount,
    },
    QuoteSuppressed {
        tick: u64,
        outcome: Outcome,
        side: Side,
        reason: String,
    },
    Fill {
        tick: u64,
        position: u64,
        outcome: Outcome,
        taker_side: Side,
        price: i64,
        size: Shares,
    },
    Hedge {
        tick: u64,
        position: u64,
        status: HedgeStatus,
        hedged: Shares,
        locked_edge: Option<UsdAmount>,
    },
    HedgeFailed {
        tick: u64,
        position: u64,
        unhedged: Shares,
    },
    UnwindPosted {
        tick: u64,
        position: u64,
        price: i64,
    },
    Unwound {
        tick: u64,
        position: u64,
        pnl: UsdAmount,
    },
    Settled {
        tick: u64,
        position: u64,
        pnl: UsdAmount,
    },
}

/// What the last posted quote for an outcome was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct QuoteInputs {
    bid_s: i64,
    ask_s: i64,
    hedge_for_bid: Option<i64>,
    hedge_for_ask: Option<i64>,
    rate: BtcUsdRate,
}

#[derive(Debug, Clone)]
struct Posted {
    inputs: QuoteInputs,
    bid: Option<OrderId>,
    ask: Option<OrderId>,
}

#[derive(Debug, Clone)]
pub struct CrossMaker {
    pub owner: OwnerId,
    pub params: CrossMmParams,
    pub positions: Vec<HedgeState>,
    posted: BTreeMap<Outcome, Posted>,
    /// (position index, due tick)
    pending: Vec<(usize, u64)>,
    halted: bool,
    /// USD tied up per $1 of hedged depth at the first profitable bid.
    capital_per_set: Option<UsdAmount>,
    settled: Option<UsdAmount>,
}

impl CrossMaker {
    pub fn new(owner: OwnerId, params: CrossMmParams) -> Self {
        Self {
            owner,
            params,
            positions: Vec::new(),
            posted: BTreeMap::new(),
            pending: Vec::new(),
            halted: false,
            capital_per_set: None,
            settled: None,
        }
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn capital_per_set(&self) -> Option<UsdAmount> {
        self.capital_per_set
    }

    fn ctx(&self, rate: BtcUsdRate) -> HedgeContext {
        HedgeContext {
            maker: self.owner,
            rate,
            put_premium: self.params.put_premium,
            hedge_notional: self.params.hedge_notional,
            max_retries: self.params.max_retries,
            expiry_tick: self.params.expiry_tick,
        }
    }

    fn put_cost(&self, rate: BtcUsdRate) -> CrossResult<UsdAmount> {
        Ok(btc_to_usd_ceil(self.params.put_premium, rate)?)
    }

    /// Current quote pair for `outcome`, if the source book supports one.
    pub fn quote_for(&self, source: &Venue, outcome: Outcome, rate: BtcUsdRate) -> Option<CrossResult<QuotePair>> {
        let book = source.book(outcome);
        let (bid, ask) = (book.best_bid()?, book.best_ask()?);
        Some(mirror_quotes(
            UsdAmount(bid),
            UsdAmount(ask),
            self.params.fee,
            self.params.put_premium,
            rate,
            self.params.tick,
        ))
    }

    /// Re-posts downstream quotes whose inputs moved or whose orders were
    /// consumed. A side is only quoted when its hedge is a profitable
    /// complete set. Crossing fills on placement are processed immediately.
    pub fn refresh_quotes(
        &mut self,
        tick: u64,
        source: &mut Venue,
        downstream: &mut Venue,
        rate: BtcUsdRate,
    ) -> CrossResult<Vec<CrossMmEvent>> {
        let mut events = Vec::new();
        if self.halted {
            return Ok(events);
        }
        for outcome in self.params.quote_outcomes.clone() {
            let src = source.book(outcome);
            let (Some(bid_s), Some(ask_s)) = (src.best_bid(), src.best_ask()) else {
                self.pull(outcome, downstream);
                continue;
            };
            let inputs = QuoteInputs {
                bid_s,
                ask_s,
                hedge_for_bid: source.book(outcome.opposite()).best_ask(),
                hedge_for_ask: src.best_ask(),
                rate,
            };
            if let Some(p) = self.posted.get(&outcome) {
                let live = |id: Option<OrderId>| id.is_none_or(|id| downstream.find_order(id).is_some());
                if p.inputs == inputs && live(p.bid) && live(p.ask) {
                    continue;
                }
            }
            self.pull(outcome, downstream);
            let pair = match mirror_quotes(
                UsdAmount(bid_s),
                UsdAmount(ask_s),
                self.params.fee,
                self.params.put_premium,
                rate,
                self.params.tick,
            ) {
                Ok(p) => p,
                Err(CrossMmError::Degenerate { bid_d, ask_d }) => {
                    for side in [Side::Bid, Side::Ask] {
                        events.push(CrossMmEvent::QuoteSuppressed {
                            tick,
                            outcome,
                            side,
                            reason: format!("degenerate quote {bid_d}/{ask_d}"),
                        });
                    }
                    self.posted.insert(outcome, Posted { inputs, bid: None, ask: None });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let put_cost = self.put_cost(rate)?;
            let unit = downstream.payout_unit;

            let bid_ok = match inputs.hedge_for_bid {
                Some(h) if pair.bid_d < unit => check_arbitrage(UsdAmount(h), BtcAmount(pair.bid_d), rate, put_cost)?,
                _ => Arbitrage::Unprofitable { total_cost: UsdAmount::ZERO },
            };
            // selling `outcome` at ask_d is covered by minting, leaving the
            // other outcome at unit - ask_d; the hedge buys `outcome` back
            let ask_ok = match inputs.hedge_for_ask {
                Some(h) if pair.ask_d < unit => {
                    check_arbitrage(UsdAmount(h), BtcAmount(unit - pair.ask_d), rate, put_cost)?
                }
                _ => Arbitrage::Unprofitable { total_cost: UsdAmount::ZERO },
            };

            let mut posted = Posted { inputs, bid: None, ask: None };
            let mut fills = Vec::new();
            if bid_ok.is_profitable() {
                let pl = downstream.place_limit(self.owner, outcome, Side::Bid, pair.bid_d, self.params.quote_size)?;
                posted.bid = (pl.resting.0 > 0).then_some(pl.order_id);
                fills.extend(pl.fills);
                if self.capital_per_set.is_none() {
                    let hedge = UsdAmount(inputs.hedge_for_bid.unwrap_or_default());
                    self.capital_per_set = Some(btc_to_usd_ceil(BtcAmount(pair.bid_d), rate)? + hedge + put_cost);
                }
            } else {
                events.push(CrossMmEvent::QuoteSuppressed {
                    tick,
                    outcome,
                    side: Side::Bid,
                    reason: suppress_reason(&bid_ok),
                });
            }
            if ask_ok.is_profitable() {
                let pl = downstream.place_limit(self.owner, outcome, Side::Ask, pair.ask_d, self.params.quote_size)?;
                posted.ask = (pl.resting.0 > 0).then_some(pl.order_id);
                fills.extend(pl.fills);
            } else {
                events.push(CrossMmEvent::QuoteSuppressed {
                    tick,
                    outcome,
                    side: Side::Ask,
                    reason: suppress_reason(&ask_ok),
                });
            }
            events.push(CrossMmEvent::Quote {
                tick,
                outcome,
                bid_d: bid_ok.is_profitable().then_some(pair.bid_d),
                ask_d: ask_ok.is_profitable().then_some(pair.ask_d),
                bid_s: pair.bid_s,
                ask_s: pair.ask_s,
            });
            self.posted.insert(outcome, posted);
            for f in fills {
                // the maker was the taker here; book it as if the resting
                // counterparty had hit our quote
                let as_maker = Fill { maker: self.owner, taker: f.maker, taker_side: f.taker_side.opposite(), ..f };
                events.extend(self.on_fill(tick, &as_maker, source, downstream, rate)?);
            }
        }
        Ok(events)
    }

    fn pull(&mut self, outcome: Outcome, downstream: &mut Venue) {
        if let Some(p) = self.posted.remove(&outcome) {
            for id in [p.bid, p.ask].into_iter().flatten() {
                downstream.cancel(id);
            }
        }
    }

    fn pull_all(&mut self, downstream: &mut Venue) {
        let outcomes: Vec<_> = self.posted.keys().copied().collect();
        for o in outcomes {
            self.pull(o, downstream);
        }
    }

    /// Handles a downstream fill against one of our orders: either an exit
    /// order of an unwinding position or a quote, which opens a position.
    pub fn on_fill(
        &mut self,
        tick: u64,
        fill: &Fill,
        source: &mut Venue,
        downstream: &mut Venue,
        rate: BtcUsdRate,
    ) -> CrossResult<Vec<CrossMmEvent>> {
        let mut events = Vec::new();
        if fill.maker != self.owner {
            return Ok(events);
        }
        let ctx = self.ctx(rate);
        if let Some(i) = self
            .positions
            .iter()
            .position(|p| p.exit_order == Some(fill.order_id) && p.status == HedgeStatus::Unwinding)
        {
            let st = on_unwind_fill(self.positions[i].clone(), fill, downstream.denom, source, &ctx)?;
            if let Some(pnl) = st.realized_pnl {
                events.push(CrossMmEvent::Unwound { tick, position: st.id, pnl });
            }
            if st.status == HedgeStatus::HedgeFailed {
                events.push(CrossMmEvent::HedgeFailed { tick, position: st.id, unhedged: st.sets() - st.exited });
            }
            self.positions[i] = st;
            return Ok(events);
        }
        let id = self.positions.len() as u64 + 1;
        let st = record_downstream_fill(HedgeState::quoting(id), fill, downstream, &ctx)?;
        events.push(CrossMmEvent::Fill {
            tick,
            position: id,
            outcome: fill.outcome,
            taker_side: fill.taker_side,
            price: fill.price,
            size: fill.size,
        });
        self.positions.push(st);
        let idx = self.positions.len() - 1;
        if self.params.hedge_delay == 0 {
            events.extend(self.hedge(idx, tick, source, downstream, rate)?);
        } else {
            self.pending.push((idx, tick + self.params.hedge_delay));
        }
        Ok(events)
    }

    fn hedge(
        &mut self,
        idx: usize,
        tick: u64,
        source: &mut Venue,
        downstream: &mut Venue,
        rate: BtcUsdRate,
    ) -> CrossResult<Vec<CrossMmEvent>> {
        let ctx = self.ctx(rate);
        let st = execute_hedge(self.positions[idx].clone(), source, downstream.denom, downstream.payout_unit, &ctx)?;
        let mut events = vec![CrossMmEvent::Hedge {
            tick,
            position: st.id,
            status: st.status,
            hedged: st.sets(),
            locked_edge: st.locked_edge,
        }];
        if st.status == HedgeStatus::HedgeFailed {
            events.push(CrossMmEvent::HedgeFailed { tick, position: st.id, unhedged: st.pending_hedge() });
            self.halted = true;
            self.pull_all(downstream);
        }
        self.positions[idx] = st;
        Ok(events)
    }

    /// Executes hedges that are due, and retries partial ones.
    pub fn process_pending(
        &mut self,
        tick: u64,
        source: &mut Venue,
        downstream: &mut Venue,
        rate: BtcUsdRate,
    ) -> CrossResult<Vec<CrossMmEvent>> {
        let mut events = Vec::new();
        let due: Vec<usize> = self.pending.iter().filter(|(_, t)| *t <= tick).map(|(i, _)| *i).collect();
        self.pending.retain(|(_, t)| *t > tick);
        let retry: Vec<usize> = (0..self.positions.len())
            .filter(|i| {
                self.positions[*i].status == HedgeStatus::AwaitingHedge
                    && self.positions[*i].hedge_attempts > 0
                    && !due.contains(i)
            })
            .collect();
        for idx in due.into_iter().chain(retry) {
            if self.positions[idx].status == HedgeStatus::AwaitingHedge {
                events.extend(self.hedge(idx, tick, source, downstream, rate)?);
            }
        }
        Ok(events)
    }

    /// Posts exits for every hedged position at the current mirrored ask of
    /// the held downstream outcome.
    pub fn begin_unwind(
        &mut self,
        tick: u64,
        source: &mut Venue,
        downstream: &mut Venue,
        rate: BtcUsdRate,
    ) -> CrossResult<Vec<CrossMmEvent>> {
        let mut events = Vec::new();
        self.pull_all(downstream);
        self.halted = true;
        let ctx = self.ctx(rate);
        for i in 0..self.positions.len() {
            if self.positions[i].status != HedgeStatus::Hedged {
                continue;
            }
            let held = self.positions[i].downstream_leg.expect("hedged").outcome;
            let Some(Ok(pair)) = self.quote_for(source, held, rate) else { continue };
            let price = pair.ask_d.min(downstream.payout_unit - downstream.tick.get());
            let st = unwind(self.positions[i].clone(), downstream, source, price, &ctx)?;
            events.push(CrossMmEvent::UnwindPosted { tick, position: st.id, price });
            if let Some(pnl) = st.realized_pnl {
                events.push(CrossMmEvent::Unwound { tick, position: st.id, pnl });
            }
            self.positions[i] = st;
        }
        Ok(events)
    }

    /// Cancels the maker's downstream orders.
    pub fn stop(&mut self, downstream: &mut Venue) {
        self.halted = true;
        self.pull_all(downstream);
        for p in &mut self.positions {
            if let (HedgeStatus::Unwinding, Some(id)) = (p.status, p.exit_order) {
                downstream.cancel(id);
            }
        }
    }

    /// Marks every position to the resolved outcome. Flat positions keep
    /// their realized PnL. Returns the total.
    pub fn settle(
        &mut self,
        tick: u64,
        winner: Outcome,
        spot: BtcUsdRate,
        downstream: &Venue,
    ) -> CrossResult<(UsdAmount, Vec<CrossMmEvent>)> {
        let mut total = UsdAmount::ZERO;
        let mut events = Vec::new();
        for p in &self.positions {
            let pnl = match p.realized_pnl {
                Some(r) => r,
                None => settle_at_resolution(p, winner, spot, downstream.denom, downstream.payout_unit)?,
            };
            events.push(CrossMmEvent::Settled { tick, position: p.id, pnl });
            total += pnl;
        }
        self.settled = Some(total);
        Ok((total, events))
    }

    pub fn settled_pnl(&self) -> Option<UsdAmount> {
        self.settled
    }

    /// Edge locked in across hedged positions.
    pub fn locked_edge(&self) -> UsdAmount {
        self.positions.iter().filter_map(|p| p.locked_edge).sum()
    }

    pub fn hedged_sets(&self) -> Shares {
        self.positions.iter().map(|p| p.sets()).sum()
    }
}

fn suppress_reason(a: &Arbitrage) -> String {
    match a {
        Arbitrage::Unprofitable { total_cost } if total_cost.0 > 0 => format!("set cost {total_cost} leaves no edge"),
        _ => "no hedge liquidity or quote at payout".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::money::Frac;

    const MAKER: OwnerId = OwnerId(1);
    const USER: OwnerId = OwnerId(2);
    const BOOK: OwnerId = OwnerId(3);

    fn usd(s: &str) -> i64 {
        UsdAmount::parse(s).unwrap().0
    }

    fn sh(n: i64) -> Shares {
        Shares::from_whole(n).unwrap()
    }

    fn rate(u: i64) -> BtcUsdRate {
        BtcUsdRate::from_usd(u).unwrap()
    }

    fn setup() -> (Venue, Venue, CrossMaker) {
        let mut source = Venue::usd("src", TickSize::new(usd("0.01")).unwrap(), Frac::zero());
        for o in [Outcome::Yes, Outcome::No] {
            source.place_limit(BOOK, o, Side::Bid, usd("0.49"), sh(1000)).unwrap();
            source.place_limit(BOOK, o, Side::Ask, usd("0.51"), sh(1000)).unwrap();
        }
        let down = Venue::btc("dst", TickSize::new(1).unwrap(), Frac::zero(), rate(100_000)).unwrap();
        let params = CrossMmParams {
            fee: UsdAmount(usd("0.008")),
            put_premium: BtcAmount(2),
            hedge_notional: HedgeNotional::Cost,
            quote_size: sh(10),
            quote_outcomes: vec![Outcome::No],
            max_retries: 1,
            hedge_delay: 0,
            tick: TickSize::new(1).unwrap(),
            expiry_tick: 100,
        };
        (source, down, CrossMaker::new(MAKER, params))
    }

    #[test]
    fn posts_mirrored_quotes() {
        let (mut source, mut down, mut mm) = setup();
        let ev = mm.refresh_quotes(0, &mut source, &mut down, rate(100_000)).unwrap();
        assert!(ev.iter().any(|e| matches!(e, CrossMmEvent::Quote { bid_d: Some(480), ask_d: Some(520), .. })));
        assert_eq!(down.book(Outcome::No).best_bid(), Some(480));
        assert_eq!(down.book(Outcome::No).best_ask(), Some(520));
        // refresh without changes keeps the same orders
        let ev = mm.refresh_quotes(1, &mut source, &mut down, rate(100_000)).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn fill_hedges_and_locks_edge() {
        let (mut source, mut down, mut mm) = setup();
        let r = rate(100_000);
        mm.refresh_quotes(0, &mut source, &mut down, r).unwrap();
        let exec = down.execute_market(USER, Outcome::No, Side::Ask, sh(1)).unwrap();
        for f in &exec.fills {
            mm.on_fill(1, f, &mut source, &mut down, r).unwrap();
        }
        assert_eq!(mm.positions.len(), 1);
        assert_eq!(mm.positions[0].status, HedgeStatus::Hedged);
        assert_eq!(mm.locked_edge(), UsdAmount(usd("0.008")));
    }

    #[test]
    fn unprofitable_side_is_suppressed() {
        let (mut source, mut down, mut mm) = setup();
        // the YES hedge now costs 0.53 so a 480 sat NO bid loses money
        source.cancel_side(BOOK, Outcome::Yes, Side::Ask);
        source.place_limit(BOOK, Outcome::Yes, Side::Ask, usd("0.53"), sh(1000)).unwrap();
        let ev = mm.refresh_quotes(0, &mut source, &mut down, rate(100_000)).unwrap();
        assert!(ev.iter().any(|e| matches!(e, CrossMmEvent::QuoteSuppressed { side: Side::Bid, .. })));
        assert_eq!(down.book(Outcome::No).best_bid(), None);
    }

    #[test]
    fn failed_hedge_halts_quoting() {
        let (mut source, mut down, mut mm) = setup();
        let r = rate(100_000);
        mm.refresh_quotes(0, &mut source, &mut down, r).unwrap();
        source.cancel_side(BOOK, Outcome::Yes, Side::Ask);
        source.place_limit(BOOK, Outcome::Yes, Side::Ask, usd("0.51"), sh(1)).unwrap();
        let exec = down.execute_market(USER, Outcome::No, Side::Ask, sh(5)).unwrap();
        let mut events = Vec::new();
        for f in &exec.fills {
            events.extend(mm.on_fill(1, f, &mut source, &mut down, r).unwrap());
        }
        // one retry allowed, still unhedged
        events.extend(mm.process_pending(2, &mut source, &mut down, r).unwrap());
        assert!(events.iter().any(|e| matches!(e, CrossMmEvent::HedgeFailed { .. })));
        assert!(mm.is_halted());
        assert_eq!(down.book(Outcome::No).best_bid(), None);
    }

    #[test]
    fn delayed_hedge_waits() {
        let (mut source, mut down, mut mm) = setup();
        mm.params.hedge_delay = 2;
        let r = rate(100_000);
        mm.refresh_quotes(0, &mut source, &mut down, r).unwrap();
        let exec = down.execute_market(USER, Outcome::No, Side::Ask, sh(1)).unwrap();
        for f in &exec.fills {
            mm.on_fill(1, f, &mut source, &mut down, r).unwrap();
        }
        assert_eq!(mm.positions[0].status, HedgeStatus::AwaitingHedge);
        mm.process_pending(2, &mut source, &mut down, r).unwrap();
        assert_eq!(mm.positions[0].status, HedgeStatus::AwaitingHedge);
        mm.process_pending(3, &mut source, &mut down, r).unwrap();
        assert_eq!(mm.positions[0].status, HedgeStatus::Hedged);
    }

    #[test]
    fn settle_both_outcomes_at_unchanged_spot() {
        for winner in [Outcome::Yes, Outcome::No] {
            let (mut source, mut down, mut mm) = setup();
            let r = rate(100_000);
            mm.refresh_quotes(0, &mut source, &mut down, r).unwrap();
            let exec = down.execute_market(USER, Outcome::No, Side::Ask, sh(1)).unwrap();
            for f in &exec.fills {
                mm.on_fill(1, f, &mut source, &mut down, r).unwrap();
            }
            let (pnl, _) = mm.settle(10, winner, r, &down).unwrap();
            assert_eq!(pnl, UsdAmount(usd("0.008")));
        }
    }

    #[test]
    fn unwind_round_trip() {
        let (mut source, mut down, mut mm) = setup();
        let r = rate(100_000);
        mm.refresh_quotes(0, &mut source, &mut down, r).unwrap();
        let exec = down.execute_market(USER, Outcome::No, Side::Ask, sh(1)).unwrap();
        for f in &exec.fills {
            mm.on_fill(1, f, &mut source, &mut down, r).unwrap();
        }
        mm.begin_unwind(2, &mut source, &mut down, r).unwrap();
        assert_eq!(mm.positions[0].status, HedgeStatus::Unwinding);
        let exec = down.execute_market(USER, Outcome::No, Side::Bid, sh(1)).unwrap();
        let mut events = Vec::new();
        for f in &exec.fills {
            events.extend(mm.on_fill(3, f, &mut source, &mut down, r).unwrap());
        }
        assert_eq!(mm.positions[0].status, HedgeStatus::Flat);
        // entry 0.48 + 0.51 + put 0.002, exit 0.52 + 0.49
        let pnl = mm.positions[0].realized_pnl.unwrap();
        assert_eq!(pnl, UsdAmount(usd("0.018")));
    }

    #[test]
    fn locked_edge_floor_across_spots() {
        let edge = usd("0.008");
        for mode in [HedgeNotional::Cost, HedgeNotional::Payout] {
            for spot in [50_000, 80_000, 100_000, 120_000, 200_000] {
                for winner in [Outcome::Yes, Outcome::No] {
                    let (mut source, mut down, mut mm) = setup();
                    mm.params.hedge_notional = mode;
                    let r = rate(100_000);
                    mm.refresh_quotes(0, &mut source, &mut down, r).unwrap();
                    let exec = down.execute_market(USER, Outcome::No, Side::Ask, sh(1)).unwrap();
                    for f in &exec.fills {
                        mm.on_fill(1, f, &mut source, &mut down, r).unwrap();
                    }
                    let (pnl, _) = mm.settle(10, winner, rate(spot), &down).unwrap();
                    let floor = match mode {
                        HedgeNotional::Payout => edge,
                        // the BTC leg beyond the put notional is unprotected:
                        // (1000 - 480) sat x max(K - S, 0)
                        HedgeNotional::Cost if winner == Outcome::No => {
                            edge - 520 * (100_000 - spot).max(0) * 1_000_000 / 100_000_000
                        }
                        HedgeNotional::Cost => edge,
                    };
                    assert!(pnl.0 >= floor, "{mode:?} spot {spot} winner {winner:?}: {} < {floor}", pnl.0);
                }
            }
        }
    }
}
