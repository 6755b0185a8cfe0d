//! Limit-order-book venue for one binary market.
//!
//! A [`Venue`] holds one [`OrderBook`] per outcome token and settles fills
//! between participants. Prices are integers in the venue's native unit
//! (micro-USD or satoshi) per whole share; sizes are [`Shares`].
//!
//! Cash balances are tracked as signed net flows starting from zero, so
//! the venue can verify its own accounting identity at any time:
//! `Σ cash + fees + escrow = 0` and, per outcome, `Σ shares = sets minted`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{
    self, div_ceil, narrow, usd_to_btc, BtcUsdRate, Frac, MoneyError, Shares, Side, TickSize, UsdAmount,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Yes,
    No,
}

impl Outcome {
    pub fn opposite(self) -> Self {
        match self {
            Outcome::Yes => Outcome::No,
            Outcome::No => Outcome::Yes,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Outcome::Yes => 0,
            Outcome::No => 1,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Yes => "yes",
            Outcome::No => "no",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Denom {
    Usd,
    Btc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OwnerId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VenueError {
    #[error("price {price} is not on the tick grid (tick {tick})")]
    OffTick { price: i64, tick: i64 },
    #[error("price {price} outside (0, {payout_unit})")]
    PriceOutOfRange { price: i64, payout_unit: i64 },
    #[error("size must be positive, got {0}")]
    NonPositiveSize(Shares),
    #[error("order would trade against the owner's own resting order {0:?}")]
    SelfTrade(OrderId),
    #[error("market already resolved")]
    AlreadyResolved,
    #[error("market not resolved yet")]
    NotResolved,
    #[error("market is resolved; trading is closed")]
    TradingClosed,
    #[error("malformed book snapshot line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
    #[error(transparent)]
    Money(#[from] MoneyError),
}

pub type VenueResult<T> = Result<T, VenueError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RestingOrder {
    pub id: OrderId,
    pub owner: OwnerId,
    pub price: i64,
    pub size: Shares,
}

/// One side-sorted ladder per side: bids descending, asks ascending,
/// ties broken by order id (arrival time).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OrderBook {
    bids: Vec<RestingOrder>,
    asks: Vec<RestingOrder>,
}

impl OrderBook {
    pub fn best_bid(&self) -> Option<i64> {
        self.bids.first().map(|o| o.price)
    }

    pub fn best_ask(&self) -> Option<i64> {
        self.asks.first().map(|o| o.price)
    }

    pub fn best(&self, side: Side) -> Option<i64> {
        match side {
            Side::Bid => self.best_bid(),
            Side::Ask => self.best_ask(),
        }
    }

    pub fn orders(&self, side: Side) -> &[RestingOrder] {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn orders_mut(&mut self, side: Side) -> &mut Vec<RestingOrder> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    fn insert(&mut self, side: Side, order: RestingOrder) {
        let list = self.orders_mut(side);
        let pos = list.partition_point(|o| match side {
            Side::Bid => o.price > order.price || (o.price == order.price && o.id < order.id),
            Side::Ask => o.price < order.price || (o.price == order.price && o.id < order.id),
        });
        list.insert(pos, order);
    }

    fn remove(&mut self, id: OrderId) -> Option<(Side, RestingOrder)> {
        for side in [Side::Bid, Side::Ask] {
            let list = self.orders_mut(side);
            if let Some(pos) = list.iter().position(|o| o.id == id) {
                return Some((side, list.remove(pos)));
            }
        }
        None
    }

    /// Aggregated `(price, size)` levels in priority order.
    pub fn levels(&self, side: Side) -> Vec<(i64, Shares)> {
        let mut out: Vec<(i64, Shares)> = Vec::new();
        for o in self.orders(side) {
            match out.last_mut() {
                Some((p, s)) if *p == o.price => *s += o.size,
                _ => out.push((o.price, o.size)),
            }
        }
        out
    }

    pub fn depth(&self, side: Side) -> Shares {
        self.orders(side).iter().map(|o| o.size).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty() && self.asks.is_empty()
    }

    /// Line-oriented snapshot: asks from the top of the ladder down, then
    /// bids from best down; one `side price size` line per level, raw integers.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for (p, s) in self.levels(Side::Ask).iter().rev() {
            let _ = writeln!(out, "ask {p} {}", s.0);
        }
        for (p, s) in self.levels(Side::Bid) {
            let _ = writeln!(out, "bid {p} {}", s.0);
        }
        out
    }

    /// Parses the output of [`OrderBook::snapshot`] into `(side, price, size)` levels.
    pub fn parse_snapshot(text: &str) -> VenueResult<Vec<(Side, i64, Shares)>> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| VenueError::Snapshot { line: i + 1, reason: reason.to_string() };
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad("expected `side price size`"));
            }
            let side = match parts[0] {
                "bid" => Side::Bid,
                "ask" => Side::Ask,
                _ => return Err(bad("side must be bid or ask")),
            };
            let price: i64 = parts[1].parse().map_err(|_| bad("bad price"))?;
            let size: i64 = parts[2].parse().map_err(|_| bad("bad size"))?;
            out.push((side, price, Shares(size)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fill {
    /// Resting order that was consumed.
    pub order_id: OrderId,
    pub maker: OwnerId,
    pub taker: OwnerId,
    /// `Bid` when the taker bought, `Ask` when the taker sold.
    pub taker_side: Side,
    pub outcome: Outcome,
    pub price: i64,
    pub size: Shares,
    pub fee_paid: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Execution {
    pub fills: Vec<Fill>,
    pub filled: Shares,
    pub unfilled: Shares,
    /// Sum of price × size over fills, native units.
    pub notional: i64,
    pub fees: i64,
}

impl Execution {
    /// Size-weighted average price, floored; `None` when nothing filled.
    pub fn average_price(&self) -> Option<i64> {
        if self.filled.0 == 0 {
            return None;
        }
        let num = self.notional as i128 * money::MICROS_PER_SHARE as i128;
        Some((num / self.filled.0 as i128) as i64)
    }

    pub fn worst_price(&self) -> Option<i64> {
        self.fills.last().map(|f| f.price)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub order_id: OrderId,
    pub fills: Vec<Fill>,
    pub resting: Shares,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Holdings {
    pub cash: i64,
    pub yes: Shares,
    pub no: Shares,
}

impl Holdings {
    pub fn shares(&self, outcome: Outcome) -> Shares {
        match outcome {
            Outcome::Yes => self.yes,
            Outcome::No => self.no,
        }
    }

    fn shares_mut(&mut self, outcome: Outcome) -> &mut Shares {
        match outcome {
            Outcome::Yes => &mut self.yes,
            Outcome::No => &mut self.no,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Venue {
    pub id: String,
    pub denom: Denom,
    pub tick: TickSize,
    pub taker_fee: Frac,
    /// Native amount paid per winning share at resolution.
    pub payout_unit: i64,
    books: [OrderBook; 2],
    next_id: u64,
    accounts: BTreeMap<OwnerId, Holdings>,
    fees_collected: i64,
    escrow: i64,
    sets_minted: Shares,
    resolved: Option<Outcome>,
}

impl Venue {
    /// USD venue: a winning share pays $1.
    pub fn usd(id: impl Into<String>, tick: TickSize, taker_fee: Frac) -> Self {
        Self::new(id, Denom::Usd, tick, taker_fee, money::MICROS_PER_USD)
    }

    /// BTC venue whose winning share pays `usd_to_btc($1, rate_at_creation)`.
    pub fn btc(
        id: impl Into<String>,
        tick: TickSize,
        taker_fee: Frac,
        rate_at_creation: BtcUsdRate,
    ) -> VenueResult<Self> {
        let unit = usd_to_btc(UsdAmount(money::MICROS_PER_USD), rate_at_creation)?;
        Ok(Self::new(id, Denom::Btc, tick, taker_fee, unit.0))
    }

    pub fn new(id: impl Into<String>, denom: Denom, tick: TickSize, taker_fee: Frac, payout_unit: i64) -> Self {
        Self {
            id: id.into(),
            denom,
            tick,
            taker_fee,
            payout_unit,
            books: Default::default(),
            next_id: 1,
            accounts: BTreeMap::new(),
            fees_collected: 0,
            escrow: 0,
            sets_minted: Shares::ZERO,
            resolved: None,
        }
    }

    pub fn book(&self, outcome: Outcome) -> &OrderBook {
        &self.books[outcome.index()]
    }

    pub fn holdings(&self, owner: OwnerId) -> Holdings {
        self.accounts.get(&owner).copied().unwrap_or_default()
    }

    pub fn accounts(&self) -> &BTreeMap<OwnerId, Holdings> {
        &self.accounts
    }

    pub fn fees_collected(&self) -> i64 {
        self.fees_collected
    }

    pub fn sets_minted(&self) -> Shares {
        self.sets_minted
    }

    pub fn resolution(&self) -> Option<Outcome> {
        self.resolved
    }

    fn validate_order(&self, price: i64, size: Shares) -> VenueResult<()> {
        if size.0 <= 0 {
            return Err(VenueError::NonPositiveSize(size));
        }
        if price <= 0 || price >= self.payout_unit {
            return Err(VenueError::PriceOutOfRange { price, payout_unit: self.payout_unit });
        }
        if !self.tick.is_on_grid(price) {
            return Err(VenueError::OffTick { price, tick: self.tick.get() });
        }
        Ok(())
    }

    fn fee_for(&self, notional: i64) -> VenueResult<i64> {
        let r = self.taker_fee.ratio();
        Ok(narrow(div_ceil(notional as i128 * r.numer(), *r.denom()))?)
    }

    /// Posts a limit order. Any part that crosses the opposite side executes
    /// immediately as a taker up to the limit price; the rest rests.
    pub fn place_limit(
        &mut self,
        owner: OwnerId,
        outcome: Outcome,
        side: Side,
        price: i64,
        size: Shares,
    ) -> VenueResult<Placement> {
        if self.resolved.is_some() {
            return Err(VenueError::TradingClosed);
        }
        self.validate_order(price, size)?;
        let exec = self.take(owner, outcome, side, size, Some(price))?;
        let id = OrderId(self.next_id);
        self.next_id += 1;
        let resting = exec.unfilled;
        if resting.0 > 0 {
            self.books[outcome.index()].insert(side, RestingOrder { id, owner, price, size: resting });
        }
        Ok(Placement { order_id: id, fills: exec.fills, resting })
    }

    /// Market order: walks the opposite side best level first until `size`
    /// is filled or the book is exhausted.
    pub fn execute_market(
        &mut self,
        owner: OwnerId,
        outcome: Outcome,
        side: Side,
        size: Shares,
    ) -> VenueResult<Execution> {
        self.execute_limited(owner, outcome, side, size, None)
    }

    /// Market order that stops at `limit` (the worst acceptable price).
    pub fn execute_limited(
        &mut self,
        owner: OwnerId,
        outcome: Outcome,
        side: Side,
        size: Shares,
        limit: Option<i64>,
    ) -> VenueResult<Execution> {
        if self.resolved.is_some() {
            return Err(VenueError::TradingClosed);
        }
        if size.0 <= 0 {
            return Err(VenueError::NonPositiveSize(size));
        }
        self.take(owner, outcome, side, size, limit)
    }

    /// Shares available on `side` of `outcome`'s book at prices no worse than `limit`.
    pub fn available(&self, outcome: Outcome, side: Side, limit: Option<i64>) -> Shares {
        self.book(outcome)
            .orders(side)
            .iter()
            .filter(|o| {
                limit.is_none_or(|l| match side {
                    Side::Bid => o.price >= l,
                    Side::Ask => o.price <= l,
                })
            })
            .map(|o| o.size)
            .sum()
    }

    fn take(
        &mut self,
        taker: OwnerId,
        outcome: Outcome,
        side: Side,
        size: Shares,
        limit: Option<i64>,
    ) -> VenueResult<Execution> {
        let resting_side = side.opposite();
        let crosses = |price: i64| match (side, limit) {
            (_, None) => true,
            (Side::Bid, Some(l)) => price <= l,
            (Side::Ask, Some(l)) => price >= l,
        };

        // Reject before touching state if any consumable order is our own.
        let mut need = size;
        for o in self.books[outcome.index()].orders(resting_side) {
            if need.0 == 0 || !crosses(o.price) {
                break;
            }
            if o.owner == taker {
                return Err(VenueError::SelfTrade(o.id));
            }
            need -= o.size.min(need);
        }

        let mut exec = Execution::default();
        let mut remaining = size;
        while remaining.0 > 0 {
            let Some(top) = self.books[outcome.index()].orders(resting_side).first().cloned() else {
                break;
            };
            if !crosses(top.price) {
                break;
            }
            let qty = top.size.min(remaining);
            let notional = money::notional(top.price, qty, true)?;
            let fee = self.fee_for(notional)?;
            let (buyer, seller) = match side {
                Side::Bid => (taker, top.owner),
                Side::Ask => (top.owner, taker),
            };
            {
                let b = self.accounts.entry(buyer).or_default();
                b.cash -= notional;
                *b.shares_mut(outcome) += qty;
            }
            {
                let s = self.accounts.entry(seller).or_default();
                s.cash += notional;
                *s.shares_mut(outcome) -= qty;
            }
            self.accounts.entry(taker).or_default().cash -= fee;
            self.fees_collected += fee;

            let book = &mut self.books[outcome.index()];
            let list = book.orders_mut(resting_side);
            if qty == top.size {
                list.remove(0);
            } else {
                list[0].size -= qty;
            }
            exec.fills.push(Fill {
                order_id: top.id,
                maker: top.owner,
                taker,
                taker_side: side,
                outcome,
                price: top.price,
                size: qty,
                fee_paid: fee,
            });
            exec.filled += qty;
            exec.notional += notional;
            exec.fees += fee;
            remaining -= qty;
        }
        exec.unfilled = remaining;
        Ok(exec)
    }

    pub fn cancel(&mut self, id: OrderId) -> Option<RestingOrder> {
        self.books.iter_mut().find_map(|b| b.remove(id)).map(|(_, o)| o)
    }

    pub fn find_order(&self, id: OrderId) -> Option<(Outcome, Side, &RestingOrder)> {
        for outcome in [Outcome::Yes, Outcome::No] {
            for side in [Side::Bid, Side::Ask] {
                if let Some(o) = self.book(outcome).orders(side).iter().find(|o| o.id == id) {
                    return Some((outcome, side, o));
                }
            }
        }
        None
    }

    /// Removes every resting order `owner` has on one side of one book.
    pub fn cancel_side(&mut self, owner: OwnerId, outcome: Outcome, side: Side) -> Vec<RestingOrder> {
        let list = self.books[outcome.index()].orders_mut(side);
        let (gone, keep): (Vec<_>, Vec<_>) = list.drain(..).partition(|o| o.owner == owner);
        *list = keep;
        gone
    }

    pub fn cancel_all(&mut self, owner: OwnerId) -> Vec<RestingOrder> {
        let mut out = Vec::new();
        for outcome in [Outcome::Yes, Outcome::No] {
            for side in [Side::Bid, Side::Ask] {
                out.extend(self.cancel_side(owner, outcome, side));
            }
        }
        out
    }

    /// Replaces `owner`'s resting orders on one side with the given levels.
    pub fn replace_side(
        &mut self,
        owner: OwnerId,
        outcome: Outcome,
        side: Side,
        levels: &[(i64, Shares)],
    ) -> VenueResult<Vec<Fill>> {
        self.cancel_side(owner, outcome, side);
        let mut fills = Vec::new();
        for &(price, size) in levels {
            fills.extend(self.place_limit(owner, outcome, side, price, size)?.fills);
        }
        Ok(fills)
    }

    /// Pays one payout unit per set into escrow and credits one YES and one NO per set.
    pub fn mint_sets(&mut self, owner: OwnerId, size: Shares) -> VenueResult<i64> {
        if self.resolved.is_some() {
            return Err(VenueError::TradingClosed);
        }
        if size.0 <= 0 {
            return Err(VenueError::NonPositiveSize(size));
        }
        let cost = money::notional(self.payout_unit, size, true)?;
        let acct = self.accounts.entry(owner).or_default();
        acct.cash -= cost;
        acct.yes += size;
        acct.no += size;
        self.escrow += cost;
        self.sets_minted += size;
        Ok(cost)
    }

    /// Burns matched YES+NO pairs back into escrowed cash.
    pub fn merge_sets(&mut self, owner: OwnerId, size: Shares) -> VenueResult<i64> {
        if self.resolved.is_some() {
            return Err(VenueError::TradingClosed);
        }
        if size.0 <= 0 {
            return Err(VenueError::NonPositiveSize(size));
        }
        let value = money::notional(self.payout_unit, size, false)?;
        let acct = self.accounts.entry(owner).or_default();
        acct.cash += value;
        acct.yes -= size;
        acct.no -= size;
        self.escrow -= value;
        self.sets_minted -= size;
        Ok(value)
    }

    pub fn resolve(&mut self, winner: Outcome) -> VenueResult<()> {
        if self.resolved.is_some() {
            return Err(VenueError::AlreadyResolved);
        }
        self.resolved = Some(winner);
        for b in &mut self.books {
            *b = OrderBook::default();
        }
        Ok(())
    }

    /// Resolution value of `holdings` at this venue: one payout unit per
    /// winning share, nothing for losing shares.
    pub fn payout_value(&self, winner: Outcome, holdings: &Holdings) -> VenueResult<i64> {
        Ok(money::notional(self.payout_unit, holdings.shares(winner), false)?)
    }

    /// Marks the market resolved and returns the payout owed on `holdings`.
    pub fn resolve_market(&mut self, winner: Outcome, holdings: &Holdings) -> VenueResult<i64> {
        self.resolve(winner)?;
        self.payout_value(winner, holdings)
    }

    /// Pays out `owner`'s winning shares from escrow and clears both share balances.
    pub fn redeem(&mut self, owner: OwnerId) -> VenueResult<i64> {
        let winner = self.resolved.ok_or(VenueError::NotResolved)?;
        let h = self.holdings(owner);
        let payout = self.payout_value(winner, &h)?;
        let acct = self.accounts.entry(owner).or_default();
        acct.cash += payout;
        acct.yes = Shares::ZERO;
        acct.no = Shares::ZERO;
        self.escrow -= payout;
        Ok(payout)
    }

    /// Redeems every account, in owner order.
    pub fn redeem_all(&mut self) -> VenueResult<BTreeMap<OwnerId, i64>> {
        let owners: Vec<OwnerId> = self.accounts.keys().copied().collect();
        owners.into_iter().map(|o| self.redeem(o).map(|p| (o, p))).collect()
    }

    /// Cash, share and escrow accounting identity. Returns the residuals
    /// `(cash + fees + escrow, Σyes − minted, Σno − minted)`; all zero when
    /// consistent (escrow may retain sub-unit dust after redemption).
    pub fn conservation_residuals(&self) -> (i64, Shares, Shares) {
        let cash: i64 = self.accounts.values().map(|h| h.cash).sum();
        let yes: Shares = self.accounts.values().map(|h| h.yes).sum();
        let no: Shares = self.accounts.values().map(|h| h.no).sum();
        let minted = if self.resolved.is_some() && yes.0 == 0 && no.0 == 0 { Shares::ZERO } else { self.sets_minted };
        (cash + self.fees_collected + self.escrow, yes - minted, no - minted)
    }

    pub fn escrow(&self) -> i64 {
        self.escrow
    }

    /// All books, outcome by outcome.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for outcome in [Outcome::Yes, Outcome::No] {
            let _ = writeln!(out, "# {outcome}");
            out.push_str(&self.book(outcome).snapshot());
        }
        out
    }
}
