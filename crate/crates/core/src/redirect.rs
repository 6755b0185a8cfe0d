//! Non-custodial redirection: deposit BTC, borrow USD against it, bet the
//! USD on a USD venue, keep the loan healthy while the market runs, then
//! repay and hand back collateral plus any surplus converted to BTC.
//!
//! Keeper ladder when `HF ≤ hf_guard`, in order, stopping as soon as the
//! guard is restored:
//!
//! 1. `PartialRepay` from idle USD left over after the trade
//! 2. `AutoDeleverage`: sell the smallest share tranche that restores the
//!    guard (closed form, then one re-check), within the slippage cap
//! 3. `RequestTopUp`: scripted grant or denial, asked once
//! 4. `EmergencySwap`: swap the least collateral that restores the guard,
//!    within a lifetime cap
//!
//! Liquidation is checked separately after the keeper has run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lending::{
    borrow_at, liquidate, HealthFactor, LendingError, LendingParams, Liquidation, LoanPosition, LoanStatus,
};
use crate::money::{
    btc_to_usd, decimal, notional, round_price, usd_to_btc, usd_to_btc_ceil, BtcAmount, BtcUsdRate, Frac, MoneyError,
    Shares, Side, UsdAmount, MICROS_PER_SHARE, SATS_PER_BTC,
};
use crate::venue::{Outcome, OwnerId, Venue, VenueError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RedirectError {
    #[error("target LTV {target} must be in (0, {max}]")]
    TargetLtv { target: Frac, max: Frac },
    #[error("venue has {available} shares at or below {price}, need {needed}")]
    Liquidity { available: Shares, needed: Shares, price: i64 },
    #[error("operation needs stage {expected:?}, position is {actual:?}")]
    Stage { expected: Stage, actual: Stage },
    #[error("position already settled")]
    AlreadySettled,
    #[error("invalid redirect parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Lending(#[from] LendingError),
    #[error(transparent)]
    Venue(#[from] VenueError),
    #[error(transparent)]
    Money(#[from] MoneyError),
}

pub type RedirectResult<T> = Result<T, RedirectError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Deposited,
    Collateralised,
    Borrowed,
    Traded,
    Monitoring,
    Settling,
    Closed,
    LiquidatedEarly,
}

impl Stage {
    /// Allowed successor stages.
    pub fn can_move_to(self, next: Stage) -> bool {
        use Stage::*;
        matches!(
            (self, next),
            (Deposited, Collateralised)
                | (Collateralised, Borrowed)
                | (Borrowed, Traded)
                | (Traded, Monitoring)
                | (Monitoring, Settling)
                | (Monitoring, LiquidatedEarly)
                | (LiquidatedEarly, Settling)
                | (Settling, Closed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortfallPolicy {
    /// The user pays the missing USD from outside.
    InjectUsd,
    /// The least collateral that covers the gap is swapped to USD.
    SwapCollateral,
}

/// Limits the user sets at deposit time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeeperCaps {
    /// Largest share of the venue position sold in one keeper step.
    pub max_sell_fraction: Frac,
    /// Worst acceptable sell price relative to the best bid.
    pub max_slippage: Frac,
    /// Lifetime cap on emergency collateral swaps, as a fraction of the
    /// initial collateral.
    pub emergency_swap_fraction: Frac,
    /// Haircut on collateral swapped to USD.
    pub swap_slippage: Frac,
}

impl Default for KeeperCaps {
    fn default() -> Self {
        let f = |s: &str| Frac::parse(s).expect("literal");
        Self {
            max_sell_fraction: Frac::one(),
            max_slippage: f("0.05"),
            emergency_swap_fraction: f("0.25"),
            swap_slippage: f("0.01"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RedirectParams {
    /// L*: share of collateral value borrowed.
    pub target_ltv: Frac,
    pub hf_guard: Frac,
    pub lending: LendingParams,
    pub caps: KeeperCaps,
    pub keeper_enabled: bool,
    pub shortfall: ShortfallPolicy,
    /// Scripted answer to a top-up request, in satoshi; `None` denies it.
    #[serde(rename = "top_up_sats")]
    pub top_up: Option<BtcAmount>,
    /// Haircut when converting surplus USD to BTC at settlement.
    pub conversion_slippage: Frac,
}

impl Default for RedirectParams {
    fn default() -> Self {
        let f = |s: &str| Frac::parse(s).expect("literal");
        Self {
            target_ltv: f("0.45"),
            hf_guard: f("1.2"),
            lending: LendingParams::default(),
            caps: KeeperCaps::default(),
            keeper_enabled: true,
            shortfall: ShortfallPolicy::InjectUsd,
            top_up: None,
            conversion_slippage: Frac::zero(),
        }
    }
}

impl RedirectParams {
    pub fn validate(&self) -> RedirectResult<()> {
        self.lending.validate()?;
        if !(self.target_ltv > Frac::zero() && self.target_ltv <= self.lending.ltv_max) {
            return Err(RedirectError::TargetLtv { target: self.target_ltv, max: self.lending.ltv_max });
        }
        let unit = |f: Frac| !f.is_negative() && f < Frac::one();
        let c = &self.caps;
        if !(unit(c.max_slippage) && unit(c.swap_slippage) && unit(self.conversion_slippage)) {
            return Err(RedirectError::Params("slippage caps must be in [0, 1)".into()));
        }
        if !(c.max_sell_fraction > Frac::zero() && c.max_sell_fraction <= Frac::one()) {
            return Err(RedirectError::Params("max_sell_fraction must be in (0, 1]".into()));
        }
        if c.emergency_swap_fraction.is_negative() || c.emergency_swap_fraction > Frac::one() {
            return Err(RedirectError::Params("emergency_swap_fraction must be in [0, 1]".into()));
        }
        if self.hf_guard <= Frac::one() {
            return Err(RedirectError::Params("hf_guard must exceed 1".into()));
        }
        if self.hf_guard * (Frac::one() - c.swap_slippage) <= self.lending.liq_threshold {
            return Err(RedirectError::Params("hf_guard × (1 − swap_slippage) must exceed liq_threshold".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeeperKind {
    PartialRepay,
    AutoDeleverage,
    RequestTopUp,
    EmergencySwap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeeperAction {
    pub kind: KeeperKind,
    pub trigger_hf: f64,
    pub hf_after: f64,
    #[serde(with = "decimal")]
    pub shares_sold: Shares,
    #[serde(with = "decimal")]
    pub usd_repaid: UsdAmount,
    #[serde(with = "decimal")]
    pub btc_swapped: BtcAmount,
    #[serde(with = "decimal")]
    pub btc_added: BtcAmount,
}

impl KeeperAction {
    fn new(kind: KeeperKind, trigger: &HealthFactor) -> Self {
        Self {
            kind,
            trigger_hf: trigger.to_f64(),
            hf_after: trigger.to_f64(),
            shares_sold: Shares::ZERO,
            usd_repaid: UsdAmount::ZERO,
            btc_swapped: BtcAmount::ZERO,
            btc_added: BtcAmount::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettlementReport {
    pub outcome: Outcome,
    #[serde(with = "decimal")]
    pub proceeds_usd: UsdAmount,
    #[serde(with = "decimal")]
    pub interest_paid: UsdAmount,
    #[serde(with = "decimal")]
    pub shortfall: UsdAmount,
    pub liquidated: bool,
    /// Collateral handed back after the loan closed.
    #[serde(with = "decimal")]
    pub collateral_returned: BtcAmount,
    #[serde(with = "decimal")]
    pub user_total_btc: BtcAmount,
    #[serde(with = "decimal")]
    pub btc_pnl: BtcAmount,
}

impl SettlementReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedirectPosition {
    pub owner: OwnerId,
    pub stage: Stage,
    pub history: Vec<Stage>,
    pub loan: LoanPosition,
    pub initial_collateral: BtcAmount,
    pub outcome: Outcome,
    pub shares: Shares,
    /// Borrowed USD not spent on shares, plus deleverage surplus.
    pub idle_usd: UsdAmount,
    pub borrowed: UsdAmount,
    pub hf0: HealthFactor,
    pub params: RedirectParams,
    pub topped_up: BtcAmount,
    pub emergency_swapped: BtcAmount,
    pub top_up_requested: bool,
    pub liquidation: Option<Liquidation>,
    pub actions: Vec<KeeperAction>,
    pub report: Option<SettlementReport>,
}

fn ceil_frac(f: Frac) -> RedirectResult<i64> {
    Ok(crate::money::narrow(f.ratio().ceil().to_integer())?)
}

fn floor_frac(f: Frac) -> RedirectResult<i64> {
    Ok(crate::money::narrow(f.ratio().floor().to_integer())?)
}

fn int(v: i64) -> Frac {
    Frac::from_integer(v as i128)
}

impl RedirectPosition {
    fn advance(&mut self, next: Stage) -> RedirectResult<()> {
        if !self.stage.can_move_to(next) {
            return Err(RedirectError::Stage { expected: next, actual: self.stage });
        }
        self.stage = next;
        self.history.push(next);
        Ok(())
    }

    pub fn health_factor(&self, rate: BtcUsdRate) -> HealthFactor {
        self.loan.health_factor(rate, &self.params.lending)
    }

    /// Lifetime emergency swap budget left.
    pub fn emergency_remaining(&self) -> RedirectResult<BtcAmount> {
        let cap = self.initial_collateral.mul_frac_floor(self.params.caps.emergency_swap_fraction)?;
        Ok(BtcAmount((cap - self.emergency_swapped).0.max(0)))
    }

    /// USD repayment that brings HF back to the guard: `D − Vθ/g`, rounded up.
    fn repay_to_guard(&self, rate: BtcUsdRate) -> RedirectResult<UsdAmount> {
        let p = &self.params;
        let target = self.loan.collateral_value(rate) * p.lending.liq_threshold / p.hf_guard;
        let need = int(self.loan.debt().0) - target;
        Ok(UsdAmount(ceil_frac(need)?.max(0)))
    }

    fn needs_help(&self, rate: BtcUsdRate) -> bool {
        self.loan.status == LoanStatus::Active && self.health_factor(rate).at_or_below(self.params.hf_guard)
    }

    /// Simple interest for `elapsed` seconds.
    pub fn accrue(&mut self, elapsed: u64) -> RedirectResult<()> {
        if self.loan.status == LoanStatus::Active {
            self.loan = self.loan.accrue_interest(elapsed, &self.params.lending)?;
        }
        Ok(())
    }

    /// Runs the keeper ladder once. No-op unless monitoring with the keeper
    /// enabled and `HF ≤ hf_guard`.
    pub fn keeper_step(&mut self, rate: BtcUsdRate, venue: &mut Venue) -> RedirectResult<Vec<KeeperAction>> {
        let mut actions = Vec::new();
        if self.stage != Stage::Monitoring || !self.params.keeper_enabled || !self.needs_help(rate) {
            return Ok(actions);
        }

        // 1. idle USD
        let r = self.repay_to_guard(rate)?;
        let amt = r.min(self.idle_usd);
        if amt.0 > 0 {
            let mut a = KeeperAction::new(KeeperKind::PartialRepay, &self.health_factor(rate));
            self.loan.repay(amt)?;
            self.idle_usd -= amt;
            a.usd_repaid = amt;
            a.hf_after = self.health_factor(rate).to_f64();
            actions.push(a);
        }

        // 2. sell venue shares: closed-form tranche plus one re-check
        if self.needs_help(rate) && self.shares.0 > 0 {
            let mut a = KeeperAction::new(KeeperKind::AutoDeleverage, &self.health_factor(rate));
            let mut budget = self.shares.mul_frac_floor(self.params.caps.max_sell_fraction)?;
            for _ in 0..2 {
                if !self.needs_help(rate) || budget.0 == 0 {
                    break;
                }
                let sold = self.sell_tranche(rate, venue, budget, &mut a)?;
                if sold.0 == 0 {
                    break;
                }
                budget -= sold;
            }
            if a.shares_sold.0 > 0 {
                a.hf_after = self.health_factor(rate).to_f64();
                actions.push(a);
            }
        }

        // 3. top-up, asked once
        if self.needs_help(rate) && !self.top_up_requested {
            self.top_up_requested = true;
            let mut a = KeeperAction::new(KeeperKind::RequestTopUp, &self.health_factor(rate));
            if let Some(btc) = self.params.top_up {
                self.loan.add_collateral(btc)?;
                self.topped_up += btc;
                a.btc_added = btc;
            }
            a.hf_after = self.health_factor(rate).to_f64();
            actions.push(a);
        }

        // 4. collateral swap within the lifetime cap
        if self.needs_help(rate) {
            let remaining = self.emergency_remaining()?.min(self.loan.collateral);
            if remaining.0 > 0 {
                let mut a = KeeperAction::new(KeeperKind::EmergencySwap, &self.health_factor(rate));
                let p = &self.params;
                let (g, theta, sigma) = (p.hf_guard, p.lending.liq_threshold, p.caps.swap_slippage);
                // s·r ≥ (g·D − V·θ) / (g·(1 − σ) − θ)
                let num = g * int(self.loan.debt().0) - self.loan.collateral_value(rate) * theta;
                let den = g * (Frac::one() - sigma) - theta;
                let usd_needed = num / den;
                let sats = ceil_frac(usd_needed * int(SATS_PER_BTC) / int(rate.micros()))?.max(1);
                let s = BtcAmount(sats.min(remaining.0));
                let got = self.swap_collateral(s, rate)?;
                let rest = self.loan.repay(got)?;
                self.idle_usd += rest;
                self.emergency_swapped += s;
                a.btc_swapped = s;
                a.usd_repaid = got - rest;
                a.hf_after = self.health_factor(rate).to_f64();
                actions.push(a);
            }
        }
        self.actions.extend(actions.iter().cloned());
        Ok(actions)
    }

    /// Whether some keeper step could still act within its caps: idle USD,
    /// shares with bids inside the slippage limit, an unasked top-up, or
    /// emergency swap budget.
    pub fn keeper_has_room(&self, venue: &Venue) -> RedirectResult<bool> {
        if !self.params.keeper_enabled || self.stage != Stage::Monitoring {
            return Ok(false);
        }
        if self.idle_usd.0 > 0 || !self.top_up_requested {
            return Ok(true);
        }
        if self.emergency_remaining()?.min(self.loan.collateral).0 > 0 {
            return Ok(true);
        }
        if self.shares.mul_frac_floor(self.params.caps.max_sell_fraction)?.0 > 0 {
            if let Some(best) = venue.book(self.outcome).best_bid() {
                let limit = round_price(
                    floor_frac(int(best) * (Frac::one() - self.params.caps.max_slippage))?,
                    venue.tick,
                    Side::Ask,
                )
                .max(venue.tick.get())
                .min(best);
                if venue.available(self.outcome, Side::Bid, Some(limit)).0 > 0 {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Sells shares at no worse than `best_bid × (1 − max_slippage)` to cover
    /// the repayment the guard needs. Returns shares sold.
    fn sell_tranche(
        &mut self,
        rate: BtcUsdRate,
        venue: &mut Venue,
        budget: Shares,
        a: &mut KeeperAction,
    ) -> RedirectResult<Shares> {
        let Some(best) = venue.book(self.outcome).best_bid() else { return Ok(Shares::ZERO) };
        let limit =
            round_price(floor_frac(int(best) * (Frac::one() - self.params.caps.max_slippage))?, venue.tick, Side::Ask)
                .max(venue.tick.get());
        let limit = limit.min(best);
        let need = self.repay_to_guard(rate)?;
        // proceeds per share at the limit, net of the taker fee
        let net = int(limit) * (Frac::one() - venue.taker_fee);
        if !net.is_positive() {
            return Ok(Shares::ZERO);
        }
        let want = Shares(ceil_frac(int(need.0) * int(MICROS_PER_SHARE) / net)?.max(1));
        let size = want.min(budget).min(self.shares).min(venue.available(self.outcome, Side::Bid, Some(limit)));
        if size.0 == 0 {
            return Ok(Shares::ZERO);
        }
        let exec = venue.execute_limited(self.owner, self.outcome, Side::Ask, size, Some(limit))?;
        let proceeds = UsdAmount(exec.notional - exec.fees);
        self.shares -= exec.filled;
        let rest = self.loan.repay(proceeds)?;
        self.idle_usd += rest;
        a.shares_sold += exec.filled;
        a.usd_repaid += proceeds - rest;
        Ok(exec.filled)
    }

    fn swap_collateral(&mut self, s: BtcAmount, rate: BtcUsdRate) -> RedirectResult<UsdAmount> {
        self.loan.remove_collateral(s)?;
        let gross = btc_to_usd(s, rate)?;
        Ok(gross.mul_frac_floor(Frac::one() - self.params.caps.swap_slippage)?)
    }

    /// Liquidates when `HF < 1`. Returns the liquidation if one happened.
    pub fn check_liquidation(&mut self, rate: BtcUsdRate) -> RedirectResult<Option<Liquidation>> {
        if self.stage != Stage::Monitoring || !self.health_factor(rate).is_liquidatable() {
            return Ok(None);
        }
        let (loan, liq) = liquidate(&self.loan, rate, &self.params.lending)?;
        self.loan = loan;
        self.liquidation = Some(liq);
        if self.loan.status == LoanStatus::Liquidated {
            self.advance(Stage::LiquidatedEarly)?;
        }
        Ok(Some(liq))
    }

    /// Redeems the venue position, repays the loan, handles any shortfall
    /// and converts surplus USD to BTC at `rate`.
    pub fn settle(&mut self, winner: Outcome, rate: BtcUsdRate) -> RedirectResult<SettlementReport> {
        if matches!(self.stage, Stage::Settling | Stage::Closed) {
            return Err(RedirectError::AlreadySettled);
        }
        if !matches!(self.stage, Stage::Monitoring | Stage::LiquidatedEarly) {
            return Err(RedirectError::Stage { expected: Stage::Monitoring, actual: self.stage });
        }
        let liquidated = self.stage == Stage::LiquidatedEarly;
        self.advance(Stage::Settling)?;
        let proceeds = if self.outcome == winner { UsdAmount(self.shares.0) } else { UsdAmount::ZERO };
        self.shares = Shares::ZERO;
        let mut usd = proceeds + self.idle_usd;
        self.idle_usd = UsdAmount::ZERO;

        let mut shortfall = UsdAmount::ZERO;
        let mut injected = UsdAmount::ZERO;
        if self.loan.status == LoanStatus::Active {
            let debt = self.loan.debt();
            let paid = usd.min(debt);
            self.loan.repay(paid)?;
            usd -= paid;
            shortfall = debt - paid;
            if shortfall.0 > 0 {
                match self.params.shortfall {
                    ShortfallPolicy::InjectUsd => {
                        injected = shortfall;
                        self.loan.repay(shortfall)?;
                    }
                    ShortfallPolicy::SwapCollateral => {
                        let haircut = Frac::one() - self.params.caps.swap_slippage;
                        let sats = ceil_frac(int(shortfall.0) * int(SATS_PER_BTC) / (int(rate.micros()) * haircut))?;
                        let s = BtcAmount(sats.min(self.loan.collateral.0));
                        let got = self.swap_collateral(s, rate)?;
                        usd += self.loan.repay(got)?;
                        // collateral ran out: the rest comes from outside
                        let left = self.loan.debt();
                        if left.0 > 0 {
                            injected = left;
                            self.loan.repay(left)?;
                        }
                    }
                }
            }
        }
        let collateral = if self.loan.status == LoanStatus::Active {
            self.loan.close()?
        } else {
            let c = self.loan.collateral;
            self.loan.collateral = BtcAmount::ZERO;
            c
        };
        let converted = usd_to_btc(usd.mul_frac_floor(Frac::one() - self.params.conversion_slippage)?, rate)?;
        let user_total_btc = collateral + converted;
        let injected_btc = usd_to_btc_ceil(injected, rate)?;
        let btc_pnl = user_total_btc - self.initial_collateral - self.topped_up - injected_btc;
        let report = SettlementReport {
            outcome: winner,
            proceeds_usd: proceeds,
            interest_paid: self.loan.interest_paid,
            shortfall,
            liquidated,
            collateral_returned: collateral,
            user_total_btc,
            btc_pnl,
        };
        self.advance(Stage::Closed)?;
        self.report = Some(report.clone());
        Ok(report)
    }
}

/// Deposits `btc`, borrows `target_ltv × value` and spends it on `outcome`
/// at no more than `market_price` on the USD venue. Ends in `Monitoring`.
#[allow(clippy::too_many_arguments)]
pub fn open_position(
    owner: OwnerId,
    btc: BtcAmount,
    rate: BtcUsdRate,
    params: RedirectParams,
    venue: &mut Venue,
    market_price: i64,
    outcome: Outcome,
    at: u64,
) -> RedirectResult<RedirectPosition> {
    params.validate()?;
    let borrowed = borrow_at(btc, rate, params.target_ltv)?;
    let loan = LoanPosition::open(btc, borrowed, rate, at, &params.lending)?;
    let mut pos = RedirectPosition {
        owner,
        stage: Stage::Deposited,
        history: vec![Stage::Deposited],
        loan,
        initial_collateral: btc,
        outcome,
        shares: Shares::ZERO,
        idle_usd: borrowed,
        borrowed,
        hf0: loan.health_factor(rate, &params.lending),
        params,
        topped_up: BtcAmount::ZERO,
        emergency_swapped: BtcAmount::ZERO,
        top_up_requested: false,
        liquidation: None,
        actions: Vec::new(),
        report: None,
    };
    pos.advance(Stage::Collateralised)?;
    pos.advance(Stage::Borrowed)?;

    // largest size whose worst-case cost, fee included, fits in B
    let per_share = int(market_price) * (Frac::one() + venue.taker_fee);
    let mut size = Shares(floor_frac(int(borrowed.0) * int(MICROS_PER_SHARE) / per_share)?);
    let cost = |s: Shares| -> RedirectResult<i64> {
        let n = notional(market_price, s, true)?;
        Ok(n + ceil_frac(int(n) * venue.taker_fee)?)
    };
    while size.0 > 0 && cost(size)? > borrowed.0 {
        size -= Shares(1);
    }
    let available = venue.available(outcome, Side::Ask, Some(market_price));
    if available < size {
        return Err(RedirectError::Liquidity { available, needed: size, price: market_price });
    }
    if size.0 > 0 {
        let exec = venue.execute_limited(owner, outcome, Side::Bid, size, Some(market_price))?;
        pos.shares = exec.filled;
        pos.idle_usd = borrowed - UsdAmount(exec.notional + exec.fees);
    }
    pos.advance(Stage::Traded)?;
    pos.advance(Stage::Monitoring)?;
    Ok(pos)
}
