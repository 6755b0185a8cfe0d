//! Over-collateralised lending pool: BTC collateral, USD debt.
//!
//! All ratios are exact rationals. Interest is simple (non-compounding) on
//! outstanding principal with an act/365 day count, rounded up per accrual.
//! The engine holds no price oracle; callers pass the rate in.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{btc_value_exact, decimal, BtcAmount, BtcUsdRate, Frac, MoneyError, UsdAmount, SATS_PER_BTC};

pub const SECONDS_PER_YEAR: u64 = 365 * 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LendingError {
    #[error("invalid lending parameters: {0}")]
    Params(String),
    #[error("borrow {requested} exceeds the limit {limit}")]
    BorrowLimit { requested: UsdAmount, limit: UsdAmount },
    #[error("position is {0:?}, expected Active")]
    NotActive(LoanStatus),
    #[error("position is healthy (HF {0}), liquidation not allowed")]
    Healthy(HealthFactor),
    #[error("cannot close with outstanding debt {0}")]
    OutstandingDebt(UsdAmount),
    #[error("withdrawal of {requested} exceeds collateral {available}")]
    InsufficientCollateral { requested: BtcAmount, available: BtcAmount },
    #[error("ledger: {0}")]
    Ledger(String),
    #[error(transparent)]
    Money(#[from] MoneyError),
}

pub type LendingResult<T> = Result<T, LendingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LendingParams {
    pub ltv_max: Frac,
    pub liq_threshold: Frac,
    /// Discount on seized collateral.
    pub liq_penalty: Frac,
    /// Annualised borrow rate.
    pub borrow_rate: Frac,
    /// Share of debt repaid per liquidation; 1 closes the loan.
    pub close_factor: Frac,
}

impl Default for LendingParams {
    fn default() -> Self {
        let f = |s: &str| Frac::parse(s).expect("literal");
        Self {
            ltv_max: f("0.72"),
            liq_threshold: f("0.82"),
            liq_penalty: f("0.05"),
            borrow_rate: f("0.05"),
            close_factor: Frac::one(),
        }
    }
}

impl LendingParams {
    pub fn validate(&self) -> LendingResult<()> {
        let bad = |m: &str| Err(LendingError::Params(m.to_string()));
        if !(self.ltv_max > Frac::zero() && self.ltv_max < self.liq_threshold && self.liq_threshold < Frac::one()) {
            return bad("need 0 < ltv_max < liq_threshold < 1");
        }
        if self.liq_penalty.is_negative() || self.liq_penalty >= Frac::one() {
            return bad("liq_penalty must be in [0, 1)");
        }
        if self.borrow_rate.is_negative() {
            return bad("borrow_rate must be non-negative");
        }
        if !(self.close_factor > Frac::zero() && self.close_factor <= Frac::one()) {
            return bad("close_factor must be in (0, 1]");
        }
        Ok(())
    }

    /// Fractional price decline that takes a max-LTV loan to HF = 1.
    pub fn liquidation_decline(&self) -> Frac {
        Frac::one() - self.ltv_max / self.liq_threshold
    }
}

fn floor_i64(f: Frac) -> LendingResult<i64> {
    Ok(crate::money::narrow(f.ratio().floor().to_integer())?)
}

fn ceil_i64(f: Frac) -> LendingResult<i64> {
    Ok(crate::money::narrow(f.ratio().ceil().to_integer())?)
}

/// USD value of `btc` at `rate`, as an exact fraction of micro-USD.
fn value_micros(btc: BtcAmount, rate: BtcUsdRate) -> Frac {
    btc_value_exact(btc, rate) * Frac::from_integer(crate::money::MICROS_PER_USD as i128)
}

/// `ltv_max × collateral value`, floored to the micro-dollar.
pub fn max_borrow(collateral: BtcAmount, rate: BtcUsdRate, params: &LendingParams) -> LendingResult<UsdAmount> {
    borrow_at(collateral, rate, params.ltv_max)
}

/// `ltv × collateral value`, floored.
pub fn borrow_at(collateral: BtcAmount, rate: BtcUsdRate, ltv: Frac) -> LendingResult<UsdAmount> {
    Ok(UsdAmount(floor_i64(value_micros(collateral, rate) * ltv)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HealthFactor {
    Finite(Frac),
    /// No debt outstanding.
    Unbounded,
}

impl HealthFactor {
    pub fn is_liquidatable(&self) -> bool {
        matches!(self, HealthFactor::Finite(h) if *h < Frac::one())
    }

    pub fn below(&self, guard: Frac) -> bool {
        matches!(self, HealthFactor::Finite(h) if *h < guard)
    }

    pub fn at_or_below(&self, guard: Frac) -> bool {
        matches!(self, HealthFactor::Finite(h) if *h <= guard)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            HealthFactor::Finite(h) => h.to_f64(),
            HealthFactor::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for HealthFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HealthFactor::Finite(h) => write!(f, "{:.6}", h.to_f64()),
            HealthFactor::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoanStatus {
    Active,
    Liquidated,
    Closed,
}

impl fmt::Display for LoanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoanStatus::Active => "active",
            LoanStatus::Liquidated => "liquidated",
            LoanStatus::Closed => "closed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoanPosition {
    pub collateral: BtcAmount,
    /// Outstanding principal.
    pub principal: UsdAmount,
    /// Accrued, unpaid interest.
    pub interest: UsdAmount,
    /// Interest paid so far.
    pub interest_paid: UsdAmount,
    pub status: LoanStatus,
    /// Seconds since scenario start.
    pub opened_at: u64,
    pub rate_at_open: BtcUsdRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Liquidation {
    pub seized: BtcAmount,
    pub repaid: UsdAmount,
    /// Debt the seized collateral could not cover.
    pub bad_debt: UsdAmount,
}

impl LoanPosition {
    /// Opens a loan of `borrow` against `collateral`; rejects anything over
    /// the LTV limit.
    pub fn open(
        collateral: BtcAmount,
        borrow: UsdAmount,
        rate: BtcUsdRate,
        at: u64,
        params: &LendingParams,
    ) -> LendingResult<Self> {
        params.validate()?;
        let limit = max_borrow(collateral, rate, params)?;
        if borrow > limit {
            return Err(LendingError::BorrowLimit { requested: borrow, limit });
        }
        Ok(Self {
            collateral,
            principal: borrow,
            interest: UsdAmount::ZERO,
            interest_paid: UsdAmount::ZERO,
            status: LoanStatus::Active,
            opened_at: at,
            rate_at_open: rate,
        })
    }

    pub fn debt(&self) -> UsdAmount {
        self.principal + self.interest
    }

    pub fn collateral_value(&self, rate: BtcUsdRate) -> Frac {
        value_micros(self.collateral, rate)
    }

    /// `collateral value × liq_threshold / debt`.
    pub fn health_factor(&self, rate: BtcUsdRate, params: &LendingParams) -> HealthFactor {
        let debt = self.debt();
        if debt.0 <= 0 {
            return HealthFactor::Unbounded;
        }
        HealthFactor::Finite(self.collateral_value(rate) * params.liq_threshold / Frac::from_integer(debt.0 as i128))
    }

    fn ensure_active(&self) -> LendingResult<()> {
        if self.status != LoanStatus::Active {
            return Err(LendingError::NotActive(self.status));
        }
        Ok(())
    }

    /// Simple interest on principal for `elapsed` seconds, rounded up.
    pub fn accrue_interest(&self, elapsed: u64, params: &LendingParams) -> LendingResult<Self> {
        self.ensure_active()?;
        let mut next = *self;
        let num = Frac::from_integer(self.principal.0 as i128)
            * params.borrow_rate
            * Frac::new(elapsed as i128, SECONDS_PER_YEAR as i128)?;
        next.interest = next.interest.checked_add(UsdAmount(ceil_i64(num)?))?;
        Ok(next)
    }

    /// Repays interest first, then principal. Returns the unused part of
    /// `amount`.
    pub fn repay(&mut self, amount: UsdAmount) -> LendingResult<UsdAmount> {
        self.ensure_active()?;
        let to_interest = amount.min(self.interest);
        self.interest -= to_interest;
        self.interest_paid += to_interest;
        let to_principal = (amount - to_interest).min(self.principal);
        self.principal -= to_principal;
        Ok(amount - to_interest - to_principal)
    }

    pub fn add_collateral(&mut self, btc: BtcAmount) -> LendingResult<()> {
        self.ensure_active()?;
        self.collateral = self.collateral.checked_add(btc)?;
        Ok(())
    }

    /// Removes collateral without a health check; callers that need one
    /// check the resulting HF.
    pub fn remove_collateral(&mut self, btc: BtcAmount) -> LendingResult<()> {
        if btc > self.collateral {
            return Err(LendingError::InsufficientCollateral { requested: btc, available: self.collateral });
        }
        self.collateral -= btc;
        Ok(())
    }

    /// Releases all collateral once debt is zero.
    pub fn close(&mut self) -> LendingResult<BtcAmount> {
        if self.debt().0 > 0 {
            return Err(LendingError::OutstandingDebt(self.debt()));
        }
        let out = self.collateral;
        self.collateral = BtcAmount::ZERO;
        self.status = LoanStatus::Closed;
        Ok(out)
    }
}

/// Seizes the least collateral whose discounted value covers the repaid
/// debt: `ceil(debt / (rate × (1 − penalty)))`, capped at the collateral.
/// With close factor 1 the loan ends `Liquidated`; the remaining collateral
/// stays on the position for the owner to withdraw.
pub fn liquidate(
    pos: &LoanPosition,
    rate: BtcUsdRate,
    params: &LendingParams,
) -> LendingResult<(LoanPosition, Liquidation)> {
    pos.ensure_active()?;
    let hf = pos.health_factor(rate, params);
    if !hf.is_liquidatable() {
        return Err(LendingError::Healthy(hf));
    }
    let debt = pos.debt();
    let target = if params.close_factor == Frac::one() { debt } else { debt.mul_frac_ceil(params.close_factor)? };
    let price = Frac::from_integer(rate.micros() as i128) * (Frac::one() - params.liq_penalty);
    let needed = ceil_i64(Frac::from_integer(target.0 as i128) * Frac::from_integer(SATS_PER_BTC as i128) / price)?;
    let seized = BtcAmount(needed.min(pos.collateral.0));
    let covered =
        UsdAmount(floor_i64(Frac::from_integer(seized.0 as i128) * price / Frac::from_integer(SATS_PER_BTC as i128))?);
    let repaid = covered.min(target);
    let mut next = *pos;
    next.collateral -= seized;
    next.repay(repaid)?;
    let mut bad_debt = UsdAmount::ZERO;
    if params.close_factor == Frac::one() || next.collateral.0 == 0 {
        bad_debt = next.debt();
        next.principal = UsdAmount::ZERO;
        next.interest = UsdAmount::ZERO;
        next.status = LoanStatus::Liquidated;
    }
    Ok((next, Liquidation { seized, repaid, bad_debt }))
}

/// One CSV ledger line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub timestamp: u64,
    pub collateral: String,
    pub debt: String,
    pub hf: String,
    pub status: LoanStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub rows: Vec<LedgerRow>,
}

impl Ledger {
    pub fn record(&mut self, timestamp: u64, pos: &LoanPosition, rate: BtcUsdRate, params: &LendingParams) {
        self.rows.push(LedgerRow {
            timestamp,
            collateral: pos.collateral.plain(),
            debt: pos.debt().plain(),
            hf: pos.health_factor(rate, params).to_string(),
            status: pos.status,
        });
    }

    pub fn to_csv(&self) -> LendingResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| LendingError::Ledger(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| LendingError::Ledger(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| LendingError::Ledger(e.to_string()))
    }

    pub fn from_csv(text: &str) -> LendingResult<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows =
            r.deserialize().collect::<Result<Vec<LedgerRow>, _>>().map_err(|e| LendingError::Ledger(e.to_string()))?;
        for row in &rows {
            BtcAmount::parse(&row.collateral)?;
            UsdAmount::parse(&row.debt)?;
        }
        Ok(Self { rows })
    }
}

/// Plain summary for reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LoanSummary {
    #[serde(with = "decimal")]
    pub collateral: BtcAmount,
    #[serde(with = "decimal")]
    pub debt: UsdAmount,
    pub status: LoanStatus,
}

impl From<&LoanPosition> for LoanSummary {
    fn from(p: &LoanPosition) -> Self {
        Self { collateral: p.collateral, debt: p.debt(), status: p.status }
    }
}
