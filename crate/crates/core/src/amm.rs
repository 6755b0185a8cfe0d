//! Automated market makers for a binary market.
//!
//! [`LmsrState`] is the log market scoring rule baseline (f64, log-sum-exp).
//! [`CpmmPool`] is the constant-product pool, standard (`p = 1/2`) or
//! prior-weighted (`x^p · y^(1−p) = C`). Reserves are integer micro-shares
//! and every rounding step favours the pool. Operations are pure: they return
//! a new pool and leave the old one untouched.

use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;
use thiserror::Error;

use crate::money::{div_ceil, Frac, MoneyError, Shares, UsdAmount};
use crate::venue::Outcome;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmmError {
    #[error("probability {0} must lie strictly between 0 and 1")]
    Probability(String),
    #[error("liquidity parameter must be positive and finite, got {0}")]
    Liquidity(f64),
    #[error("amount must be non-negative, got {0}")]
    Negative(i64),
    #[error("amount must be positive")]
    NotPositive,
    #[error("trade would exhaust the {0:?} reserve")]
    ReserveExhausted(Outcome),
    #[error("pool text: {0}")]
    Parse(String),
    #[error(transparent)]
    Money(#[from] MoneyError),
}

pub type AmmResult<T> = Result<T, AmmError>;

fn check_prob(p: f64) -> AmmResult<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(AmmError::Probability(p.to_string()))
    }
}

// ---------------------------------------------------------------- LMSR

/// Binary LMSR market state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LmsrState {
    pub b: f64,
    pub q_yes: f64,
    pub q_no: f64,
}

impl LmsrState {
    pub fn new(b: f64) -> AmmResult<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(AmmError::Liquidity(b));
        }
        Ok(Self { b, q_yes: 0.0, q_no: 0.0 })
    }

    /// `b · ln(e^(q_yes/b) + e^(q_no/b))`, stabilised.
    pub fn cost(&self) -> f64 {
        let (a, c) = (self.q_yes / self.b, self.q_no / self.b);
        let m = a.max(c);
        self.b * (m + ((a - m).exp() + (c - m).exp()).ln())
    }

    pub fn price(&self, outcome: Outcome) -> f64 {
        let d = (self.q_no - self.q_yes) / self.b;
        let yes = 1.0 / (1.0 + d.exp());
        match outcome {
            Outcome::Yes => yes,
            Outcome::No => 1.0 - yes,
        }
    }

    /// Buys (or sells, if negative) `dq` shares of `outcome`. Returns the
    /// cash paid and the new state.
    pub fn trade(&self, outcome: Outcome, dq: f64) -> (f64, LmsrState) {
        let mut next = *self;
        match outcome {
            Outcome::Yes => next.q_yes += dq,
            Outcome::No => next.q_no += dq,
        }
        (next.cost() - self.cost(), next)
    }

    /// Worst-case operator loss for a binary market.
    pub fn max_loss(&self) -> f64 {
        self.b * std::f64::consts::LN_2
    }
}

/// Cost of buying the price of an outcome from `p0` to `p1`:
/// `b · ln((1 − p0) / (1 − p1))`.
pub fn lmsr_move_cost(p0: f64, p1: f64, b: f64) -> AmmResult<f64> {
    check_prob(p0)?;
    check_prob(p1)?;
    if !(b.is_finite() && b > 0.0) {
        return Err(AmmError::Liquidity(b));
    }
    if p1 < p0 {
        return Err(AmmError::Probability(format!("{p1} < {p0}")));
    }
    Ok(b * ((1.0 - p0) / (1.0 - p1)).ln())
}

// ---------------------------------------------------------------- CPMM

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AmmKind {
    Lmsr,
    Cpmm,
    WeightedCpmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    Standard,
    Weighted,
}

/// Constant-product pool. `x` holds YES, `y` holds NO. `c` is
/// `x^p · y^(1−p)` in whole shares, refreshed after every trade.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpmmPool {
    pub x: Shares,
    pub y: Shares,
    pub p: Frac,
    pub c: f64,
    /// Proportional fee on the side swapped into the pool.
    pub fee: Frac,
    pub fees_yes: Shares,
    pub fees_no: Shares,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpAccount {
    pub initial_endowment: UsdAmount,
    pub leftover: Option<(Outcome, Shares)>,
    pub pool_share: Frac,
}

impl LpAccount {
    /// USD value of reserves plus leftover shares once `winner` is known.
    pub fn value_at_resolution(&self, pool: &CpmmPool, winner: Outcome) -> UsdAmount {
        let mut v = pool.reserve(winner).0;
        if let Some((o, s)) = self.leftover {
            if o == winner {
                v += s.0;
            }
        }
        UsdAmount(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetFill {
    pub outcome: Outcome,
    pub cash: UsdAmount,
    /// Sets minted from the cash (one share per dollar).
    pub minted: Shares,
    pub fee: Shares,
    /// Δ withdrawn from the chosen-side reserve.
    pub withdrawn: Shares,
    pub shares_out: Shares,
    /// `|ln(x'^p y'^(1−p)) − ln C|` for the unrounded reserve, i.e. the
    /// relative invariant error of the closed form before rounding.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SellFill {
    pub outcome: Outcome,
    pub shares_in: Shares,
    pub cash_out: UsdAmount,
}

/// `ln(a / b)` computed as `ln_1p((a − b) / b)`.
pub(crate) fn ln_ratio(a: i64, b: i64) -> f64 {
    ((a - b) as f64 / b as f64).ln_1p()
}

fn ln_invariant(x: Shares, y: Shares, p: f64) -> f64 {
    let (xs, ys) = (x.to_f64(), y.to_f64());
    p * xs.ln() + (1.0 - p) * ys.ln()
}

impl CpmmPool {
    pub fn new(x: Shares, y: Shares, p: Frac) -> AmmResult<Self> {
        if p <= Frac::zero() || p >= Frac::one() {
            return Err(AmmError::Probability(p.to_string()));
        }
        for (o, r) in [(Outcome::Yes, x), (Outcome::No, y)] {
            if r.0 <= 0 {
                return Err(AmmError::ReserveExhausted(o));
            }
        }
        let mut pool = Self { x, y, p, c: 0.0, fee: Frac::zero(), fees_yes: Shares::ZERO, fees_no: Shares::ZERO };
        pool.c = pool.invariant();
        Ok(pool)
    }

    pub fn with_fee(mut self, fee: Frac) -> Self {
        self.fee = fee;
        self
    }

    pub fn kind(&self) -> AmmKind {
        if self.is_standard() {
            AmmKind::Cpmm
        } else {
            AmmKind::WeightedCpmm
        }
    }

    fn is_standard(&self) -> bool {
        self.p == Frac::new(1, 2).expect("nonzero")
    }

    pub fn reserve(&self, outcome: Outcome) -> Shares {
        match outcome {
            Outcome::Yes => self.x,
            Outcome::No => self.y,
        }
    }

    /// `x^p · y^(1−p)` from the current reserves, whole shares.
    pub fn invariant(&self) -> f64 {
        ln_invariant(self.x, self.y, self.p.to_f64()).exp()
    }

    /// Relative gap between the stored constant and the reserves.
    pub fn invariant_error(&self) -> f64 {
        (ln_invariant(self.x, self.y, self.p.to_f64()) - self.c.ln()).abs()
    }

    /// YES probability `p·y / (p·y + (1−p)·x)`, exact.
    pub fn implied_probability(&self) -> Frac {
        let py = self.p * self.y.as_frac();
        let qx = (Frac::one() - self.p) * self.x.as_frac();
        py / (py + qx)
    }

    pub fn probability(&self, outcome: Outcome) -> Frac {
        let yes = self.implied_probability();
        match outcome {
            Outcome::Yes => yes,
            Outcome::No => Frac::one() - yes,
        }
    }

    /// Exponent weights (chosen, other) for a trade on `outcome`.
    fn weights(&self, outcome: Outcome) -> (f64, f64) {
        let p = self.p.to_f64();
        match outcome {
            Outcome::Yes => (p, 1.0 - p),
            Outcome::No => (1.0 - p, p),
        }
    }

    fn with_reserves(&self, outcome: Outcome, chosen: Shares, other: Shares) -> CpmmPool {
        let mut next = self.clone();
        match outcome {
            Outcome::Yes => (next.x, next.y) = (chosen, other),
            Outcome::No => (next.y, next.x) = (chosen, other),
        }
        next.c = next.invariant();
        next
    }

    /// Smallest integer chosen-side reserve that keeps the invariant at
    /// least at its current value after the other side grows to `other_new`.
    fn chosen_after(&self, outcome: Outcome, other_new: Shares) -> AmmResult<(Shares, f64)> {
        let chosen = self.reserve(outcome);
        let other = self.reserve(outcome.opposite());
        if self.is_standard() {
            let k = chosen.0 as i128 * other.0 as i128;
            let next = div_ceil(k, other_new.0 as i128);
            let real = k as f64 / other_new.0 as f64;
            let residual = ((real.ln() + (other_new.0 as f64).ln()) - (k as f64).ln()).abs() / 2.0;
            return Ok((Shares(crate::money::narrow(next)?), residual));
        }
        let (wc, wo) = self.weights(outcome);
        let ln_c = wc * chosen.to_f64().ln() + wo * other.to_f64().ln();
        let real = chosen.0 as f64 * (other.0 as f64 / other_new.0 as f64).powf(wo / wc);
        let residual = (wc * (real / 1e6).ln() + wo * other_new.to_f64().ln() - ln_c).abs();
        // Invariant change as relative log-ratios of exact integer
        // differences: resolves one micro-share even on 1e12 reserves.
        let keeps = |n: i64| wc * ln_ratio(n, chosen.0) + wo * ln_ratio(other_new.0, other.0) >= 0.0;
        let mut next = real.ceil() as i64;
        while !keeps(next) {
            next += 1;
        }
        while next > 1 && keeps(next - 1) {
            next -= 1;
        }
        Ok((Shares(next), residual))
    }

    /// Mint-and-swap buy: `cash` mints that many complete sets, the
    /// unwanted side goes into the pool and Δ of the chosen side comes out.
    pub fn bet(&self, cash: UsdAmount, outcome: Outcome) -> AmmResult<(BetFill, CpmmPool)> {
        if cash.0 < 0 {
            return Err(AmmError::Negative(cash.0));
        }
        let minted = Shares(cash.0);
        if minted.0 == 0 {
            let fill = BetFill {
                outcome,
                cash,
                minted,
                fee: Shares::ZERO,
                withdrawn: Shares::ZERO,
                shares_out: Shares::ZERO,
                residual: 0.0,
            };
            return Ok((fill, self.clone()));
        }
        let fee = Shares(crate::money::narrow(div_ceil(
            minted.0 as i128 * self.fee.ratio().numer(),
            *self.fee.ratio().denom(),
        ))?);
        let swapped = minted - fee;
        let chosen = self.reserve(outcome);
        let other_new = self.reserve(outcome.opposite()).checked_add(swapped)?;
        let (chosen_new, residual) = self.chosen_after(outcome, other_new)?;
        if chosen_new.0 <= 0 || chosen_new > chosen {
            return Err(AmmError::ReserveExhausted(outcome));
        }
        let withdrawn = chosen - chosen_new;
        let mut next = self.with_reserves(outcome, chosen_new, other_new);
        match outcome.opposite() {
            Outcome::Yes => next.fees_yes += fee,
            Outcome::No => next.fees_no += fee,
        }
        let fill = BetFill { outcome, cash, minted, fee, withdrawn, shares_out: minted + withdrawn, residual };
        Ok((fill, next))
    }

    /// Inverse mint-and-swap: `shares` of `outcome` are split into a part
    /// deposited in the pool and a part merged with withdrawn opposite
    /// shares into cash. Pays the largest cash amount the invariant allows.
    /// Fees are charged on buys only.
    pub fn sell(&self, shares: Shares, outcome: Outcome) -> AmmResult<(SellFill, CpmmPool)> {
        if shares.0 < 0 {
            return Err(AmmError::Negative(shares.0));
        }
        let chosen = self.reserve(outcome);
        let other = self.reserve(outcome.opposite());
        let holds = |c: i64| -> bool {
            let cn = chosen.0 as i128 + shares.0 as i128 - c as i128;
            let on = other.0 as i128 - c as i128;
            if on <= 0 {
                return false;
            }
            if self.is_standard() {
                cn * on >= chosen.0 as i128 * other.0 as i128
            } else {
                let (wc, wo) = self.weights(outcome);
                wc * (cn as f64).ln() + wo * (on as f64).ln()
                    >= wc * (chosen.0 as f64).ln() + wo * (other.0 as f64).ln()
            }
        };
        let (mut lo, mut hi) = (0i64, shares.0.min(other.0 - 1));
        while lo < hi {
            let mid = lo + (hi - lo + 1) / 2;
            if holds(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let cash = lo;
        let next = self.with_reserves(outcome, chosen + shares - Shares(cash), other - Shares(cash));
        Ok((SellFill { outcome, shares_in: shares, cash_out: UsdAmount(cash) }, next))
    }

    /// Cash that moves the `outcome` probability up by at least `delta`.
    /// `None` if no finite bet reaches it.
    pub fn cash_to_move(&self, outcome: Outcome, delta: Frac) -> Option<UsdAmount> {
        let target = self.probability(outcome) + delta;
        if target >= Frac::one() {
            return None;
        }
        let reaches = |c: i64| self.bet(UsdAmount(c), outcome).is_ok_and(|(_, p)| p.probability(outcome) >= target);
        let mut hi = 1i64;
        while !reaches(hi) {
            hi = hi.checked_mul(2)?;
            if hi > i64::MAX / 4 {
                return None;
            }
        }
        let mut lo = hi / 2;
        while lo + 1 < hi {
            let mid = lo + (hi - lo) / 2;
            if reaches(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(UsdAmount(hi))
    }

    /// `1 − value / endowment` where value is the winning reserve at $1 a
    /// share. Negative means the pool gained.
    pub fn permanent_loss(&self, initial_endowment: UsdAmount, winner: Outcome) -> AmmResult<Frac> {
        if initial_endowment.0 <= 0 {
            return Err(AmmError::NotPositive);
        }
        let value = self.reserve(winner).as_frac();
        Ok(Frac::one() - value / initial_endowment.as_frac())
    }

    /// `key=value` lines: kind, x, y, p, C, fee, fees_yes, fees_no.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let kind = match self.kind() {
            AmmKind::Cpmm => "cpmm",
            _ => "weighted_cpmm",
        };
        let _ = writeln!(s, "kind={kind}");
        let _ = writeln!(s, "x={}", self.x.plain());
        let _ = writeln!(s, "y={}", self.y.plain());
        let _ = writeln!(s, "p={}", self.p);
        let _ = writeln!(s, "C={}", self.c);
        let _ = writeln!(s, "fee={}", self.fee);
        let _ = writeln!(s, "fees_yes={}", self.fees_yes.plain());
        let _ = writeln!(s, "fees_no={}", self.fees_no.plain());
        s
    }

    /// Parses [`CpmmPool::to_kv`] output. `C` is recomputed from the
    /// reserves and must agree with the stored value to 1e-12.
    pub fn from_kv(text: &str) -> AmmResult<Self> {
        let mut x = None;
        let mut y = None;
        let mut p = None;
        let mut c = None;
        let mut fee = Frac::zero();
        let mut fees_yes = Shares::ZERO;
        let mut fees_no = Shares::ZERO;
        let bad = |m: String| AmmError::Parse(m);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("line {}: expected key=value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "kind" => {}
                "x" => x = Some(Shares::parse(v)?),
                "y" => y = Some(Shares::parse(v)?),
                "p" => p = Some(Frac::parse(v)?),
                "C" => c = Some(v.parse::<f64>().map_err(|e| bad(format!("C: {e}")))?),
                "fee" => fee = Frac::parse(v)?,
                "fees_yes" => fees_yes = Shares::parse(v)?,
                "fees_no" => fees_no = Shares::parse(v)?,
                other => return Err(bad(format!("line {}: unknown key {other}", n + 1))),
            }
        }
        let need = |name: &str| bad(format!("missing {name}"));
        let mut pool =
            CpmmPool::new(x.ok_or_else(|| need("x"))?, y.ok_or_else(|| need("y"))?, p.ok_or_else(|| need("p"))?)?;
        if let Some(c) = c {
            if ((c.ln() - pool.c.ln()).abs()) > 1e-12 {
                return Err(bad(format!("C={c} does not match reserves ({})", pool.c)));
            }
        }
        pool.fee = fee;
        pool.fees_yes = fees_yes;
        pool.fees_no = fees_no;
        Ok(pool)
    }
}

/// Seeds a pool from a USD subsidy at a prior YES probability.
///
/// Standard mode deposits the largest `(x, y)` with `y/(x+y) = prior` and
/// both sides within the minted amount; the rest stays with the LP as an
/// implicit bet. Weighted mode deposits everything and sets `p = prior`.
pub fn seed_pool(subsidy: UsdAmount, prior: Frac, mode: SeedMode) -> AmmResult<(CpmmPool, LpAccount)> {
    if prior <= Frac::zero() || prior >= Frac::one() {
        return Err(AmmError::Probability(prior.to_string()));
    }
    if subsidy.0 <= 0 {
        return Err(AmmError::NotPositive);
    }
    let s = Shares(subsidy.0);
    let half = Frac::new(1, 2)?;
    let (pool, leftover) = match mode {
        SeedMode::Weighted => (CpmmPool::new(s, s, prior)?, None),
        SeedMode::Standard if prior == half => (CpmmPool::new(s, s, half)?, None),
        SeedMode::Standard if prior < half => {
            let y = s.mul_frac_floor(prior / (Frac::one() - prior))?;
            (CpmmPool::new(s, y, half)?, Some((Outcome::No, s - y)))
        }
        SeedMode::Standard => {
            let x = s.mul_frac_floor((Frac::one() - prior) / prior)?;
            (CpmmPool::new(x, s, half)?, Some((Outcome::Yes, s - x)))
        }
    };
    Ok((pool, LpAccount { initial_endowment: subsidy, leftover, pool_share: Frac::one() }))
}

// ---------------------------------------------------------------- fuzzing

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpmmFuzzStats {
    pub bets: usize,
    /// Largest pre-rounding invariant residual seen.
    pub max_residual: f64,
    /// Largest gap between stored C and the reserves.
    pub max_stored_error: f64,
    /// True when C never decreased.
    pub c_monotone: bool,
    pub final_pool: CpmmPool,
}

/// Runs `n` random bets of up to `max_cash` on either side.
pub fn fuzz_cpmm(pool: &CpmmPool, seed: u64, n: usize, max_cash: UsdAmount) -> AmmResult<CpmmFuzzStats> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut cur = pool.clone();
    let mut stats =
        CpmmFuzzStats { bets: 0, max_residual: 0.0, max_stored_error: 0.0, c_monotone: true, final_pool: cur.clone() };
    for _ in 0..n {
        let cash = UsdAmount(rng.random_range(1..=max_cash.0.max(1)));
        let outcome = if rng.random::<bool>() { Outcome::Yes } else { Outcome::No };
        let (fill, next) = cur.bet(cash, outcome)?;
        stats.max_residual = stats.max_residual.max(fill.residual);
        stats.max_stored_error = stats.max_stored_error.max(next.invariant_error());
        if next.c < cur.c * (1.0 - 1e-15) {
            stats.c_monotone = false;
        }
        stats.bets += 1;
        cur = next;
    }
    stats.final_pool = cur;
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LmsrFuzzStats {
    pub trades: usize,
    /// Operator loss if YES wins and if NO wins.
    pub loss_yes: f64,
    pub loss_no: f64,
    pub bound: f64,
}

/// Random buys and sells against an LMSR maker; reports the operator's
/// loss under either resolution.
pub fn fuzz_lmsr(b: f64, seed: u64, n: usize, max_trade: f64) -> AmmResult<LmsrFuzzStats> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut st = LmsrState::new(b)?;
    let mut collected = 0.0;
    for _ in 0..n {
        let outcome = if rng.random::<bool>() { Outcome::Yes } else { Outcome::No };
        let held = match outcome {
            Outcome::Yes => st.q_yes,
            Outcome::No => st.q_no,
        };
        // traders can only sell what is outstanding
        let dq = rng.random_range(-held.min(max_trade)..=max_trade);
        let (paid, next) = st.trade(outcome, dq);
        collected += paid;
        st = next;
    }
    Ok(LmsrFuzzStats { trades: n, loss_yes: st.q_yes - collected, loss_no: st.q_no - collected, bound: st.max_loss() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sh(v: f64) -> Shares {
        Shares::from_f64(v).unwrap()
    }

    fn usd(v: f64) -> UsdAmount {
        UsdAmount::from_f64(v).unwrap()
    }

    fn frac(s: &str) -> Frac {
        Frac::parse(s).unwrap()
    }

    fn pool(x: f64, y: f64, p: &str) -> CpmmPool {
        CpmmPool::new(sh(x), sh(y), frac(p)).unwrap()
    }

    /// Bisection root-find for the chosen-side reserve after a YES bet, on
    /// `x'^p y'^(1−p) = x^p y^(1−p)`.
    fn oracle_yes_reserve(x: f64, y: f64, p: f64, m: f64) -> f64 {
        let target = p * x.ln() + (1.0 - p) * y.ln();
        let (mut lo, mut hi) = (1e-12, x);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p * mid.ln() + (1.0 - p) * (y + m).ln() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    #[test]
    fn lmsr_cost_examples() {
        let s = LmsrState::new(1.0).unwrap();
        assert!((s.cost() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((s.max_loss() - std::f64::consts::LN_2).abs() < 1e-15);
        let big = LmsrState { b: 1.0, q_yes: 1000.0, q_no: 0.0 };
        assert!(big.cost().is_finite());
        assert!((big.cost() - 1000.0).abs() < 1e-9);
        let b = LmsrState::new(50.0).unwrap();
        assert!((b.cost() - 50.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn lmsr_move_cost_examples() {
        assert_eq!(lmsr_move_cost(0.3, 0.3, 2.0).unwrap(), 0.0);
        assert!((lmsr_move_cost(0.5, 0.75, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(lmsr_move_cost(0.5, 1.0 - 1e-9, 1.0).unwrap() > 20.0);
        assert!(lmsr_move_cost(0.5, 1.0, 1.0).is_err());
        assert!(LmsrState::new(0.0).is_err());
    }

    #[test]
    fn lmsr_move_cost_matches_trade() {
        // buying YES from 0.5 to 0.75 through the cost function costs the same
        let st = LmsrState::new(3.0).unwrap();
        let dq = 3.0 * 3f64.ln();
        let (paid, next) = st.trade(Outcome::Yes, dq);
        assert!((next.price(Outcome::Yes) - 0.75).abs() < 1e-12);
        assert!((paid - lmsr_move_cost(0.5, 0.75, 3.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn seed_examples() {
        let (p, lp) = seed_pool(usd(100.0), frac("1/3"), SeedMode::Standard).unwrap();
        assert_eq!((p.x, p.y), (sh(100.0), sh(50.0)));
        assert_eq!(lp.leftover, Some((Outcome::No, sh(50.0))));
        assert_eq!(p.implied_probability(), frac("1/3"));

        let (p, lp) = seed_pool(usd(100.0), frac("1/2"), SeedMode::Standard).unwrap();
        assert_eq!((p.x, p.y, lp.leftover), (sh(100.0), sh(100.0), None));

        let (p, lp) = seed_pool(usd(100.0), frac("1/3"), SeedMode::Weighted).unwrap();
        assert_eq!((p.x, p.y, p.p, lp.leftover), (sh(100.0), sh(100.0), frac("1/3"), None));
        assert_eq!(p.kind(), AmmKind::WeightedCpmm);

        let (p, lp) = seed_pool(usd(100.0), frac("3/4"), SeedMode::Standard).unwrap();
        // x = 33.333333 after flooring, so the prior is hit to within a micro-share
        assert_eq!(p.y, sh(100.0));
        assert!((p.implied_probability().to_f64() - 0.75).abs() < 1e-8);
        assert_eq!(lp.leftover, Some((Outcome::Yes, p.y - p.x)));

        assert!(seed_pool(usd(100.0), Frac::zero(), SeedMode::Standard).is_err());
        assert!(seed_pool(usd(100.0), Frac::one(), SeedMode::Weighted).is_err());
    }

    #[test]
    fn implied_probability_examples() {
        assert_eq!(pool(100.0, 50.0, "1/2").implied_probability(), frac("1/3"));
        assert_eq!(pool(100.0, 100.0, "1/3").implied_probability(), frac("1/3"));
        assert_eq!(pool(7.0, 7.0, "1/2").implied_probability(), frac("1/2"));
    }

    #[test]
    fn weighted_probability_matches_small_swap_price() {
        // marginal YES price from a tiny bet: cash / shares received
        for (x, y, p) in [(100.0, 100.0, "1/3"), (80.0, 140.0, "0.2"), (300.0, 50.0, "0.7")] {
            let pl = pool(x, y, p);
            let m = 1e-6;
            let pf = pl.p.to_f64();
            let x_new = oracle_yes_reserve(x, y, pf, m);
            let price = m / (m + (x - x_new));
            let formula = pl.implied_probability().to_f64();
            assert!((price - formula).abs() < 1e-6, "{p}: swap {price} vs formula {formula}");
        }
    }

    #[test]
    fn standard_bet_example() {
        let (fill, next) = pool(100.0, 100.0, "1/2").bet(usd(100.0), Outcome::Yes).unwrap();
        assert_eq!(fill.shares_out, sh(150.0));
        assert_eq!((next.x, next.y), (sh(50.0), sh(200.0)));
        // oracle: x' · y' = 10,000
        let x_oracle = oracle_yes_reserve(100.0, 100.0, 0.5, 100.0);
        assert!((x_oracle - 50.0).abs() < 1e-9);
        assert!(next.implied_probability() > frac("1/2"));
    }

    #[test]
    fn zero_bet_is_noop() {
        let pl = pool(100.0, 100.0, "1/2");
        let (fill, next) = pl.bet(UsdAmount::ZERO, Outcome::No).unwrap();
        assert_eq!(fill.shares_out, Shares::ZERO);
        assert_eq!(next, pl);
        assert!(pl.bet(UsdAmount(-1), Outcome::No).is_err());
    }

    #[test]
    fn weighted_bet_example() {
        let (fill, next) = pool(100.0, 100.0, "1/3").bet(usd(100.0), Outcome::Yes).unwrap();
        assert_eq!(fill.withdrawn, sh(75.0));
        assert_eq!(fill.shares_out, sh(175.0));
        assert_eq!((next.x, next.y), (sh(25.0), sh(200.0)));
        let x_oracle = oracle_yes_reserve(100.0, 100.0, 1.0 / 3.0, 100.0);
        assert!((x_oracle - 25.0).abs() < 1e-9);
        assert!(fill.residual < 1e-12);
    }

    #[test]
    fn no_bet_mirrors_yes_bet() {
        let (fy, _) = pool(100.0, 60.0, "1/2").bet(usd(10.0), Outcome::Yes).unwrap();
        let (fn_, _) = pool(60.0, 100.0, "1/2").bet(usd(10.0), Outcome::No).unwrap();
        assert_eq!(fy.shares_out, fn_.shares_out);
    }

    #[test]
    fn fee_is_collected_on_swapped_side() {
        let pl = pool(100.0, 100.0, "1/2").with_fee(frac("0.01"));
        let (fill, next) = pl.bet(usd(100.0), Outcome::Yes).unwrap();
        assert_eq!(fill.fee, sh(1.0));
        assert_eq!(next.fees_no, sh(1.0));
        assert_eq!(next.y, sh(199.0));
        assert!(fill.shares_out < sh(150.0));
    }

    #[test]
    fn permanent_loss_examples() {
        let drifted = pool(10.0, 1000.0, "1/2");
        // the drifted state is on the original curve
        assert_eq!(drifted.x.0 as i128 * drifted.y.0 as i128, sh(100.0).0 as i128 * sh(100.0).0 as i128);
        assert_eq!(drifted.permanent_loss(usd(100.0), Outcome::Yes).unwrap(), frac("0.9"));
        assert_eq!(drifted.permanent_loss(usd(100.0), Outcome::No).unwrap(), frac("-9"));
        let fresh = pool(100.0, 100.0, "1/2");
        for w in [Outcome::Yes, Outcome::No] {
            assert_eq!(fresh.permanent_loss(usd(100.0), w).unwrap(), Frac::zero());
        }
    }

    #[test]
    fn drift_reaches_the_loss_example() {
        // a YES-heavy NO flow takes (100,100) to (10,1000) exactly
        let pl = pool(100.0, 100.0, "1/2");
        let (_, next) = pl.bet(usd(900.0), Outcome::No).unwrap();
        assert_eq!((next.x, next.y), (sh(1000.0), sh(10.0)));
        let (_, mirrored) = pl.bet(usd(900.0), Outcome::Yes).unwrap();
        assert_eq!((mirrored.x, mirrored.y), (sh(10.0), sh(1000.0)));
    }

    #[test]
    fn sell_reverses_bet() {
        for p in ["1/2", "1/3"] {
            let pl = pool(100.0, 100.0, p);
            let (fill, mid) = pl.bet(usd(40.0), Outcome::Yes).unwrap();
            let (sold, back) = mid.sell(fill.shares_out, Outcome::Yes).unwrap();
            assert!(sold.cash_out <= usd(40.0));
            assert!(usd(40.0).0 - sold.cash_out.0 <= 2, "{p}: {}", sold.cash_out);
            assert!(back.implied_probability() < mid.implied_probability());
        }
    }

    #[test]
    fn kv_round_trip() {
        let pl = pool(100.0, 50.0, "1/3").with_fee(frac("0.002"));
        let text = pl.to_kv();
        assert!(text.contains("x=100.000000"));
        assert!(text.contains("p=1/3"));
        let back = CpmmPool::from_kv(&text).unwrap();
        assert_eq!(back, pl);
        assert!(CpmmPool::from_kv("x=1\ny=1\np=0.5\nC=5\n").is_err());
        assert!(CpmmPool::from_kv("x=1\np=0.5\n").is_err());
    }

    #[test]
    fn cash_to_move_one_point() {
        let pl = pool(100.0, 100.0, "1/2");
        let c = pl.cash_to_move(Outcome::Yes, frac("0.01")).unwrap();
        let (_, after) = pl.bet(c, Outcome::Yes).unwrap();
        assert!(after.implied_probability() >= frac("0.51"));
        let (_, before) = pl.bet(UsdAmount(c.0 - 1), Outcome::Yes).unwrap();
        assert!(before.implied_probability() < frac("0.51"));
    }

    #[test]
    fn cpmm_fuzz_keeps_invariant() {
        for p in ["1/2", "1/3", "0.8"] {
            let stats = fuzz_cpmm(&pool(100.0, 100.0, p), 7, 1000, usd(20.0)).unwrap();
            assert!(stats.max_residual <= 1e-12, "{p}: {}", stats.max_residual);
            assert!(stats.max_stored_error <= 1e-12);
            assert!(stats.c_monotone);
        }
    }

    #[test]
    fn lmsr_fuzz_bounded_loss() {
        for seed in 0..20 {
            let s = fuzz_lmsr(10.0, seed, 500, 5.0).unwrap();
            assert!(s.loss_yes.max(s.loss_no) <= s.bound + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn bet_moves_probability_toward_outcome(x in 1_000_000i64..10_000_000_000, y in 1_000_000i64..10_000_000_000, cash in 10_000i64..1_000_000_000, yes in any::<bool>(), p in prop::sample::select(vec!["1/2", "1/3", "0.9"])) {
            let pl = CpmmPool::new(Shares(x), Shares(y), frac(p)).unwrap();
            let cash = UsdAmount(cash);
            let outcome = if yes { Outcome::Yes } else { Outcome::No };
            let (fill, next) = pl.bet(cash, outcome).unwrap();
            prop_assert!(next.probability(outcome) > pl.probability(outcome));
            prop_assert!(next.c >= pl.c * (1.0 - 1e-15));
            prop_assert!(fill.shares_out >= fill.minted);
            let (sold, back) = next.sell(fill.shares_out, outcome).unwrap();
            prop_assert!(sold.cash_out <= cash);
            prop_assert!(back.probability(outcome) < next.probability(outcome));
        }

        #[test]
        fn lmsr_path_independent(trades in prop::collection::vec((any::<bool>(), 0.0f64..10.0), 1..30), seed in any::<u64>()) {
            let b = 7.0;
            let run = |order: &[(bool, f64)]| {
                let mut st = LmsrState::new(b).unwrap();
                let mut paid = 0.0;
                for &(yes, dq) in order {
                    let (c, n) = st.trade(if yes { Outcome::Yes } else { Outcome::No }, dq);
                    paid += c;
                    st = n;
                }
                paid
            };
            let mut shuffled = trades.clone();
            let mut rng = SplitMix64::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            prop_assert!((run(&trades) - run(&shuffled)).abs() < 1e-9);
        }
    }
}
