//! Batch runners over independent instances: fuzzed LMSR sequences, swap
//! closed forms against a root-find, keeper random-walk paths and whole
//! scenarios. Results come back in input order whichever mode runs them.
//!
//! `Mode::Parallel` uses rayon when the `parallel` feature is on and falls
//! back to the sequential loop otherwise.

use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

use crate::amm::{fuzz_lmsr, AmmResult, CpmmPool, LmsrState};
use crate::money::{BtcAmount, BtcUsdRate, Frac, Shares, Side, TickSize, UsdAmount};
use crate::redirect::{open_position, RedirectParams, RedirectResult};
use crate::scenario::path::random_walk;
use crate::scenario::{run_scenario, ComparisonReport, ScenarioConfig, ScenarioResult};
use crate::venue::{Outcome, OwnerId, Venue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

impl Default for Mode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

/// `f` over `items`, order preserved.
pub fn map<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Independent per-instance seeds derived from one base seed.
pub fn seeds(base: u64, n: usize) -> Vec<u64> {
    let mut rng = SplitMix64::seed_from_u64(base);
    (0..n).map(|_| rng.random::<u64>()).collect()
}

// ---------------------------------------------------------------- LMSR

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LmsrBatch {
    pub b: f64,
    pub sequences: usize,
    /// Largest `loss − b·ln 2` seen (≤ 0 when the bound holds).
    pub max_excess: f64,
    /// Largest gap in total cost between a sequence and its reversal.
    pub max_order_gap: f64,
}

/// Total cost of applying `trades` in order from a fresh market.
fn sequence_cost(b: f64, trades: &[(Outcome, f64)]) -> AmmResult<f64> {
    let mut s = LmsrState::new(b)?;
    let mut total = 0.0;
    for &(o, dq) in trades {
        let (c, next) = s.trade(o, dq);
        total += c;
        s = next;
    }
    Ok(total)
}

pub fn lmsr_batch(mode: Mode, b: f64, sequences: usize, trades: usize, seed: u64) -> AmmResult<LmsrBatch> {
    let runs = map(mode, &seeds(seed, sequences), |&s| -> AmmResult<(f64, f64)> {
        let stats = fuzz_lmsr(b, s, trades, 5.0 * b)?;
        let excess = stats.loss_yes.max(stats.loss_no) - stats.bound;
        let mut rng = SplitMix64::seed_from_u64(s ^ 0x5eed);
        let seq: Vec<(Outcome, f64)> = (0..trades)
            .map(|_| (if rng.random::<bool>() { Outcome::Yes } else { Outcome::No }, rng.random_range(0.0..2.0 * b)))
            .collect();
        let mut rev = seq.clone();
        rev.reverse();
        let gap = (sequence_cost(b, &seq)? - sequence_cost(b, &rev)?).abs();
        Ok((excess, gap))
    });
    let mut out = LmsrBatch { b, sequences, max_excess: f64::NEG_INFINITY, max_order_gap: 0.0 };
    for r in runs {
        let (e, g) = r?;
        out.max_excess = out.max_excess.max(e);
        out.max_order_gap = out.max_order_gap.max(g);
    }
    Ok(out)
}

// ---------------------------------------------------------------- swaps

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapCheck {
    pub instances: usize,
    pub weighted: usize,
    /// Largest |closed form − root-find| in shares out, micro-shares.
    pub max_gap_micros: f64,
}

/// Chosen-side reserve `r` solving `wc·ln(r/chosen) + wo·ln(other_new/other) = 0`
/// by bisection, in relative log form so micro-share steps stay visible.
fn root_find(chosen: f64, other: f64, other_new: f64, wc: f64, wo: f64) -> f64 {
    let other_term = wo * ((other_new - other) / other).ln_1p();
    let g = |r: f64| wc * ((r - chosen) / chosen).ln_1p() + other_term;
    let (mut lo, mut hi) = (0.0f64, chosen);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn random_instance(seed: u64) -> AmmResult<(CpmmPool, UsdAmount, Outcome)> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let x = Shares(rng.random_range(1_000_000..=1_000_000_000_000));
    let y = Shares(rng.random_range(1_000_000..=1_000_000_000_000));
    let p = if rng.random::<bool>() { Frac::new(1, 2)? } else { Frac::new(rng.random_range(5..=95), 100)? };
    let fee = Frac::new(rng.random_range(0..=30), 1000)?;
    let pool = CpmmPool::new(x, y, p)?.with_fee(fee);
    let cash = UsdAmount(rng.random_range(1..=x.0.max(y.0)));
    let outcome = if rng.random::<bool>() { Outcome::Yes } else { Outcome::No };
    Ok((pool, cash, outcome))
}

/// Closed-form bets against a bisection on the invariant. The closed form
/// rounds the chosen reserve up, so the gap stays below one micro-share;
/// bets that would drain a side leave the one-micro-share floor, where the
/// gap approaches but does not reach 1.
pub fn swap_oracle_batch(mode: Mode, instances: usize, seed: u64) -> AmmResult<SwapCheck> {
    let runs = map(mode, &seeds(seed, instances), |&s| -> AmmResult<(f64, bool)> {
        let (pool, cash, outcome) = random_instance(s)?;
        let (fill, _) = pool.bet(cash, outcome)?;
        let pw = pool.p.to_f64();
        let (wc, wo) = match outcome {
            Outcome::Yes => (pw, 1.0 - pw),
            Outcome::No => (1.0 - pw, pw),
        };
        let chosen = pool.reserve(outcome).0 as f64;
        let other = pool.reserve(outcome.opposite()).0 as f64;
        let fee = (Frac::from_integer(cash.0 as i128) * pool.fee).ratio().ceil().to_integer() as f64;
        let other_new = other + cash.0 as f64 - fee;
        let r = root_find(chosen, other, other_new, wc, wo);
        let oracle_out = cash.0 as f64 + (chosen - r);
        Ok(((fill.shares_out.0 as f64 - oracle_out).abs(), pool.p != Frac::new(1, 2)?))
    });
    let mut out = SwapCheck { instances, weighted: 0, max_gap_micros: 0.0 };
    for r in runs {
        let (gap, weighted) = r?;
        out.max_gap_micros = out.max_gap_micros.max(gap);
        out.weighted += weighted as usize;
    }
    Ok(out)
}

// ---------------------------------------------------------------- keeper

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeeperPathSpec {
    pub params: RedirectParams,
    pub initial_usd: i64,
    pub ticks: usize,
    pub vol: f64,
    pub drift: f64,
    pub tick_seconds: u64,
    /// NO bid depth on the USD venue, whole shares.
    pub bid_depth: i64,
}

impl Default for KeeperPathSpec {
    fn default() -> Self {
        Self {
            params: RedirectParams::default(),
            initial_usd: 100_000,
            ticks: 200,
            vol: 0.03,
            drift: -0.002,
            tick_seconds: 86_400,
            bid_depth: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct KeeperPathOutcome {
    /// Ticks where HF < 1 although the keeper still had an in-cap action.
    pub violations: u32,
    pub liquidated: bool,
    pub keeper_actions: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KeeperBatch {
    pub paths: usize,
    pub violations: u32,
    pub liquidated_paths: usize,
    pub paths_with_actions: usize,
}

fn keeper_venue(depth: i64) -> RedirectResult<Venue> {
    let mut v = Venue::usd("source", TickSize::new(10_000)?, Frac::zero());
    let lp = OwnerId(1);
    let size = Shares(depth * 1_000_000);
    v.place_limit(lp, Outcome::No, Side::Ask, 800_000, Shares(1_000_000 * 1_000_000))?;
    v.place_limit(lp, Outcome::No, Side::Bid, 780_000, size)?;
    v.place_limit(lp, Outcome::No, Side::Bid, 770_000, size)?;
    Ok(v)
}

pub fn keeper_path(spec: &KeeperPathSpec, seed: u64) -> RedirectResult<KeeperPathOutcome> {
    let start = BtcUsdRate::from_usd(spec.initial_usd)?;
    let path = random_walk(start, spec.drift, spec.vol, spec.ticks, seed)?;
    let mut venue = keeper_venue(spec.bid_depth)?;
    let mut pos =
        open_position(OwnerId(7), BtcAmount(100_000_000), start, spec.params, &mut venue, 800_000, Outcome::No, 0)?;
    let mut out = KeeperPathOutcome::default();
    for &rate in path.iter().skip(1) {
        pos.accrue(spec.tick_seconds)?;
        out.keeper_actions += pos.keeper_step(rate, &mut venue)?.len() as u32;
        if pos.health_factor(rate).is_liquidatable() && pos.keeper_has_room(&venue)? {
            out.violations += 1;
        }
        if pos.check_liquidation(rate)?.is_some() {
            out.liquidated = true;
            break;
        }
    }
    Ok(out)
}

pub fn keeper_batch(mode: Mode, spec: &KeeperPathSpec, paths: usize, seed: u64) -> RedirectResult<KeeperBatch> {
    let runs = map(mode, &seeds(seed, paths), |&s| keeper_path(spec, s));
    let mut out = KeeperBatch { paths, violations: 0, liquidated_paths: 0, paths_with_actions: 0 };
    for r in runs {
        let r = r?;
        out.violations += r.violations;
        out.liquidated_paths += r.liquidated as usize;
        out.paths_with_actions += (r.keeper_actions > 0) as usize;
    }
    Ok(out)
}

// ---------------------------------------------------------------- scenarios

/// Runs configs independently; results in config order.
pub fn run_scenarios(mode: Mode, configs: &[ScenarioConfig]) -> Vec<ScenarioResult<ComparisonReport>> {
    map(mode, configs, run_scenario)
}

/// One config under `n` seeds.
pub fn seed_sweep(mode: Mode, cfg: &ScenarioConfig, base: u64, n: usize) -> Vec<ScenarioResult<ComparisonReport>> {
    let configs: Vec<ScenarioConfig> =
        seeds(base, n).into_iter().map(|s| ScenarioConfig { seed: s, ..cfg.clone() }).collect();
    run_scenarios(mode, &configs)
}
