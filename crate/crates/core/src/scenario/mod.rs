//! Deterministic scenario driver. One config drives a BTC/USD path, a
//! scripted source book and a resolution; each enabled mechanism runs in its
//! own copy of that world and the results land in one comparison report.
//!
//! Tick order: rate, book script, pending hedges, quote refresh (or unwind),
//! downstream user flow, AMM bets, redirect accrual / keeper / liquidation.
//! At the resolution tick every mechanism settles at that tick's rate.

pub mod config;
pub mod path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::amm::{seed_pool, AmmError, CpmmPool, LpAccount};
use crate::crossmm::{CrossMaker, CrossMmError, CrossMmParams};
use crate::money::{
    btc_to_usd, format_f64, usd_to_btc, usd_to_btc_ceil, BtcAmount, BtcUsdRate, FixedPoint, Frac, MoneyError, Shares,
    TickSize, UsdAmount, MICROS_PER_USD, SATS_PER_BTC,
};
use crate::redirect::{open_position, RedirectError, RedirectPosition};
use crate::venue::{Outcome, OwnerId, Venue, VenueError};

pub use config::{ConfigError, ConfigIssue, Mechanism, Preset, ScenarioConfig, PRESETS};

const LIQUIDITY: OwnerId = OwnerId(1);
const MAKER: OwnerId = OwnerId(2);
const USER: OwnerId = OwnerId(3);
const BORROWER: OwnerId = OwnerId(4);

pub const CAPITAL_EFFICIENCY_DEFINITION: &str = "capital_efficiency = working capital locked / (quoted depth x $1); \
crossmm: USD per hedged set / $1; amm: subsidy / shares bought by the bet that moves YES up 1pp; \
redirect: collateral USD value / shares bought";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid config:\n{0}")]
    Config(#[from] ConfigError),
    #[error("mechanism `{0}` has no section in this config")]
    MissingMechanism(Mechanism),
    #[error("crossmm: {0}")]
    CrossMm(#[from] CrossMmError),
    #[error("amm: {0}")]
    Amm(#[from] AmmError),
    #[error("redirect: {0}")]
    Redirect(#[from] RedirectError),
    #[error("venue: {0}")]
    Venue(#[from] VenueError),
    #[error(transparent)]
    Money(#[from] MoneyError),
}

impl ScenarioError {
    pub fn is_config(&self) -> bool {
        matches!(self, ScenarioError::Config(_) | ScenarioError::MissingMechanism(_))
    }
}

pub type ScenarioResult<T> = Result<T, ScenarioError>;

/// `belief − annual_rate × years`, clamped to `[0, 1]` (simple, not compounded).
pub fn fair_value_adjust(belief: Frac, annual_rate: Frac, years: Frac) -> Result<Frac, MoneyError> {
    if belief.is_negative() || belief > Frac::one() {
        return Err(MoneyError::Parse { input: belief.to_string(), decimals: 0 });
    }
    Ok((belief - annual_rate * years).clamp_unit())
}

fn ser_opt<T: FixedPoint, S: serde::Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_f64(v.as_f64()),
        None => s.serialize_none(),
    }
}

/// One comparison row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub mechanism: Mechanism,
    #[serde(with = "crate::money::decimal")]
    pub user_btc_pnl: BtcAmount,
    #[serde(serialize_with = "ser_opt")]
    pub maker_pnl_usd: Option<UsdAmount>,
    pub liquidation_count: u32,
    pub capital_efficiency: Option<f64>,
    pub fx_exposure: bool,
    #[serde(with = "crate::money::decimal")]
    pub user_principal_loss_btc: BtcAmount,
    /// Sum of absolute accounting-identity residuals, in USD.
    pub accounting_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub mechanism: Mechanism,
    pub tick: u64,
    pub event: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub winner: Outcome,
    pub settlement_rate: BtcUsdRate,
    pub definition: &'static str,
    pub rows: Vec<ReportRow>,
    pub details: Vec<(Mechanism, Value)>,
    #[serde(skip)]
    pub events: Vec<EventRecord>,
}

impl ComparisonReport {
    pub fn row(&self, m: Mechanism) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.mechanism == m)
    }

    pub fn detail(&self, m: Mechanism) -> Option<&Value> {
        self.details.iter().find(|(k, _)| *k == m).map(|(_, v)| v)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "mechanism",
            "user_btc_pnl",
            "maker_pnl_usd",
            "liquidation_count",
            "capital_efficiency",
            "fx_exposure",
            "user_principal_loss_btc",
            "accounting_residual",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.mechanism.name().to_string(),
                r.user_btc_pnl.plain(),
                r.maker_pnl_usd.map(|v| v.plain()).unwrap_or_default(),
                r.liquidation_count.to_string(),
                r.capital_efficiency.map(|v| format!("{v:.6}")).unwrap_or_default(),
                r.fx_exposure.to_string(),
                r.user_principal_loss_btc.plain(),
                format_f64(r.accounting_residual),
            ])
            .expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
        format!("# {CAPITAL_EFFICIENCY_DEFINITION}\n{body}")
    }

    pub fn to_json(&self) -> String {
        let details: serde_json::Map<String, Value> =
            self.details.iter().map(|(m, v)| (m.name().to_string(), v.clone())).collect();
        let doc = json!({
            "scenario": self.scenario,
            "seed": self.seed,
            "ticks": self.ticks,
            "winner": self.winner,
            "settlement_rate": self.settlement_rate.to_f64(),
            "capital_efficiency_definition": self.definition,
            "rows": self.rows,
            "details": details,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn events_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}

/// Shared world state one mechanism runs against.
struct World<'a> {
    cfg: &'a ScenarioConfig,
    path: Vec<BtcUsdRate>,
    source: Venue,
    events: Vec<EventRecord>,
    mechanism: Mechanism,
}

impl<'a> World<'a> {
    fn new(cfg: &'a ScenarioConfig, path: Vec<BtcUsdRate>, mechanism: Mechanism) -> ScenarioResult<Self> {
        let tick = TickSize::new(micros(cfg.source.tick))?;
        let mut source = Venue::usd("source", tick, cfg.fees.source_taker);
        for l in &cfg.source.book {
            source.place_limit(LIQUIDITY, l.outcome, l.side, micros(l.price), Shares(micros(l.size)))?;
        }
        Ok(Self { cfg, path, source, events: Vec::new(), mechanism })
    }

    fn rate(&self, t: u64) -> BtcUsdRate {
        self.path[(t as usize).min(self.path.len() - 1)]
    }

    fn apply_script(&mut self, t: u64) -> ScenarioResult<()> {
        for s in self.cfg.source.script.iter().filter(|s| s.tick == t) {
            let levels: Vec<(i64, Shares)> = s.levels.iter().map(|(p, q)| (micros(*p), Shares(micros(*q)))).collect();
            self.source.replace_side(LIQUIDITY, s.outcome, s.side, &levels)?;
        }
        Ok(())
    }

    fn log<E: Serialize>(&mut self, tick: u64, event: &E) {
        let event = serde_json::to_value(event).expect("event serializes");
        self.events.push(EventRecord { mechanism: self.mechanism, tick, event });
    }
}

fn micros(f: Frac) -> i64 {
    config::fixed(f, MICROS_PER_USD).expect("validated")
}

fn usd_f64(micro: i64) -> f64 {
    micro as f64 / MICROS_PER_USD as f64
}

fn sats_to_usd_f64(sats: i64, rate: BtcUsdRate) -> f64 {
    sats as f64 / SATS_PER_BTC as f64 * rate.to_f64()
}

struct MechanismRun {
    row: ReportRow,
    detail: Value,
    events: Vec<EventRecord>,
}

fn run_crossmm(cfg: &ScenarioConfig, path: Vec<BtcUsdRate>) -> ScenarioResult<MechanismRun> {
    let x = cfg.crossmm.as_ref().ok_or(ScenarioError::MissingMechanism(Mechanism::Crossmm))?;
    let mut w = World::new(cfg, path, Mechanism::Crossmm)?;
    let tick = TickSize::new(x.downstream_tick_sats)?;
    let mut downstream = Venue::btc("downstream", tick, cfg.fees.downstream_taker, w.rate(0))?;
    let params = CrossMmParams {
        fee: UsdAmount(micros(x.fee)),
        put_premium: BtcAmount(x.put_premium_sats),
        hedge_notional: x.hedge_notional,
        quote_size: Shares(micros(x.quote_size)),
        quote_outcomes: x.quote_outcomes.clone(),
        max_retries: x.hedge_retries,
        hedge_delay: x.hedge_delay,
        tick,
        expiry_tick: cfg.resolution.tick,
    };
    let mut maker = CrossMaker::new(MAKER, params);
    let res = cfg.resolution.tick;
    for t in 0..res {
        let rate = w.rate(t);
        w.apply_script(t)?;
        let mut evs = maker.process_pending(t, &mut w.source, &mut downstream, rate)?;
        if x.unwind_tick == Some(t) {
            evs.extend(maker.begin_unwind(t, &mut w.source, &mut downstream, rate)?);
        } else {
            evs.extend(maker.refresh_quotes(t, &mut w.source, &mut downstream, rate)?);
        }
        for f in x.flow.iter().filter(|f| f.tick == t) {
            let exec = downstream.execute_market(USER, f.outcome, f.side.side(), Shares(micros(f.size)))?;
            w.log(t, &json!({"event": "user_order", "outcome": f.outcome, "side": f.side, "filled": exec.filled, "unfilled": exec.unfilled}));
            for fill in &exec.fills {
                evs.extend(maker.on_fill(t, fill, &mut w.source, &mut downstream, rate)?);
            }
        }
        for e in &evs {
            w.log(t, e);
        }
    }
    maker.stop(&mut downstream);
    let spot = w.rate(res);
    let winner = cfg.resolution.winner;
    let (pnl, evs) = maker.settle(res, winner, spot, &downstream)?;
    for e in &evs {
        w.log(res, e);
    }
    w.source.resolve(winner)?;
    w.source.redeem_all()?;
    downstream.resolve(winner)?;
    downstream.redeem_all()?;

    let (src_cash, src_yes, src_no) = w.source.conservation_residuals();
    let (dn_cash, dn_yes, dn_no) = downstream.conservation_residuals();
    let residual = usd_f64(src_cash.abs() + src_yes.0.abs() + src_no.0.abs())
        + sats_to_usd_f64(dn_cash.abs(), spot)
        + usd_f64(dn_yes.0.abs() + dn_no.0.abs());
    let user_pnl = BtcAmount(downstream.holdings(USER).cash);
    let row = ReportRow {
        mechanism: Mechanism::Crossmm,
        user_btc_pnl: user_pnl,
        maker_pnl_usd: Some(pnl),
        liquidation_count: 0,
        capital_efficiency: maker.capital_per_set().map(|c| usd_f64(c.0)),
        fx_exposure: false,
        // the downstream user never posts BTC as loan collateral
        user_principal_loss_btc: BtcAmount::ZERO,
        accounting_residual: residual,
    };
    let detail = json!({
        "payout_unit_sats": downstream.payout_unit,
        "hedged_sets": maker.hedged_sets().as_f64(),
        "locked_edge_usd": maker.locked_edge().as_f64(),
        "capital_per_set_usd": maker.capital_per_set().map(|c| c.as_f64()),
        "halted": maker.is_halted(),
        "positions": maker.positions,
        "downstream_fees_sats": downstream.fees_collected(),
        "source_fees_usd": usd_f64(w.source.fees_collected()),
    });
    Ok(MechanismRun { row, detail, events: w.events })
}

#[derive(Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum AmmEvent<'a> {
    Seeded { pool: &'a CpmmPool, lp: &'a LpAccount, implied_yes: f64 },
    Bet { fill: &'a crate::amm::BetFill, implied_yes: f64, btc_spent: BtcAmount },
    Resolved { winner: Outcome, lp_value_usd: f64, permanent_loss: f64 },
}

fn run_amm(cfg: &ScenarioConfig, path: Vec<BtcUsdRate>) -> ScenarioResult<MechanismRun> {
    let a = cfg.amm.as_ref().ok_or(ScenarioError::MissingMechanism(Mechanism::Amm))?;
    let mut w = World::new(cfg, path, Mechanism::Amm)?;
    let subsidy = UsdAmount(micros(a.subsidy));
    let (seeded, lp) = seed_pool(subsidy, a.prior, a.mode)?;
    let mut pool = seeded.clone().with_fee(cfg.fees.amm);
    w.log(0, &AmmEvent::Seeded { pool: &pool, lp: &lp, implied_yes: pool.implied_probability().to_f64() });

    // depth quoted for a one-point move on the seeded pool
    let depth = pool
        .cash_to_move(Outcome::Yes, Frac::new(1, 100)?)
        .map(|c| pool.bet(c, Outcome::Yes))
        .transpose()?
        .map(|(f, _)| f.shares_out);

    let res = cfg.resolution.tick;
    let mut minted = Shares(subsidy.0);
    let mut user = [Shares::ZERO; 2];
    let mut btc_spent = BtcAmount::ZERO;
    let mut bets = Vec::new();
    for t in 0..res {
        w.apply_script(t)?;
        for b in a.bets.iter().filter(|b| b.tick == t) {
            let (fill, next) = pool.bet(UsdAmount(micros(b.cash)), b.outcome)?;
            let spent = usd_to_btc_ceil(fill.cash, w.rate(t))?;
            btc_spent += spent;
            minted += fill.minted;
            user[b.outcome.index()] += fill.shares_out;
            pool = next;
            w.log(
                t,
                &AmmEvent::Bet { fill: &fill, implied_yes: pool.implied_probability().to_f64(), btc_spent: spent },
            );
            bets.push(fill);
        }
    }
    let winner = cfg.resolution.winner;
    let spot = w.rate(res);
    let payout = UsdAmount(user[winner.index()].0);
    let user_pnl = usd_to_btc(payout, spot)? - btc_spent;
    let fees_won = match winner {
        Outcome::Yes => pool.fees_yes,
        Outcome::No => pool.fees_no,
    };
    let lp_value = lp.value_at_resolution(&pool, winner);
    let loss = pool.permanent_loss(subsidy, winner)?;
    w.log(res, &AmmEvent::Resolved { winner, lp_value_usd: lp_value.as_f64(), permanent_loss: loss.to_f64() });

    let leftover = |o: Outcome| lp.leftover.filter(|(lo, _)| *lo == o).map_or(Shares::ZERO, |(_, s)| s);
    let total_yes = pool.x + pool.fees_yes + user[Outcome::Yes.index()] + leftover(Outcome::Yes);
    let total_no = pool.y + pool.fees_no + user[Outcome::No.index()] + leftover(Outcome::No);
    let residual = usd_f64((total_yes - minted).0.abs() + (total_no - minted).0.abs());

    let row = ReportRow {
        mechanism: Mechanism::Amm,
        user_btc_pnl: user_pnl,
        maker_pnl_usd: Some(lp_value + UsdAmount(fees_won.0) - subsidy),
        liquidation_count: 0,
        capital_efficiency: depth.filter(|d| d.0 > 0).map(|d| subsidy.as_f64() / d.as_f64()),
        fx_exposure: true,
        user_principal_loss_btc: BtcAmount::ZERO,
        accounting_residual: residual,
    };
    let detail = json!({
        "seeded_pool": seeded.to_kv(),
        "final_pool": pool.to_kv(),
        "reserves": [pool.x.as_f64(), pool.y.as_f64()],
        "implied_yes": pool.implied_probability().to_f64(),
        "implied_yes_exact": pool.implied_probability(),
        "leftover": lp.leftover,
        "lp_value_usd": lp_value.as_f64(),
        "permanent_loss": loss,
        "one_point_depth_shares": depth.map(|d| d.as_f64()),
        "bets": bets,
    });
    Ok(MechanismRun { row, detail, events: w.events })
}

#[derive(Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum RedirectEvent<'a> {
    Opened { borrowed: UsdAmount, shares: Shares, idle_usd: UsdAmount, hf: String },
    Keeper { action: &'a crate::redirect::KeeperAction },
    Liquidated { liquidation: &'a crate::lending::Liquidation, hf: String },
    Settled { report: &'a crate::redirect::SettlementReport },
}

fn run_redirect(cfg: &ScenarioConfig, path: Vec<BtcUsdRate>) -> ScenarioResult<MechanismRun> {
    let r = cfg.redirect.as_ref().ok_or(ScenarioError::MissingMechanism(Mechanism::Redirect))?;
    let mut w = World::new(cfg, path, Mechanism::Redirect)?;
    let btc = BtcAmount(config::fixed(r.collateral_btc, SATS_PER_BTC).expect("validated"));
    let res = cfg.resolution.tick;
    let mut pos: Option<RedirectPosition> = None;
    let mut liquidations = 0u32;
    let mut capital = None;
    for t in 0..res {
        let rate = w.rate(t);
        w.apply_script(t)?;
        if t == r.open_tick {
            let p = open_position(
                BORROWER,
                btc,
                rate,
                r.params,
                &mut w.source,
                micros(r.market_price),
                r.outcome,
                t * cfg.tick_seconds,
            )?;
            let ev = RedirectEvent::Opened {
                borrowed: p.borrowed,
                shares: p.shares,
                idle_usd: p.idle_usd,
                hf: p.health_factor(rate).to_string(),
            };
            w.log(t, &ev);
            if p.shares.0 > 0 {
                capital = Some(btc_to_usd(btc, rate)?.as_f64() / p.shares.as_f64());
            }
            pos = Some(p);
            continue;
        }
        let Some(p) = pos.as_mut() else { continue };
        p.accrue(cfg.tick_seconds)?;
        for a in p.keeper_step(rate, &mut w.source)? {
            w.log(t, &RedirectEvent::Keeper { action: &a });
        }
        let hf = p.health_factor(rate).to_string();
        if let Some(liq) = p.check_liquidation(rate)? {
            liquidations += 1;
            w.log(t, &RedirectEvent::Liquidated { liquidation: &liq, hf });
        }
    }
    let mut p = pos.expect("open tick precedes resolution");
    let spot = w.rate(res);
    let report = p.settle(cfg.resolution.winner, spot)?;
    w.log(res, &RedirectEvent::Settled { report: &report });

    let (cash, yes, no) = w.source.conservation_residuals();
    let principal = p.initial_collateral + p.topped_up;
    let row = ReportRow {
        mechanism: Mechanism::Redirect,
        user_btc_pnl: report.btc_pnl,
        maker_pnl_usd: None,
        liquidation_count: liquidations,
        capital_efficiency: capital,
        fx_exposure: true,
        user_principal_loss_btc: BtcAmount((principal - report.collateral_returned).0.max(0)),
        accounting_residual: usd_f64(cash.abs() + yes.0.abs() + no.0.abs()),
    };
    let detail = json!({
        "report": report,
        "borrowed_usd": p.borrowed.as_f64(),
        "hf_at_open": p.hf0.to_string(),
        "stages": p.history,
        "keeper_actions": p.actions,
        "liquidation": p.liquidation,
        "topped_up_sats": p.topped_up.0,
        "emergency_swapped_sats": p.emergency_swapped.0,
    });
    Ok(MechanismRun { row, detail, events: w.events })
}

/// Runs the requested mechanisms (all enabled ones when `only` is empty).
pub fn run_mechanisms(cfg: &ScenarioConfig, only: &[Mechanism]) -> ScenarioResult<ComparisonReport> {
    cfg.validate()?;
    let selected: Vec<Mechanism> = if only.is_empty() {
        cfg.enabled()
    } else {
        let mut v = only.to_vec();
        v.sort();
        v.dedup();
        for m in &v {
            let present = match m {
                Mechanism::Crossmm => cfg.crossmm.is_some(),
                Mechanism::Amm => cfg.amm.is_some(),
                Mechanism::Redirect => cfg.redirect.is_some(),
            };
            if !present {
                return Err(ScenarioError::MissingMechanism(*m));
            }
        }
        v
    };
    let path = path::generate(&cfg.price_path, cfg.ticks, cfg.seed)?;
    let mut report = ComparisonReport {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        ticks: cfg.ticks,
        winner: cfg.resolution.winner,
        settlement_rate: path[(cfg.resolution.tick as usize).min(path.len() - 1)],
        definition: CAPITAL_EFFICIENCY_DEFINITION,
        rows: Vec::new(),
        details: Vec::new(),
        events: Vec::new(),
    };
    for m in selected {
        let run = match m {
            Mechanism::Crossmm => run_crossmm(cfg, path.clone())?,
            Mechanism::Amm => run_amm(cfg, path.clone())?,
            Mechanism::Redirect => run_redirect(cfg, path.clone())?,
        };
        report.rows.push(run.row);
        report.details.push((m, run.detail));
        report.events.extend(run.events);
    }
    // stable: mechanism order is kept within a tick
    report.events.sort_by_key(|e| e.tick);
    Ok(report)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> ScenarioResult<ComparisonReport> {
    run_mechanisms(cfg, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset(name: &str) -> ScenarioConfig {
        ScenarioConfig::load(config::preset(name).unwrap().toml).unwrap()
    }

    fn frac(s: &str) -> Frac {
        Frac::parse(s).unwrap()
    }

    #[test]
    fn fair_value() {
        assert_eq!(fair_value_adjust(frac("0.80"), frac("0.04"), frac("4")).unwrap(), frac("0.64"));
        assert_eq!(fair_value_adjust(frac("0.80"), frac("0.10"), frac("1")).unwrap(), frac("0.70"));
        assert_eq!(fair_value_adjust(frac("0.3"), frac("0"), frac("9")).unwrap(), frac("0.3"));
        assert_eq!(fair_value_adjust(frac("0.1"), frac("0.2"), frac("1")).unwrap(), Frac::zero());
        assert!(fair_value_adjust(frac("1.1"), frac("0"), frac("0")).is_err());
    }

    #[test]
    fn crossmm_preset_locks_edge() {
        let r = run_scenario(&preset("paper-crossmm")).unwrap();
        let row = r.row(Mechanism::Crossmm).unwrap();
        assert_eq!(row.maker_pnl_usd, Some(UsdAmount(8_000)));
        assert_eq!(row.user_principal_loss_btc, BtcAmount::ZERO);
        assert_eq!(row.accounting_residual, 0.0);
        assert!(!row.fx_exposure);
    }

    #[test]
    fn crossmm_put_preset_keeps_edge_after_drop() {
        let r = run_scenario(&preset("paper-crossmm-put")).unwrap();
        assert_eq!(r.settlement_rate, BtcUsdRate::from_usd(80_000).unwrap());
        assert_eq!(r.row(Mechanism::Crossmm).unwrap().maker_pnl_usd, Some(UsdAmount(8_000)));
    }

    #[test]
    fn amm_presets() {
        let r = run_scenario(&preset("paper-amm-subsidy")).unwrap();
        let d = r.detail(Mechanism::Amm).unwrap();
        assert_eq!(d["reserves"], json!([100.0, 50.0]));
        assert_eq!(d["implied_yes_exact"], json!("1/3"));
        let r = run_scenario(&preset("paper-permanent-loss")).unwrap();
        let d = r.detail(Mechanism::Amm).unwrap();
        assert_eq!(d["reserves"], json!([10.0, 1000.0]));
        assert_eq!(d["permanent_loss"], json!("0.9"));
        let row = r.row(Mechanism::Amm).unwrap();
        assert_eq!(row.maker_pnl_usd, Some(UsdAmount(-90 * MICROS_PER_USD)));
        assert_eq!(row.accounting_residual, 0.0);
    }

    #[test]
    fn redirect_win_preset() {
        let r = run_scenario(&preset("paper-redirect-win")).unwrap();
        let d = r.detail(Mechanism::Redirect).unwrap();
        let total = d["report"]["user_total_btc"].as_f64().unwrap();
        assert!((total - 1.18).abs() < 0.001, "{total}");
        let row = r.row(Mechanism::Redirect).unwrap();
        assert_eq!(row.liquidation_count, 0);
        assert_eq!(row.user_principal_loss_btc, BtcAmount::ZERO);
    }

    #[test]
    fn liquidation_edge_compares_principal() {
        let r = run_scenario(&preset("liquidation-edge")).unwrap();
        let red = r.row(Mechanism::Redirect).unwrap();
        let cross = r.row(Mechanism::Crossmm).unwrap();
        assert_eq!(red.liquidation_count, 1);
        assert!(red.user_principal_loss_btc.0 > 0);
        assert_eq!(cross.user_principal_loss_btc, BtcAmount::ZERO);
        let liqs = r.events.iter().filter(|e| e.event["event"] == "liquidated").count();
        assert_eq!(liqs, 1);
    }

    #[test]
    fn reports_are_deterministic() {
        for p in PRESETS {
            let cfg = ScenarioConfig::load(p.toml).unwrap();
            let a = run_scenario(&cfg).unwrap();
            let b = run_scenario(&cfg).unwrap();
            assert_eq!(a.to_csv(), b.to_csv());
            assert_eq!(a.to_json(), b.to_json());
            assert_eq!(a.events_ndjson(), b.events_ndjson());
            assert_eq!(a.rows.len(), cfg.enabled().len());
        }
    }

    #[test]
    fn missing_mechanism_is_config_error() {
        let err = run_mechanisms(&preset("paper-amm-subsidy"), &[Mechanism::Redirect]).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn csv_has_definition_header() {
        let r = run_scenario(&preset("paper-crossmm")).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("# capital_efficiency"));
        assert_eq!(csv.lines().count(), 2 + r.rows.len());
    }
}
