//! The published worked examples as a named check suite. Each check
//! compares one computed number with its reference value, exactly or within
//! a stated tolerance.

use serde::Serialize;

use crate::amm::{seed_pool, CpmmPool, LmsrState, SeedMode};
use crate::crossmm::{check_arbitrage, mirror_quotes, put_payoff, Arbitrage, PutContract};
use crate::lending::{max_borrow, LendingParams};
use crate::money::{btc_to_usd_ceil, BtcAmount, BtcUsdRate, Frac, Shares, Side, TickSize, UsdAmount};
use crate::redirect::{open_position, RedirectParams};
use crate::scenario::config::preset;
use crate::scenario::{fair_value_adjust, run_scenario, Mechanism, ScenarioConfig};
use crate::venue::{Outcome, OwnerId, Venue};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub what: &'static str,
    pub expected: Frac,
    pub tolerance: Frac,
    pub computed: Option<Frac>,
    pub pass: bool,
}

type Computed = Result<Frac, String>;

fn f(s: &str) -> Frac {
    Frac::parse(s).expect("literal")
}

fn int(v: i64) -> Frac {
    Frac::from_integer(v as i128)
}

fn rate(usd: i64) -> BtcUsdRate {
    BtcUsdRate::from_usd(usd).expect("literal")
}

fn usd(s: &str) -> UsdAmount {
    UsdAmount::parse(s).expect("literal")
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn edge(a: Arbitrage) -> Computed {
    match a {
        Arbitrage::Profitable { edge } => Ok(edge.as_frac()),
        Arbitrage::Unprofitable { total_cost } => Err(format!("unprofitable at {total_cost}")),
    }
}

fn mirror(fee: &str) -> Result<(i64, i64), String> {
    let q = mirror_quotes(
        usd("0.50"),
        usd("0.51"),
        usd(fee),
        BtcAmount::ZERO,
        rate(100_000),
        TickSize::new(1).map_err(err)?,
    )
    .map_err(err)?;
    Ok((q.bid_d, q.ask_d))
}

fn seeded(prior: Frac, mode: SeedMode) -> Result<(CpmmPool, Frac), String> {
    let (pool, lp) = seed_pool(usd("100"), prior, mode).map_err(err)?;
    let left = lp.leftover.map_or(Frac::zero(), |(_, s)| s.as_frac());
    Ok((pool, left))
}

fn worked_redirect(settle_at: i64) -> Result<(Frac, Frac, Frac), String> {
    let mut v = Venue::usd("usd", TickSize::new(10_000).map_err(err)?, Frac::zero());
    v.place_limit(OwnerId(1), Outcome::No, Side::Ask, usd("0.80").0, Shares::from_whole(500_000).map_err(err)?)
        .map_err(err)?;
    let params = RedirectParams {
        target_ltv: f("0.72"),
        lending: LendingParams { borrow_rate: Frac::zero(), ..Default::default() },
        ..Default::default()
    };
    let mut pos =
        open_position(OwnerId(2), BtcAmount(100_000_000), rate(115_910), params, &mut v, usd("0.80").0, Outcome::No, 0)
            .map_err(err)?;
    let shares = pos.shares.as_frac();
    let profit = pos.shares.as_frac() - pos.borrowed.as_frac();
    let rep = pos.settle(Outcome::No, rate(settle_at)).map_err(err)?;
    Ok((shares, profit, rep.user_total_btc.as_frac()))
}

fn scenario(name: &str) -> Result<crate::scenario::ComparisonReport, String> {
    let cfg = ScenarioConfig::load(preset(name).ok_or("missing preset")?.toml).map_err(err)?;
    run_scenario(&cfg).map_err(err)
}

struct Spec {
    name: &'static str,
    what: &'static str,
    expected: Frac,
    tolerance: Frac,
    compute: fn() -> Computed,
}

fn specs() -> Vec<Spec> {
    let exact = Frac::zero();
    vec![
        Spec {
            name: "fair-value-4y",
            what: "0.80 belief, 4% a year for 4 years",
            expected: f("0.64"),
            tolerance: exact,
            compute: || fair_value_adjust(f("0.80"), f("0.04"), int(4)).map_err(err),
        },
        Spec {
            name: "fair-value-1y",
            what: "0.80 belief, 10% for 1 year",
            expected: f("0.70"),
            tolerance: exact,
            compute: || fair_value_adjust(f("0.80"), f("0.10"), int(1)).map_err(err),
        },
        Spec {
            name: "mirror-bid",
            what: "bid_d (sat) from $0.50 at 100k",
            expected: int(500),
            tolerance: exact,
            compute: || Ok(int(mirror("0")?.0)),
        },
        Spec {
            name: "mirror-ask",
            what: "ask_d (sat) from $0.51 at 100k",
            expected: int(510),
            tolerance: exact,
            compute: || Ok(int(mirror("0")?.1)),
        },
        Spec {
            name: "mirror-fee-bid",
            what: "bid_d with $0.01 fee",
            expected: int(490),
            tolerance: exact,
            compute: || Ok(int(mirror("0.01")?.0)),
        },
        Spec {
            name: "mirror-fee-ask",
            what: "ask_d with $0.01 fee",
            expected: int(520),
            tolerance: exact,
            compute: || Ok(int(mirror("0.01")?.1)),
        },
        Spec {
            name: "usd-hedge-cost",
            what: "0.51 + 0.48 set cost, no put",
            expected: f("0.99"),
            tolerance: exact,
            compute: || {
                Ok(Frac::one()
                    - edge(check_arbitrage(usd("0.51"), BtcAmount(480), rate(100_000), UsdAmount::ZERO).map_err(err)?)?)
            },
        },
        Spec {
            name: "usd-hedge-edge",
            what: "edge per set, no put",
            expected: f("0.01"),
            tolerance: exact,
            compute: || {
                edge(check_arbitrage(usd("0.51"), BtcAmount(480), rate(100_000), UsdAmount::ZERO).map_err(err)?)
            },
        },
        Spec {
            name: "put-hedge-cost",
            what: "0.51 + 0.48 + 0.002 = 0.992 < 1.00",
            expected: f("0.992"),
            tolerance: exact,
            compute: || {
                let put = btc_to_usd_ceil(BtcAmount(2), rate(100_000)).map_err(err)?;
                Ok(Frac::one() - edge(check_arbitrage(usd("0.51"), BtcAmount(480), rate(100_000), put).map_err(err)?)?)
            },
        },
        Spec {
            name: "put-hedge-edge",
            what: "edge per set with the put",
            expected: f("0.008"),
            tolerance: exact,
            compute: || {
                let put = btc_to_usd_ceil(BtcAmount(2), rate(100_000)).map_err(err)?;
                edge(check_arbitrage(usd("0.51"), BtcAmount(480), rate(100_000), put).map_err(err)?)
            },
        },
        Spec {
            name: "put-payoff-at-strike",
            what: "put payoff when spot = strike",
            expected: exact,
            tolerance: exact,
            compute: || {
                let put = PutContract {
                    strike: rate(100_000),
                    notional: BtcAmount(480),
                    premium: BtcAmount(2),
                    expiry_tick: 1,
                };
                Ok(put_payoff(&put, rate(100_000)).map_err(err)?.as_frac())
            },
        },
        Spec {
            name: "lmsr-loss-bound",
            what: "LMSR worst-case loss b ln 2, b = 100",
            expected: f("69.314718056"),
            tolerance: f("0.000000001"),
            compute: || Frac::from_f64(LmsrState::new(100.0).map_err(err)?.max_loss()).map_err(err),
        },
        Spec {
            name: "cpmm-seed-yes",
            what: "standard seed, $100 at 1/3: YES reserve",
            expected: int(100),
            tolerance: exact,
            compute: || Ok(seeded(Frac::new(1, 3).map_err(err)?, SeedMode::Standard)?.0.x.as_frac()),
        },
        Spec {
            name: "cpmm-seed-no",
            what: "standard seed: NO reserve",
            expected: int(50),
            tolerance: exact,
            compute: || Ok(seeded(Frac::new(1, 3).map_err(err)?, SeedMode::Standard)?.0.y.as_frac()),
        },
        Spec {
            name: "cpmm-seed-leftover",
            what: "standard seed: NO kept by the LP",
            expected: int(50),
            tolerance: exact,
            compute: || Ok(seeded(Frac::new(1, 3).map_err(err)?, SeedMode::Standard)?.1),
        },
        Spec {
            name: "cpmm-seed-prob",
            what: "50 / (100 + 50)",
            expected: Frac::new(1, 3).expect("literal"),
            tolerance: exact,
            compute: || Ok(seeded(Frac::new(1, 3).map_err(err)?, SeedMode::Standard)?.0.implied_probability()),
        },
        Spec {
            name: "weighted-seed-prob",
            what: "weighted seed (100, 100), p = 1/3",
            expected: Frac::new(1, 3).expect("literal"),
            tolerance: exact,
            compute: || {
                let (pool, left) = seeded(Frac::new(1, 3).map_err(err)?, SeedMode::Weighted)?;
                if pool.x != pool.y || !left.is_zero() {
                    return Err(format!("pool ({}, {}) leftover {left}", pool.x, pool.y));
                }
                Ok(pool.implied_probability())
            },
        },
        Spec {
            name: "permanent-loss",
            what: "pool (10, 1000) from $100, YES wins",
            expected: f("0.90"),
            tolerance: exact,
            compute: || {
                let pool = CpmmPool::new(
                    Shares::from_whole(10).map_err(err)?,
                    Shares::from_whole(1000).map_err(err)?,
                    Frac::new(1, 2).map_err(err)?,
                )
                .map_err(err)?;
                pool.permanent_loss(usd("100"), Outcome::Yes).map_err(err)
            },
        },
        Spec {
            name: "permanent-loss-preset",
            what: "same loss reached by a $900 YES bet",
            expected: f("0.90"),
            tolerance: exact,
            compute: || {
                let r = scenario("paper-permanent-loss")?;
                let v = r.detail(Mechanism::Amm).ok_or("no amm detail")?["permanent_loss"].clone();
                Frac::parse(v.as_str().ok_or("no loss")?).map_err(err)
            },
        },
        Spec {
            name: "max-borrow",
            what: "72% of 1 BTC at 115,910 (USD)",
            expected: f("83455.20"),
            tolerance: exact,
            compute: || {
                let p = LendingParams::default();
                Ok(max_borrow(BtcAmount(100_000_000), rate(115_910), &p).map_err(err)?.as_frac())
            },
        },
        Spec {
            name: "liquidation-decline",
            what: "1 - 0.72/0.82, inside 12-13%",
            expected: f("0.125"),
            tolerance: f("0.005"),
            compute: || Ok(LendingParams::default().liquidation_decline()),
        },
        Spec {
            name: "redirect-shares",
            what: "NO shares bought at $0.80",
            expected: int(104_319),
            tolerance: exact,
            compute: || Ok(worked_redirect(115_910)?.0),
        },
        Spec {
            name: "redirect-profit",
            what: "USD left after repaying the loan",
            expected: int(20_864),
            tolerance: int(1),
            compute: || Ok(worked_redirect(115_910)?.1),
        },
        Spec {
            name: "redirect-total-btc",
            what: "BTC back to the user",
            expected: f("1.18"),
            tolerance: f("0.001"),
            compute: || Ok(worked_redirect(115_910)?.2),
        },
        Spec {
            name: "preset-crossmm",
            what: "paper-crossmm maker PnL (USD)",
            expected: f("0.008"),
            tolerance: exact,
            compute: || {
                let r = scenario("paper-crossmm")?;
                r.row(Mechanism::Crossmm)
                    .and_then(|row| row.maker_pnl_usd)
                    .map(|v| v.as_frac())
                    .ok_or("no maker pnl".into())
            },
        },
        Spec {
            name: "preset-crossmm-put",
            what: "edge kept after BTC/USD falls to 80k",
            expected: f("0.008"),
            tolerance: exact,
            compute: || {
                let r = scenario("paper-crossmm-put")?;
                r.row(Mechanism::Crossmm)
                    .and_then(|row| row.maker_pnl_usd)
                    .map(|v| v.as_frac())
                    .ok_or("no maker pnl".into())
            },
        },
        Spec {
            name: "preset-redirect-win",
            what: "paper-redirect-win final BTC",
            expected: f("1.18"),
            tolerance: f("0.001"),
            compute: || {
                let r = scenario("paper-redirect-win")?;
                let v = &r.detail(Mechanism::Redirect).ok_or("no redirect detail")?["report"]["user_total_btc"];
                Frac::from_f64(v.as_f64().ok_or("no total")?).map_err(err)
            },
        },
        Spec {
            name: "preset-liquidation-edge",
            what: "liquidations after a 13% drop",
            expected: int(1),
            tolerance: exact,
            compute: || {
                let r = scenario("liquidation-edge")?;
                Ok(int(r.row(Mechanism::Redirect).ok_or("no redirect row")?.liquidation_count as i64))
            },
        },
    ]
}

/// Runs every check. `corrupt` names a check whose reference value is
/// nudged first, to exercise the failure path.
pub fn run_checks(corrupt: Option<&str>) -> Vec<Check> {
    specs()
        .into_iter()
        .map(|s| {
            let mut expected = s.expected;
            if corrupt == Some(s.name) {
                expected = expected + f("0.01") + expected * f("0.01");
            }
            let computed = (s.compute)();
            let pass = match &computed {
                Ok(c) => {
                    let gap = *c - expected;
                    let gap = if gap.is_negative() { Frac::zero() - gap } else { gap };
                    gap <= s.tolerance
                }
                Err(_) => false,
            };
            Check { name: s.name, what: s.what, expected, tolerance: s.tolerance, computed: computed.ok(), pass }
        })
        .collect()
}

pub fn check_names() -> Vec<&'static str> {
    specs().iter().map(|s| s.name).collect()
}

/// Fixed-width table of the checks.
pub fn render(checks: &[Check]) -> String {
    let mut out = format!(
        "{:<26} {:<44} {:>16} {:>16} {:>10}  {}\n",
        "check", "what", "expected", "computed", "tolerance", "result"
    );
    for c in checks {
        let shown = |v: Frac| {
            let s = v.to_string();
            if s.contains('/') {
                format!("{s} ({:.9})", v.to_f64())
            } else {
                s
            }
        };
        out.push_str(&format!(
            "{:<26} {:<44} {:>16} {:>16} {:>10}  {}\n",
            c.name,
            c.what,
            shown(c.expected),
            c.computed.map(shown).unwrap_or_else(|| "error".into()),
            c.tolerance.to_string(),
            if c.pass { "ok" } else { "FAIL" }
        ));
    }
    out
}
