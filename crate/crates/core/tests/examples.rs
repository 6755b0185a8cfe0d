//! Worked examples through the public API. Expected values come either from
//! the reference numbers or from an independent oracle computed here in
//! plain integer / f64 arithmetic.

use btcpm_core::amm::{lmsr_move_cost, seed_pool, CpmmPool, LmsrState, SeedMode};
use btcpm_core::crossmm::{
    check_arbitrage, mirror_quotes, put_payoff, settle_at_resolution, CrossMaker, CrossMmError, CrossMmParams,
    HedgeNotional, PutContract,
};
use btcpm_core::lending::{liquidate, max_borrow, HealthFactor, LendingParams, LoanPosition};
use btcpm_core::money::{
    btc_to_usd, round_price, usd_to_btc, BtcAmount, BtcUsdRate, Frac, Shares, Side, TickSize, UsdAmount, SATS_PER_BTC,
};
use btcpm_core::redirect::{open_position, RedirectParams, ShortfallPolicy};
use btcpm_core::scenario::config::preset;
use btcpm_core::scenario::{fair_value_adjust, run_scenario, Mechanism, ScenarioConfig};
use btcpm_core::venue::{Denom, Outcome, OwnerId, Venue};

const BOOK: OwnerId = OwnerId(50);
const MAKER: OwnerId = OwnerId(51);
const USER: OwnerId = OwnerId(52);

fn usd(s: &str) -> UsdAmount {
    UsdAmount::parse(s).unwrap()
}

fn btc(s: &str) -> BtcAmount {
    BtcAmount::parse(s).unwrap()
}

fn sh(n: i64) -> Shares {
    Shares::from_whole(n).unwrap()
}

fn rate(u: i64) -> BtcUsdRate {
    BtcUsdRate::from_usd(u).unwrap()
}

fn frac(s: &str) -> Frac {
    Frac::parse(s).unwrap()
}

/// Oracle: floor(usd × 1e8 / rate) with integer dollars-and-cents inputs.
fn oracle_sats(usd_micros: i64, rate_usd: i64) -> i64 {
    (usd_micros as i128 * 100_000_000 / (rate_usd as i128 * 1_000_000)) as i64
}

// ------------------------------------------------------------------ money

#[test]
fn conversions_match_oracle() {
    for (p, r) in [("0.50", 100_000), ("0.51", 100_000), ("0.49", 97_531), ("20863.80", 115_910)] {
        let got = usd_to_btc(usd(p), rate(r)).unwrap();
        assert_eq!(got.0, oracle_sats(usd(p).0, r), "{p} at {r}");
    }
    assert_eq!(usd_to_btc(usd("0.50"), rate(100_000)).unwrap(), BtcAmount(500));
    assert_eq!(usd_to_btc(usd("0.51"), rate(100_000)).unwrap(), BtcAmount(510));
    assert_eq!(btc_to_usd(btc("0.18"), rate(115_910)).unwrap(), usd("20863.80"));
}

#[test]
fn price_rounding_is_conservative() {
    let t = TickSize::new(10).unwrap();
    assert_eq!(round_price(507, t, Side::Bid), 500);
    assert_eq!(round_price(503, t, Side::Ask), 510);
    assert_eq!(round_price(500, t, Side::Ask), 500);
}

#[test]
fn fair_value_discount() {
    // carry cost rate × years comes straight off the belief
    let v = fair_value_adjust(frac("0.80"), frac("0.04"), frac("4")).unwrap();
    let oracle = 0.80 - 0.04 * 4.0;
    assert_eq!(v, frac("0.64"));
    assert!((v.to_f64() - oracle).abs() < 1e-12);
}

// ------------------------------------------------------------------ venue

#[test]
fn market_walk_average_and_worst() {
    let mut v = Venue::usd("v", TickSize::new(10_000).unwrap(), Frac::zero());
    v.place_limit(BOOK, Outcome::Yes, Side::Ask, usd("0.51").0, sh(100)).unwrap();
    v.place_limit(BOOK, Outcome::Yes, Side::Ask, usd("0.53").0, sh(100)).unwrap();
    let exec = v.execute_market(USER, Outcome::Yes, Side::Bid, sh(200)).unwrap();
    // (100 × 0.51 + 100 × 0.53) / 200
    assert_eq!(exec.average_price(), Some(usd("0.52").0));
    assert_eq!(exec.worst_price(), Some(usd("0.53").0));
    assert_eq!(exec.filled, sh(200));
}

#[test]
fn winning_shares_pay_one_dollar() {
    let mut v = Venue::usd("v", TickSize::new(10_000).unwrap(), Frac::zero());
    v.place_limit(BOOK, Outcome::No, Side::Ask, usd("0.80").0, sh(200_000)).unwrap();
    v.execute_market(USER, Outcome::No, Side::Bid, sh(104_319)).unwrap();
    v.resolve(Outcome::No).unwrap();
    assert_eq!(v.redeem(USER).unwrap(), usd("104319").0);
}

// ---------------------------------------------------------------- crossmm

fn tick1() -> TickSize {
    TickSize::new(1).unwrap()
}

#[test]
fn mirror_without_and_with_fee() {
    let q = mirror_quotes(usd("0.50"), usd("0.51"), UsdAmount::ZERO, BtcAmount(0), rate(100_000), tick1()).unwrap();
    assert_eq!((q.bid_d, q.ask_d), (500, 510));
    let q = mirror_quotes(usd("0.50"), usd("0.51"), usd("0.01"), BtcAmount(0), rate(100_000), tick1()).unwrap();
    assert_eq!((q.bid_d, q.ask_d), (oracle_sats(usd("0.49").0, 100_000), oracle_sats(usd("0.52").0, 100_000)));
    assert_eq!((q.bid_d, q.ask_d), (490, 520));
}

#[test]
fn mirror_rejects_degenerate_bid() {
    let err = mirror_quotes(usd("0.005"), usd("0.02"), usd("0.01"), BtcAmount(0), rate(100_000), tick1()).unwrap_err();
    assert!(matches!(err, CrossMmError::Degenerate { .. }));
}

#[test]
fn complete_set_cost_checks() {
    // USDT hedge: YES ask 0.51 plus NO bought at 480 sat (0.48) = 0.99.
    let a = check_arbitrage(usd("0.51"), BtcAmount(480), rate(100_000), UsdAmount::ZERO).unwrap();
    assert_eq!(format!("{a:?}"), format!("{:?}", btcpm_core::crossmm::Arbitrage::Profitable { edge: usd("0.01") }));
    // With a 2 sat put the cost is 0.992 and the edge 0.008.
    let put = btc_to_usd(BtcAmount(2), rate(100_000)).unwrap();
    assert_eq!(put, usd("0.002"));
    let a = check_arbitrage(usd("0.51"), BtcAmount(480), rate(100_000), put).unwrap();
    assert!(matches!(a, btcpm_core::crossmm::Arbitrage::Profitable { edge } if edge == usd("0.008")));
    // 0.51 + 0.49 + 0.002 exceeds a dollar.
    let a = check_arbitrage(usd("0.51"), BtcAmount(490), rate(100_000), put).unwrap();
    assert!(!a.is_profitable());
}

#[test]
fn put_payoff_examples() {
    let put = PutContract { strike: rate(100_000), notional: BtcAmount(480), premium: BtcAmount(2), expiry_tick: 10 };
    // 480 sat × $20,000 / 1e8 = $0.096
    assert_eq!(put_payoff(&put, rate(80_000)).unwrap(), usd("0.096"));
    assert_eq!(put_payoff(&put, rate(100_000)).unwrap(), UsdAmount::ZERO);
    assert_eq!(put_payoff(&put, rate(120_000)).unwrap(), UsdAmount::ZERO);
}

fn maker_params(fee: &str, delay: u64) -> CrossMmParams {
    CrossMmParams {
        fee: usd(fee),
        put_premium: BtcAmount(2),
        hedge_notional: HedgeNotional::Cost,
        quote_size: sh(1),
        quote_outcomes: vec![Outcome::No],
        max_retries: 1,
        hedge_delay: delay,
        tick: tick1(),
        expiry_tick: 100,
    }
}

fn source(yes_ask: &str, tick: &str) -> Venue {
    let mut s = Venue::usd("src", TickSize::new(usd(tick).0).unwrap(), Frac::zero());
    s.place_limit(BOOK, Outcome::Yes, Side::Bid, usd("0.49").0, sh(100)).unwrap();
    s.place_limit(BOOK, Outcome::Yes, Side::Ask, usd(yes_ask).0, sh(100)).unwrap();
    s.place_limit(BOOK, Outcome::No, Side::Bid, usd("0.49").0, sh(100)).unwrap();
    s.place_limit(BOOK, Outcome::No, Side::Ask, usd("0.51").0, sh(100)).unwrap();
    s
}

#[test]
fn hedged_fill_locks_the_edge_in_either_outcome() {
    let r = rate(100_000);
    for winner in [Outcome::Yes, Outcome::No] {
        let mut src = source("0.51", "0.01");
        let mut down = Venue::btc("dst", tick1(), Frac::zero(), r).unwrap();
        let mut mm = CrossMaker::new(MAKER, maker_params("0.008", 0));
        mm.refresh_quotes(0, &mut src, &mut down, r).unwrap();
        assert_eq!(down.book(Outcome::No).best_bid(), Some(480));
        let exec = down.execute_market(USER, Outcome::No, Side::Ask, sh(1)).unwrap();
        for f in &exec.fills {
            mm.on_fill(1, f, &mut src, &mut down, r).unwrap();
        }
        // oracle: $1 − (0.51 + 0.48 + 0.002)
        assert_eq!(mm.locked_edge(), usd("0.008"));
        let (pnl, _) = mm.settle(2, winner, r, &down).unwrap();
        assert_eq!(pnl, usd("0.008"), "{winner:?}");
    }
}

#[test]
fn slippage_larger_than_edge_loses() {
    // Fee 0.01 and no put: the quoted bid is 480 sat and the expected edge
    // against a 0.51 ask is 0.01. The hedge lands a tick later on a book
    // that moved by 0.005 or 0.015.
    let r = rate(100_000);
    for (moved, expected) in [("0.515", "0.005"), ("0.525", "-0.005")] {
        let mut src = source("0.51", "0.005");
        let mut down = Venue::btc("dst", tick1(), Frac::zero(), r).unwrap();
        let mut params = maker_params("0.01", 1);
        params.put_premium = BtcAmount(0);
        let mut mm = CrossMaker::new(MAKER, params);
        mm.refresh_quotes(0, &mut src, &mut down, r).unwrap();
        let exec = down.execute_market(USER, Outcome::No, Side::Ask, sh(1)).unwrap();
        for f in &exec.fills {
            mm.on_fill(0, f, &mut src, &mut down, r).unwrap();
        }
        src.cancel_side(BOOK, Outcome::Yes, Side::Ask);
        src.place_limit(BOOK, Outcome::Yes, Side::Ask, usd(moved).0, sh(100)).unwrap();
        mm.process_pending(1, &mut src, &mut down, r).unwrap();
        let pos = &mm.positions[0];
        let pnl = settle_at_resolution(pos, Outcome::Yes, r, Denom::Btc, SATS_PER_BTC).unwrap();
        // oracle: 1 − moved − 0.48
        let want = usd(expected);
        assert_eq!(pnl, want, "moved to {moved}");
        assert_eq!(UsdAmount::parse("1").unwrap() - usd(moved) - usd("0.48"), want);
    }
}

// -------------------------------------------------------------------- amm

#[test]
fn lmsr_examples() {
    let s = LmsrState::new(100.0).unwrap();
    let (c1000, _) = s.trade(Outcome::Yes, 1000.0);
    // oracle: 100 ln(e^10 + 1) − 100 ln 2
    let oracle = 100.0 * ((10f64).exp() + 1.0).ln() - 100.0 * 2f64.ln();
    assert!((c1000 - oracle).abs() < 1e-9);
    assert!((c1000 - 1000.0).abs() < 70.0);
    let mv = lmsr_move_cost(0.5, 0.75, 1.0).unwrap();
    // b ln((1−p0)/(1−p1)) = ln 2
    assert!((mv - 2f64.ln()).abs() < 1e-12);
    assert!((s.max_loss() - 100.0 * 2f64.ln()).abs() < 1e-12);
    assert!(lmsr_move_cost(0.5, 1.0, 1.0).is_err());
}

#[test]
fn cpmm_bet_matches_closed_form() {
    let pool = CpmmPool::new(sh(100), sh(100), frac("1/2")).unwrap();
    let (fill, next) = pool.bet(usd("100"), Outcome::Yes).unwrap();
    // mint 100 sets → (200, 200); keep x·y = 10,000 with y = 200 ⇒ x = 50; out = 200 − 50.
    assert_eq!(fill.shares_out, sh(150));
    assert_eq!((next.reserve(Outcome::Yes), next.reserve(Outcome::No)), (sh(50), sh(200)));
    assert_eq!(next.implied_probability(), frac("4/5"));
}

#[test]
fn weighted_cpmm_bet() {
    let pool = CpmmPool::new(sh(100), sh(100), frac("1/3")).unwrap();
    let (fill, _) = pool.bet(usd("100"), Outcome::Yes).unwrap();
    // x^(1/3) y^(2/3) const: x' = 100^3 / 200^2 = 25; out = 200 − 25 = 175.
    let oracle = 200.0 - 100f64.powi(3) / 200f64.powi(2);
    assert!((fill.shares_out.to_f64() - oracle).abs() <= 1e-6);
    assert_eq!(fill.shares_out, sh(175));
}

#[test]
fn seeding_examples() {
    let (pool, lp) = seed_pool(usd("100"), frac("1/3"), SeedMode::Standard).unwrap();
    assert_eq!((pool.reserve(Outcome::Yes), pool.reserve(Outcome::No)), (sh(100), sh(50)));
    assert_eq!(lp.leftover, Some((Outcome::No, sh(50))));
    assert_eq!(pool.implied_probability(), frac("1/3"));
    let (pool, lp) = seed_pool(usd("100"), frac("1/3"), SeedMode::Weighted).unwrap();
    assert_eq!((pool.reserve(Outcome::Yes), pool.reserve(Outcome::No)), (sh(100), sh(100)));
    assert_eq!(lp.leftover, None);
    assert_eq!(pool.implied_probability(), frac("1/3"));
}

#[test]
fn permanent_loss_example() {
    let pool = CpmmPool::new(sh(100), sh(100), frac("1/2")).unwrap();
    let (_, after) = pool.bet(usd("900"), Outcome::Yes).unwrap();
    assert_eq!((after.reserve(Outcome::Yes), after.reserve(Outcome::No)), (sh(10), sh(1000)));
    // invariant preserved exactly
    assert_eq!(10i64 * 1000, 100 * 100);
    assert_eq!(after.permanent_loss(usd("100"), Outcome::Yes).unwrap(), frac("0.9"));
    // NO wins: the pool holds 1000 NO against a $100 endowment.
    assert_eq!(after.permanent_loss(usd("100"), Outcome::No).unwrap(), frac("-9"));
}

// ---------------------------------------------------------------- lending

#[test]
fn lending_examples() {
    let p = LendingParams::default();
    let half = LendingParams { ltv_max: frac("0.5"), liq_threshold: frac("0.8"), ..p };
    assert_eq!(max_borrow(btc("1"), rate(100_000), &half).unwrap(), usd("50000"));
    // 1 BTC at 115,910 × 0.72
    let mb = max_borrow(btc("1"), rate(115_910), &p).unwrap();
    assert_eq!(mb, usd("83455.20"));
    assert!((mb.to_f64() - 115_910.0 * 0.72).abs() < 1e-6);
    let decline = p.liquidation_decline();
    assert_eq!(decline, Frac::one() - frac("0.72") / frac("0.82"));
    assert!(decline.to_f64() > 0.12 && decline.to_f64() < 0.13);

    let loan = LoanPosition::open(btc("1"), mb, rate(115_910), 0, &p).unwrap();
    assert_eq!(loan.health_factor(rate(115_910), &p), HealthFactor::Finite(frac("0.82") / frac("0.72")));
}

#[test]
fn interest_accrues_simple_annual() {
    let p = LendingParams::default();
    let loan = LoanPosition::open(btc("1"), usd("10000"), rate(100_000), 0, &p).unwrap();
    let year = loan.accrue_interest(365 * 86_400, &p).unwrap();
    assert_eq!(year.debt(), usd("10500"));
    let month = loan.accrue_interest(30 * 86_400, &p).unwrap();
    // 10,000 × 0.05 × 30 / 365
    let oracle = 10_000.0 * 0.05 * 30.0 / 365.0;
    assert!((month.interest.to_f64() - oracle).abs() < 1e-6);
    let big = LoanPosition::open(btc("1"), usd("83455"), rate(115_910), 0, &p).unwrap();
    let month = big.accrue_interest(30 * 86_400, &p).unwrap();
    let oracle = 83_455.0 * (1.0 + 0.05 * 30.0 / 365.0);
    assert!((month.debt().to_f64() - oracle).abs() < 1e-6);
}

#[test]
fn seizure_at_one_hundred_thousand() {
    // 0.6 BTC backing 50,000 of debt is under water at 100,000 (HF 0.984);
    // the seizure is 50,000 / (100,000 × 0.95) BTC rounded up to a satoshi.
    let p = LendingParams::default();
    let loan = LoanPosition::open(btc("0.6"), usd("50000"), rate(150_000), 0, &p).unwrap();
    let (after, liq) = liquidate(&loan, rate(100_000), &p).unwrap();
    let oracle = (50_000.0f64 * 1e8 / (100_000.0 * 0.95)).ceil() as i64;
    assert_eq!(liq.seized.0, oracle);
    assert_eq!(liq.seized, BtcAmount(52_631_579));
    assert_eq!(after.collateral, btc("0.6") - liq.seized);
}

#[test]
fn liquidation_seizure_example() {
    let p = LendingParams::default();
    let loan = LoanPosition::open(btc("1"), usd("50000"), rate(100_000), 0, &p).unwrap();
    let (after, liq) = liquidate(&loan, rate(60_000), &p).unwrap();
    // ceil(50,000 / (60,000 × 0.95) × 1e8)
    let oracle = (50_000.0f64 / (60_000.0 * 0.95) * 1e8).ceil() as i64;
    assert_eq!(liq.seized.0, oracle);
    assert_eq!(liq.seized, BtcAmount(87_719_299));
    assert_eq!(after.collateral, btc("1") - liq.seized);
    // a healthy loan cannot be liquidated
    let loan = LoanPosition::open(btc("1"), usd("50000"), rate(100_000), 0, &p).unwrap();
    assert!(liquidate(&loan, rate(100_000), &p).is_err());
}

#[test]
fn seizure_at_the_threshold() {
    // Debt 50,000 against 2 BTC: HF crosses 1 just below 30,487.80 and the
    // seizure there is ceil(50,000 / (rate × 0.95)) sat.
    let p = LendingParams::default();
    let loan = LoanPosition::open(btc("2"), usd("50000"), rate(100_000), 0, &p).unwrap();
    let r = 30_487;
    let (_, liq) = liquidate(&loan, rate(r), &p).unwrap();
    let oracle = (50_000.0f64 * 1e8 / (r as f64 * 0.95)).ceil() as i64;
    assert_eq!(liq.seized.0, oracle);
    assert_eq!(liq.repaid, usd("50000"));
    assert_eq!(liq.bad_debt, UsdAmount::ZERO);
}

// --------------------------------------------------------------- redirect

fn no_book() -> Venue {
    let mut v = Venue::usd("usd", TickSize::new(10_000).unwrap(), Frac::zero());
    v.place_limit(BOOK, Outcome::No, Side::Ask, usd("0.80").0, sh(200_000)).unwrap();
    v.place_limit(BOOK, Outcome::No, Side::Bid, usd("0.79").0, sh(200_000)).unwrap();
    v
}

fn win_params() -> RedirectParams {
    RedirectParams {
        target_ltv: frac("0.72"),
        hf_guard: frac("1.1"),
        lending: LendingParams { borrow_rate: Frac::zero(), ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn redirect_win_example() {
    let r = rate(115_910);
    let mut v = no_book();
    let mut pos = open_position(USER, btc("1"), r, win_params(), &mut v, usd("0.80").0, Outcome::No, 0).unwrap();
    // floor(83,455.20 / 0.80) in integer micro-units
    assert_eq!(pos.shares, sh(83_455_200_000 / 800_000));
    assert_eq!(pos.shares, sh(104_319));
    v.resolve(Outcome::No).unwrap();
    let rep = pos.settle(Outcome::No, r).unwrap();
    // profit = 104,319 − 83,455.20 = 20,863.80 USD = 0.18 BTC
    assert_eq!(rep.proceeds_usd, usd("104319"));
    assert_eq!(rep.btc_pnl, btc("0.18"));
    assert_eq!(rep.user_total_btc, btc("1.18"));
    assert_eq!(rep.collateral_returned, btc("1"));
}

#[test]
fn redirect_settle_at_higher_rate() {
    let mut v = no_book();
    let mut pos =
        open_position(USER, btc("1"), rate(115_910), win_params(), &mut v, usd("0.80").0, Outcome::No, 0).unwrap();
    v.resolve(Outcome::No).unwrap();
    let rep = pos.settle(Outcome::No, rate(140_000)).unwrap();
    // the same USD profit buys fewer BTC: 20,863.80 / 140,000
    let oracle = 20_863.80 / 140_000.0;
    assert!((rep.btc_pnl.to_f64() - oracle).abs() < 1e-8);
    assert!((rep.btc_pnl.to_f64() - 0.149).abs() < 0.0005);

    let mut v = no_book();
    let p = RedirectParams { target_ltv: frac("0.40"), ..win_params() };
    let pos = open_position(USER, btc("1"), rate(100_000), p, &mut v, usd("0.80").0, Outcome::No, 0).unwrap();
    assert_eq!(pos.borrowed, usd("40000"));
}

#[test]
fn redirect_loss_with_injection_returns_collateral() {
    let r = rate(115_910);
    let mut v = no_book();
    let p = RedirectParams { shortfall: ShortfallPolicy::InjectUsd, ..win_params() };
    let mut pos = open_position(USER, btc("1"), r, p, &mut v, usd("0.80").0, Outcome::No, 0).unwrap();
    v.resolve(Outcome::Yes).unwrap();
    let rep = pos.settle(Outcome::Yes, r).unwrap();
    assert_eq!(rep.collateral_returned, btc("1"));
    assert_eq!(rep.shortfall, usd("83455.20"));
    assert!(!rep.liquidated);
}

// ---------------------------------------------------------------- presets

fn preset_report(name: &str) -> btcpm_core::scenario::ComparisonReport {
    let cfg = ScenarioConfig::load(preset(name).unwrap().toml).unwrap();
    run_scenario(&cfg).unwrap()
}

#[test]
fn crossmm_presets_lock_the_edge() {
    for name in ["paper-crossmm", "paper-crossmm-put"] {
        let rep = preset_report(name);
        let row = rep.row(Mechanism::Crossmm).unwrap();
        assert_eq!(row.maker_pnl_usd, Some(usd("0.008")), "{name}");
        assert_eq!(row.user_principal_loss_btc, BtcAmount::ZERO);
        assert_eq!(row.accounting_residual, 0.0);
    }
}

#[test]
fn amm_presets() {
    let rep = preset_report("paper-amm-subsidy");
    let d = rep.detail(Mechanism::Amm).unwrap();
    assert_eq!(d["implied_yes_exact"], "1/3");
    let rep = preset_report("paper-permanent-loss");
    let d = rep.detail(Mechanism::Amm).unwrap();
    assert_eq!(d["permanent_loss"], "0.9");
    assert_eq!(rep.row(Mechanism::Amm).unwrap().maker_pnl_usd, Some(usd("-90")));
}

#[test]
fn redirect_presets() {
    let rep = preset_report("paper-redirect-win");
    let row = rep.row(Mechanism::Redirect).unwrap();
    assert_eq!(row.user_btc_pnl, btc("0.18"));
    assert_eq!(row.liquidation_count, 0);
    let rep = preset_report("liquidation-edge");
    let row = rep.row(Mechanism::Redirect).unwrap();
    assert_eq!(row.liquidation_count, 1);
    let total = rep.detail(Mechanism::Redirect).unwrap()["report"]["user_total_btc"].as_f64().unwrap();
    assert!(total < 1.0);
    let cm = rep.row(Mechanism::Crossmm).unwrap();
    assert_eq!(cm.user_principal_loss_btc, BtcAmount::ZERO);
}
