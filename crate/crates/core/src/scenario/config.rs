//! Scenario configuration: TOML schema, semantic validation with field
//! paths, and the committed presets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::amm::SeedMode;
use crate::crossmm::HedgeNotional;
use crate::money::{Frac, Side, MICROS_PER_SHARE, MICROS_PER_USD, SATS_PER_BTC};
use crate::redirect::RedirectParams;
use crate::venue::Outcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Number of ticks; the price path has one sample per tick.
    pub ticks: u64,
    /// Wall-clock length of a tick, used for interest accrual.
    #[serde(default = "default_tick_seconds")]
    pub tick_seconds: u64,
    #[serde(default)]
    pub seed: u64,
    pub price_path: PathSpec,
    pub resolution: Resolution,
    #[serde(default)]
    pub fees: FeeSchedule,
    pub source: SourceConfig,
    pub crossmm: Option<CrossMmConfig>,
    pub amm: Option<AmmConfig>,
    pub redirect: Option<RedirectConfig>,
}

fn default_tick_seconds() -> u64 {
    3_600
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Constant {
        initial: Frac,
    },
    Steps {
        initial: Frac,
        steps: Vec<StepSpec>,
    },
    RandomWalk {
        initial: Frac,
        /// Per-tick log drift.
        #[serde(default)]
        drift: f64,
        /// Per-tick log volatility.
        vol: f64,
    },
}

impl PathSpec {
    pub fn initial(&self) -> Frac {
        match self {
            PathSpec::Constant { initial } | PathSpec::Steps { initial, .. } | PathSpec::RandomWalk { initial, .. } => {
                *initial
            }
        }
    }
}

/// From `tick` on, the rate is `rate`, or the previous rate × (1 + `change`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub tick: u64,
    pub rate: Option<Frac>,
    pub change: Option<Frac>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub tick: u64,
    pub winner: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FeeSchedule {
    pub source_taker: Frac,
    pub downstream_taker: Frac,
    pub amm: Frac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Price tick in USD.
    pub tick: Frac,
    #[serde(default)]
    pub book: Vec<LevelConfig>,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub outcome: Outcome,
    pub side: Side,
    pub price: Frac,
    pub size: Frac,
}

/// Replaces one side of one source book at `tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub tick: u64,
    pub outcome: Outcome,
    pub side: Side,
    /// `[price, size]` pairs; empty clears the side.
    #[serde(default)]
    pub levels: Vec<(Frac, Frac)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TakerSide {
    Buy,
    Sell,
}

impl TakerSide {
    pub fn side(self) -> Side {
        match self {
            TakerSide::Buy => Side::Bid,
            TakerSide::Sell => Side::Ask,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossMmConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// USD margin on each side of the mirrored quote.
    pub fee: Frac,
    #[serde(default)]
    pub put_premium_sats: i64,
    #[serde(default)]
    pub hedge_notional: HedgeNotional,
    pub quote_size: Frac,
    #[serde(default = "default_quote_outcomes")]
    pub quote_outcomes: Vec<Outcome>,
    #[serde(default = "default_retries")]
    pub hedge_retries: u32,
    #[serde(default)]
    pub hedge_delay: u64,
    #[serde(default = "default_downstream_tick")]
    pub downstream_tick_sats: i64,
    pub unwind_tick: Option<u64>,
    /// Downstream user market orders.
    #[serde(default)]
    pub flow: Vec<FlowEntry>,
}

fn default_quote_outcomes() -> Vec<Outcome> {
    vec![Outcome::No]
}

fn default_retries() -> u32 {
    1
}

fn default_downstream_tick() -> i64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub tick: u64,
    pub outcome: Outcome,
    pub side: TakerSide,
    pub size: Frac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmmConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// USD subsidy.
    pub subsidy: Frac,
    pub prior: Frac,
    pub mode: SeedMode,
    #[serde(default)]
    pub bets: Vec<BetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetEntry {
    pub tick: u64,
    pub outcome: Outcome,
    /// USD spent.
    pub cash: Frac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedirectConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    pub collateral_btc: Frac,
    pub outcome: Outcome,
    /// Worst price paid for the venue position, USD.
    pub market_price: Frac,
    #[serde(default)]
    pub open_tick: u64,
    #[serde(default)]
    pub params: RedirectParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Crossmm,
    Amm,
    Redirect,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Crossmm, Mechanism::Amm, Mechanism::Redirect];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Crossmm => "crossmm",
            Mechanism::Amm => "amm",
            Mechanism::Redirect => "redirect",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "crossmm" => Ok(Mechanism::Crossmm),
            "amm" => Ok(Mechanism::Amm),
            "redirect" => Ok(Mechanism::Redirect),
            other => Err(format!("unknown mechanism `{other}` (expected crossmm, amm or redirect)")),
        }
    }
}

/// One problem with a config, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { issues: vec![ConfigIssue { path: path.into(), message: message.into() }] }
    }
}

/// Integer units for `f` at `scale` units per whole, if exact.
pub(crate) fn fixed(f: Frac, scale: i64) -> Option<i64> {
    let v = f * Frac::from_integer(scale as i128);
    let r = v.ratio();
    if *r.denom() != 1 {
        return None;
    }
    i64::try_from(*r.numer()).ok()
}

struct Checker {
    issues: Vec<ConfigIssue>,
}

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue { path: path.into(), message: message.into() });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.fail(path, message);
        }
    }

    /// Value must be exact at `scale` and satisfy `pred`.
    fn amount(&mut self, f: Frac, scale: i64, path: &str, pred: impl Fn(i64) -> bool, want: &str) -> Option<i64> {
        match fixed(f, scale) {
            None => {
                self.fail(path, format!("{f} has more precision than 1/{scale}"));
                None
            }
            Some(v) if !pred(v) => {
                self.fail(path, format!("{f} must be {want}"));
                None
            }
            Some(v) => Some(v),
        }
    }

    fn fraction(&mut self, f: Frac, path: &str, lo_open: bool, hi_open: bool) {
        let lo_ok = if lo_open { f > Frac::zero() } else { !f.is_negative() };
        let hi_ok = if hi_open { f < Frac::one() } else { f <= Frac::one() };
        let range = format!("{}0, 1{}", if lo_open { "(" } else { "[" }, if hi_open { ")" } else { "]" });
        self.check(lo_ok && hi_ok, path, format!("{f} must lie in {range}"));
    }

    fn tick(&mut self, t: u64, limit: u64, path: &str) {
        self.check(t < limit, path, format!("tick {t} must be below {limit}"));
    }
}

impl ScenarioConfig {
    /// Parses TOML; type errors carry the field path.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de =
            toml::Deserializer::parse(text).map_err(|e| ConfigError::single("", e.to_string().trim().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            ConfigError::single(path, e.into_inner().message().trim().to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parses and validates.
    pub fn load(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::from_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn enabled(&self) -> Vec<Mechanism> {
        let mut v = Vec::new();
        if self.crossmm.as_ref().is_some_and(|c| c.enabled) {
            v.push(Mechanism::Crossmm);
        }
        if self.amm.as_ref().is_some_and(|c| c.enabled) {
            v.push(Mechanism::Amm);
        }
        if self.redirect.as_ref().is_some_and(|c| c.enabled) {
            v.push(Mechanism::Redirect);
        }
        v
    }

    /// Semantic checks. Every issue is reported, each with its field path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checker { issues: Vec::new() };
        let n = self.ticks;
        c.check(n >= 1, "ticks", "must be at least 1");
        c.check(!self.name.trim().is_empty(), "name", "must not be empty");
        c.check(
            self.resolution.tick >= 1 && self.resolution.tick <= n,
            "resolution.tick",
            format!("must be in [1, {n}]"),
        );

        let usd_rate = |c: &mut Checker, f: Frac, path: &str| {
            c.amount(f, MICROS_PER_USD, path, |v| v > 0, "positive");
        };
        usd_rate(&mut c, self.price_path.initial(), "price_path.initial");
        match &self.price_path {
            PathSpec::Constant { .. } => {}
            PathSpec::Steps { steps, .. } => {
                let mut last = None;
                for (i, s) in steps.iter().enumerate() {
                    let p = format!("price_path.steps[{i}]");
                    c.tick(s.tick, n, &format!("{p}.tick"));
                    if last.is_some_and(|l| s.tick <= l) {
                        c.fail(format!("{p}.tick"), "steps must be in increasing tick order");
                    }
                    last = Some(s.tick);
                    match (s.rate, s.change) {
                        (Some(r), None) => usd_rate(&mut c, r, &format!("{p}.rate")),
                        (None, Some(ch)) => {
                            c.check(ch > Frac::zero() - Frac::one(), format!("{p}.change"), "must be greater than -1")
                        }
                        _ => c.fail(p, "set exactly one of `rate` or `change`"),
                    }
                }
            }
            PathSpec::RandomWalk { drift, vol, .. } => {
                c.check(vol.is_finite() && *vol >= 0.0, "price_path.vol", "must be finite and non-negative");
                c.check(drift.is_finite(), "price_path.drift", "must be finite");
            }
        }

        c.fraction(self.fees.source_taker, "fees.source_taker", false, true);
        c.fraction(self.fees.downstream_taker, "fees.downstream_taker", false, true);
        c.fraction(self.fees.amm, "fees.amm", false, true);

        let tick =
            c.amount(self.source.tick, MICROS_PER_USD, "source.tick", |v| v > 0 && v < MICROS_PER_USD, "in (0, 1)");
        let price_ok = |c: &mut Checker, f: Frac, path: &str| {
            if let Some(p) = c.amount(f, MICROS_PER_USD, path, |v| v > 0 && v < MICROS_PER_USD, "in (0, 1)") {
                if let Some(t) = tick {
                    c.check(p % t == 0, path, format!("{f} is not on the {} tick grid", self.source.tick));
                }
            }
        };
        for (i, l) in self.source.book.iter().enumerate() {
            price_ok(&mut c, l.price, &format!("source.book[{i}].price"));
            c.amount(l.size, MICROS_PER_SHARE, &format!("source.book[{i}].size"), |v| v > 0, "positive");
        }
        for (i, s) in self.source.script.iter().enumerate() {
            let p = format!("source.script[{i}]");
            c.tick(s.tick, n, &format!("{p}.tick"));
            for (j, (price, size)) in s.levels.iter().enumerate() {
                price_ok(&mut c, *price, &format!("{p}.levels[{j}][0]"));
                c.amount(*size, MICROS_PER_SHARE, &format!("{p}.levels[{j}][1]"), |v| v > 0, "positive");
            }
        }

        let res = self.resolution.tick;
        if let Some(x) = &self.crossmm {
            c.amount(x.fee, MICROS_PER_USD, "crossmm.fee", |v| (0..MICROS_PER_USD).contains(&v), "in [0, 1)");
            c.check(x.put_premium_sats >= 0, "crossmm.put_premium_sats", "must be non-negative");
            c.amount(x.quote_size, MICROS_PER_SHARE, "crossmm.quote_size", |v| v > 0, "positive");
            c.check(!x.quote_outcomes.is_empty(), "crossmm.quote_outcomes", "must name at least one outcome");
            c.check(x.downstream_tick_sats >= 1, "crossmm.downstream_tick_sats", "must be at least 1");
            if let Some(u) = x.unwind_tick {
                c.check(u < res, "crossmm.unwind_tick", format!("must be before the resolution tick {res}"));
            }
            for (i, f) in x.flow.iter().enumerate() {
                c.tick(f.tick, res, &format!("crossmm.flow[{i}].tick"));
                c.amount(f.size, MICROS_PER_SHARE, &format!("crossmm.flow[{i}].size"), |v| v > 0, "positive");
            }
        }
        if let Some(a) = &self.amm {
            c.amount(a.subsidy, MICROS_PER_USD, "amm.subsidy", |v| v > 0, "positive");
            c.fraction(a.prior, "amm.prior", true, true);
            for (i, b) in a.bets.iter().enumerate() {
                c.tick(b.tick, res, &format!("amm.bets[{i}].tick"));
                c.amount(b.cash, MICROS_PER_USD, &format!("amm.bets[{i}].cash"), |v| v >= 0, "non-negative");
            }
        }
        if let Some(r) = &self.redirect {
            c.amount(r.collateral_btc, SATS_PER_BTC, "redirect.collateral_btc", |v| v > 0, "positive");
            price_ok(&mut c, r.market_price, "redirect.market_price");
            c.tick(r.open_tick, res, "redirect.open_tick");
            if let Err(e) = r.params.validate() {
                c.fail("redirect.params", e.to_string());
            }
            if let Some(t) = r.params.top_up {
                c.check(t.0 > 0, "redirect.params.top_up_sats", "must be positive");
            }
        }
        c.check(
            !self.enabled().is_empty(),
            "",
            "no mechanism is enabled (add a [crossmm], [amm] or [redirect] section)",
        );

        if c.issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues: c.issues })
        }
    }
}

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "paper-crossmm",
        summary: "USD source mirrored onto a BTC venue at 100k; one hedged fill locks $0.008 a set",
        toml: include_str!("../../presets/paper-crossmm.toml"),
    },
    Preset {
        name: "paper-crossmm-put",
        summary: "Same quotes with BTC/USD stepping down to 80k; the put keeps the edge",
        toml: include_str!("../../presets/paper-crossmm-put.toml"),
    },
    Preset {
        name: "paper-amm-subsidy",
        summary: "$100 subsidy at prior 1/3 seeding a standard CPMM: pool (100, 50), 50 NO left over",
        toml: include_str!("../../presets/paper-amm-subsidy.toml"),
    },
    Preset {
        name: "paper-permanent-loss",
        summary: "A $900 YES bet drifts a (100, 100) pool to (10, 1000); YES wins and the LP loses 90%",
        toml: include_str!("../../presets/paper-permanent-loss.toml"),
    },
    Preset {
        name: "paper-redirect-win",
        summary: "1 BTC at 115,910 borrowed at 72% into NO at $0.80; NO wins, user ends with 1.18 BTC",
        toml: include_str!("../../presets/paper-redirect-win.toml"),
    },
    Preset {
        name: "liquidation-edge",
        summary: "Max borrow, keeper off, BTC/USD falls 13%: the loan is liquidated while the cross-maker's user keeps principal",
        toml: include_str!("../../presets/liquidation-edge.toml"),
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
