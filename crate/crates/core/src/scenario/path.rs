//! BTC/USD price paths: constant, scripted steps, or a seeded geometric
//! random walk.

use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;

use super::config::{fixed, PathSpec};
use crate::money::{BtcUsdRate, Frac, MoneyResult, MICROS_PER_USD};

/// Standard normal draws by Box-Muller, one pair at a time.
pub struct Normal {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl Normal {
    pub fn new(seed: u64) -> Self {
        Self { rng: SplitMix64::seed_from_u64(seed), spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// `n` samples of `initial · exp(Σ (drift + vol·z))`, rounded to the
/// micro-USD. Sample 0 is `initial`.
pub fn random_walk(initial: BtcUsdRate, drift: f64, vol: f64, n: usize, seed: u64) -> MoneyResult<Vec<BtcUsdRate>> {
    let mut normal = Normal::new(seed);
    let mut out = Vec::with_capacity(n);
    let mut log_rate = initial.to_f64().ln();
    for i in 0..n {
        if i > 0 {
            log_rate += drift + vol * normal.sample();
        }
        let micros = (log_rate.exp() * MICROS_PER_USD as f64).round();
        out.push(BtcUsdRate::from_micros((micros as i64).max(1))?);
    }
    Ok(out)
}

fn rate_of(f: Frac) -> MoneyResult<BtcUsdRate> {
    BtcUsdRate::from_micros(fixed(f, MICROS_PER_USD).unwrap_or(0))
}

/// One rate per tick for a validated spec.
pub fn generate(spec: &PathSpec, ticks: u64, seed: u64) -> MoneyResult<Vec<BtcUsdRate>> {
    let n = ticks as usize;
    let initial = rate_of(spec.initial())?;
    match spec {
        PathSpec::Constant { .. } => Ok(vec![initial; n]),
        PathSpec::Steps { steps, .. } => {
            let mut out = Vec::with_capacity(n);
            let mut rate = initial;
            let mut next = steps.iter().peekable();
            for t in 0..ticks {
                while let Some(s) = next.next_if(|s| s.tick == t) {
                    rate = match (s.rate, s.change) {
                        (Some(r), _) => rate_of(r)?,
                        (None, Some(ch)) => rate.scaled(Frac::one() + ch)?,
                        (None, None) => rate,
                    };
                }
                out.push(rate);
            }
            Ok(out)
        }
        PathSpec::RandomWalk { drift, vol, .. } => random_walk(initial, *drift, *vol, n, seed),
    }
}
