//! Seeded synthetic market data. Every value is a pure function of
//! (seed, company slug, tool, arguments).

use serde_json::{json, Value};

pub const FIRST_YEAR: i64 = 2020;
pub const LAST_YEAR: i64 = 2024;
pub const HISTORY_LEN: usize = 10;
pub const TIMELINES: [&str; 3] = ["d", "w", "m"];
pub const TARGET_TYPES: [&str; 5] = ["current", "low", "high", "mean", "median"];

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf29ce484222325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x100000001b3))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) keyed by `key`.
pub fn unit(seed: u64, key: &str) -> f64 {
    (splitmix64(seed ^ fnv1a64(key.as_bytes())) >> 11) as f64 / (1u64 << 53) as f64
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticMarket {
    pub seed: u64,
}

impl SyntheticMarket {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn u(&self, slug: &str, key: &str) -> f64 {
        unit(self.seed, &format!("{slug}|{key}"))
    }

    pub fn current_price(&self, slug: &str) -> f64 {
        let base = 10.0 + 490.0 * self.u(slug, "base");
        round2(base * (0.9 + 0.2 * self.u(slug, "current")))
    }

    /// Last ten closes, oldest first; the final value is the current price.
    pub fn price_history(&self, slug: &str, timeline: &str) -> Option<Vec<f64>> {
        let step = match timeline {
            "d" => 0.01,
            "w" => 0.03,
            "m" => 0.06,
            _ => return None,
        };
        let mut price = self.current_price(slug);
        let mut values = vec![price];
        for i in 1..HISTORY_LEN {
            price *= 1.0 + step * (2.0 * self.u(slug, &format!("history|{timeline}|{i}")) - 1.0);
            values.push(round2(price));
        }
        values.reverse();
        Some(values)
    }

    pub fn price_target(&self, slug: &str, target_type: &str) -> Option<f64> {
        let current = self.current_price(slug);
        let mean = current * (0.8 + 0.5 * self.u(slug, "target|mean"));
        let value = match target_type {
            "current" => current,
            "mean" => mean,
            "low" => mean * (0.7 + 0.2 * self.u(slug, "target|low")),
            "high" => mean * (1.1 + 0.3 * self.u(slug, "target|high")),
            "median" => mean * (0.95 + 0.1 * self.u(slug, "target|median")),
            _ => return None,
        };
        Some(round2(value))
    }

    fn revenue_raw(&self, slug: &str, year: i64) -> f64 {
        let mut revenue = 1e8 + 9.99e10 * self.u(slug, "revenue");
        for y in FIRST_YEAR + 1..=year {
            revenue *= 0.9 + 0.3 * self.u(slug, &format!("growth|{y}"));
        }
        revenue
    }

    pub fn revenue(&self, slug: &str, year: i64) -> Option<i64> {
        (FIRST_YEAR..=LAST_YEAR).contains(&year).then(|| self.revenue_raw(slug, year).round() as i64)
    }

    pub fn net_income(&self, slug: &str, year: i64) -> Option<i64> {
        let margin = -0.05 + 0.3 * self.u(slug, &format!("margin|{year}"));
        (FIRST_YEAR..=LAST_YEAR)
            .contains(&year)
            .then(|| (self.revenue_raw(slug, year) * margin).round() as i64)
    }

    /// Either the single year or every available year.
    pub fn yearly(&self, slug: &str, metric: &str, year: Option<i64>) -> Result<Value, String> {
        let f = |y| match metric {
            "revenue" => self.revenue(slug, y),
            _ => self.net_income(slug, y),
        };
        match year {
            Some(y) => f(y)
                .map(|v| json!({ "year": y, metric: v }))
                .ok_or_else(|| format!("no {metric} data for {y}; available years are {FIRST_YEAR}-{LAST_YEAR}")),
            None => {
                let all: serde_json::Map<String, Value> =
                    (FIRST_YEAR..=LAST_YEAR).map(|y| (y.to_string(), json!(f(y)))).collect();
                Ok(json!({ metric: all }))
            }
        }
    }
}
