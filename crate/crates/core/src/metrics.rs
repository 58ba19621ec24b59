//! Per-tier throughput and delay accumulators.

use serde::{Deserialize, Serialize};

/// Measurement window `[warmup, warmup + measure)` in primary slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub warmup: u64,
    pub measure: u64,
}

impl Window {
    pub fn end(&self) -> u64 {
        self.warmup + self.measure
    }

    pub fn contains(&self, t: u64) -> bool {
        t >= self.warmup && t < self.end()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TierAccumulator {
    delays: Vec<f64>,
    payload: f64,
    delivered: u64,
    pub created: u64,
}

impl TierAccumulator {
    /// Record a delivery at `t_delivered` of a packet born at `t_created`
    /// carrying `payload`; `delay` is in the tier's own slot unit.
    pub fn record(&mut self, w: &Window, t_created: u64, t_delivered: u64, delay: f64, payload: f64) {
        if w.contains(t_delivered) {
            self.delivered += 1;
            self.payload += payload;
            if t_created >= w.warmup {
                self.delays.push(delay);
            }
        }
    }

    /// Delay sample for a packet born inside the window but delivered after
    /// it closed (drain phase).
    pub fn push_delay(&mut self, delay: f64) {
        self.delays.push(delay);
    }

    pub fn finish(mut self, w: &Window, pairs: usize, in_flight: u64) -> TierReport {
        self.delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pct = |q: f64| -> f64 {
            if self.delays.is_empty() {
                f64::NAN
            } else {
                let i = ((self.delays.len() - 1) as f64 * q).round() as usize;
                self.delays[i]
            }
        };
        let mean = if self.delays.is_empty() {
            f64::NAN
        } else {
            self.delays.iter().sum::<f64>() / self.delays.len() as f64
        };
        let denom = (w.measure as f64) * pairs.max(1) as f64;
        TierReport {
            pairs,
            created: self.created,
            delivered: self.delivered,
            in_flight,
            throughput_per_pair: self.payload / denom,
            packet_rate_per_pair: self.delivered as f64 / denom,
            sum_throughput: self.payload / w.measure as f64,
            delay_samples: self.delays.len(),
            delay_mean: mean,
            delay_p50: pct(0.5),
            delay_p90: pct(0.9),
            delay_p99: pct(0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierReport {
    pub pairs: usize,
    pub created: u64,
    pub delivered: u64,
    pub in_flight: u64,
    /// Delivered payload per pair per slot.
    pub throughput_per_pair: f64,
    /// Delivered packets per pair per slot (payload ignored).
    pub packet_rate_per_pair: f64,
    pub sum_throughput: f64,
    pub delay_samples: usize,
    pub delay_mean: f64,
    pub delay_p50: f64,
    pub delay_p90: f64,
    pub delay_p99: f64,
}
