//! Closed-form scaling predictions, concentration bounds and queueing
//! formulas used as oracles and as predicted curves.
//!
//! Order-of-growth laws are evaluated with unit constants, so a prediction
//! is only meaningful through the ratio measured/predicted across a sweep.
//! Logarithms are natural.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::SimRng;

/// Frame length in primary slots.
pub const FRAME: f64 = 64.0;

/// Fixed ingress plus egress offset (in primary slots) of the primary delay
/// over the secondary transit time.
pub const PRIMARY_DELAY_OFFSET: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    LambdaP,
    TP,
    DPStatic,
    DPIid,
    DPRw,
    LambdaSStatic,
    DSStatic,
    LambdaSMobile,
    DSIid,
    DSRw,
    TradeoffPStatic,
    TradeoffPRw,
    TradeoffSStatic,
}

impl Quantity {
    pub const ALL: [Quantity; 13] = [
        Quantity::LambdaP,
        Quantity::TP,
        Quantity::DPStatic,
        Quantity::DPIid,
        Quantity::DPRw,
        Quantity::LambdaSStatic,
        Quantity::DSStatic,
        Quantity::LambdaSMobile,
        Quantity::DSIid,
        Quantity::DSRw,
        Quantity::TradeoffPStatic,
        Quantity::TradeoffPRw,
        Quantity::TradeoffSStatic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::LambdaP => "lambda_p",
            Quantity::TP => "T_p",
            Quantity::DPStatic => "D_p_static",
            Quantity::DPIid => "D_p_iid",
            Quantity::DPRw => "D_p_rw",
            Quantity::LambdaSStatic => "lambda_s_static",
            Quantity::DSStatic => "D_s_static",
            Quantity::LambdaSMobile => "lambda_s_mobile",
            Quantity::DSIid => "D_s_iid",
            Quantity::DSRw => "D_s_rw",
            Quantity::TradeoffPStatic => "tradeoff_p_static",
            Quantity::TradeoffPRw => "tradeoff_p_rw",
            Quantity::TradeoffSStatic => "tradeoff_s_static",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|q| q.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown quantity `{s}`")))
    }
}

/// Inputs echoed into every prediction. Unused fields may be NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub n: f64,
    pub beta: f64,
    /// Secondary density; `n^beta` unless set explicitly.
    pub m: f64,
    pub a_p: f64,
    pub a_s: f64,
    pub s_rw: f64,
    pub p: f64,
    /// Throughput to eliminate in tradeoff laws; NaN selects the
    /// matching throughput law.
    pub lambda: f64,
}

impl Inputs {
    pub fn two_tier(n: f64, beta: f64, a_p: f64) -> Self {
        let m = n.powf(beta);
        Self {
            n,
            beta,
            m,
            a_p,
            a_s: secondary_cell_area(n, m, a_p),
            s_rw: f64::NAN,
            p: f64::NAN,
            lambda: f64::NAN,
        }
    }

    pub fn secondary_only(m: f64) -> Self {
        Self {
            n: f64::NAN,
            beta: f64::NAN,
            m,
            a_p: f64::NAN,
            a_s: 1.0 / m,
            s_rw: f64::NAN,
            p: f64::NAN,
            lambda: f64::NAN,
        }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s_rw = s;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPrediction {
    pub quantity: Quantity,
    pub value: f64,
    pub inputs: Inputs,
}

/// Smallest primary cell area for which every cell is populated w.h.p.
pub fn minimal_ap(n: f64, beta: f64) -> f64 {
    2f64.sqrt() * beta * n.ln() / n
}

/// `n^2 a_p^2 / (m ln m)`, without the floor check.
pub fn secondary_cell_area(n: f64, m: f64, a_p: f64) -> f64 {
    n * n * a_p * a_p / (m * m.ln())
}

/// Connectivity floor of the secondary grid, `2 ln m / m`.
pub fn secondary_floor(m: f64) -> f64 {
    2.0 * m.ln() / m
}

/// Secondary cell area for a given primary cell area. Errors if `a_p` is
/// below the minimal primary cell area.
pub fn size_secondary_grid(n: f64, beta: f64, a_p: f64) -> Result<f64> {
    if !(beta >= 2.0) {
        return Err(Error::Precondition {
            hypothesis: "beta >= 2",
            detail: format!("beta = {beta}"),
        });
    }
    let floor = minimal_ap(n, beta);
    if a_p < floor * (1.0 - 1e-12) {
        return Err(Error::Precondition {
            hypothesis: "a_p >= sqrt(2) beta ln n / n",
            detail: format!("a_p = {a_p:.6e} < {floor:.6e}"),
        });
    }
    let m = n.powf(beta);
    let a_s = secondary_cell_area(n, m, a_p);
    if a_s < secondary_floor(m) * (1.0 - 1e-9) {
        return Err(Error::Invariant(format!(
            "a_s = {a_s:.6e} below 2 ln m / m = {:.6e}",
            secondary_floor(m)
        )));
    }
    Ok(a_s)
}

/// Number of secondary relays a primary packet is split across.
pub fn relay_number(m: f64) -> usize {
    (m / m.ln()).sqrt().ceil() as usize
}

fn check(q: Quantity, i: &Inputs) -> Result<()> {
    let two_tier = !matches!(
        q,
        Quantity::LambdaSMobile | Quantity::DSIid | Quantity::DSRw
    );
    if two_tier {
        if !(i.beta >= 2.0) {
            return Err(Error::Precondition {
                hypothesis: "beta >= 2",
                detail: format!("beta = {}", i.beta),
            });
        }
        let floor = minimal_ap(i.n, i.beta);
        if !(i.a_p >= floor * (1.0 - 1e-12)) {
            return Err(Error::Precondition {
                hypothesis: "a_p >= sqrt(2) beta ln n / n",
                detail: format!("a_p = {:.6e} < {floor:.6e}", i.a_p),
            });
        }
    }
    if matches!(q, Quantity::DPRw | Quantity::TradeoffPRw) && !(i.s_rw >= i.a_p) {
        return Err(Error::Precondition {
            hypothesis: "S >= a_p",
            detail: format!("S = {}, a_p = {}", i.s_rw, i.a_p),
        });
    }
    Ok(())
}

/// Unit-constant prediction, after checking the law's hypotheses.
pub fn predict(q: Quantity, inputs: Inputs) -> Result<ScalingPrediction> {
    check(q, &inputs)?;
    evaluate(q, inputs)
}

/// Unit-constant prediction without hypothesis checks (used when a run
/// deliberately relaxes a precondition to fit desk-scale geometry).
pub fn evaluate(q: Quantity, i: Inputs) -> Result<ScalingPrediction> {
    let m = i.m;
    let value = match q {
        Quantity::LambdaP => 1.0 / (i.n * i.a_p),
        Quantity::TP => 1.0 / i.a_p,
        Quantity::DPStatic => (m * m.ln()).sqrt() / (i.n * i.a_p),
        Quantity::DPIid => 1.0,
        Quantity::DPRw => 1.0 / i.s_rw,
        Quantity::LambdaSStatic => 1.0 / (m * i.a_s.sqrt()),
        Quantity::DSStatic => 1.0 / i.a_s.sqrt(),
        Quantity::LambdaSMobile => 1.0,
        Quantity::DSIid => m,
        Quantity::DSRw => m * m * i.s_rw * (1.0 / i.s_rw).ln(),
        Quantity::TradeoffPStatic => {
            let lp = if i.lambda.is_nan() { 1.0 / (i.n * i.a_p) } else { i.lambda };
            (m * m.ln()).sqrt() * lp
        }
        Quantity::TradeoffPRw => {
            let lp = if i.lambda.is_nan() { 1.0 / (i.n * i.a_p) } else { i.lambda };
            i.n / lp
        }
        Quantity::TradeoffSStatic => {
            let ls = if i.lambda.is_nan() { 1.0 / (m * i.a_s.sqrt()) } else { i.lambda };
            m * ls
        }
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{} evaluates to {value} for {i:?}",
            q.name()
        )));
    }
    Ok(ScalingPrediction {
        quantity: q,
        value,
        inputs: i,
    })
}

/// Primary delay implied by a secondary transit time (secondary slots):
/// three primary slots per secondary frame of 64 slots, plus a fixed offset.
pub fn primary_delay_from_secondary(d_s: f64) -> f64 {
    3.0 / FRAME * d_s + PRIMARY_DELAY_OFFSET
}

/// `P(X <= eps1 * mu) <= exp(-mu (1 - eps1 (1 - ln eps1)))`.
pub fn chernoff_lower_bound(mu: f64, eps1: f64) -> Result<f64> {
    if !(mu > 0.0) || !(eps1 > 0.0 && eps1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need mu > 0 and 0 < eps1 < 1 (mu = {mu}, eps1 = {eps1})"
        )));
    }
    Ok((-mu * chernoff_lower_exponent(eps1)).exp())
}

pub fn chernoff_lower_exponent(eps1: f64) -> f64 {
    1.0 - eps1 * (1.0 - eps1.ln())
}

/// `P(X >= eps2 * mu) <= e^-mu (e / eps2)^(eps2 mu)`, for `eps2 > e`.
pub fn chernoff_upper_bound(mu: f64, eps2: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu = {mu}")));
    }
    if !(eps2 > std::f64::consts::E) {
        return Err(Error::InvalidParameter(format!("eps2 = {eps2} must exceed e")));
    }
    Ok((-mu + eps2 * mu * (1.0 - eps2.ln())).exp())
}

/// `bound / a_p`: union over the `1/a_p` cells. Not clipped at 1.
pub fn union_bound_over_cells(bound: f64, a_p: f64) -> f64 {
    bound / a_p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityKind {
    Iid,
    RandomWalk,
}

/// Mean delay (primary slots) of the Bernoulli-arrival, Bernoulli-service
/// queue that models one relay queue.
pub fn queue_delay(model: MobilityKind, p: f64, q: f64, tau: f64) -> Result<f64> {
    if !(p > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < p and q <= 1 (p = {p}, q = {q})")));
    }
    if p >= q {
        return Err(Error::Unstable { p, q });
    }
    let base = FRAME * (1.0 - p) / (q - p);
    match model {
        MobilityKind::Iid => Ok(base),
        MobilityKind::RandomWalk => {
            if !(tau >= 1.0) {
                return Err(Error::InvalidParameter(format!("tau = {tau} must be >= 1")));
            }
            Ok(base * tau)
        }
    }
}

/// Per-slot delivery probability `1 - (1 - a_p)^M` (iid) or the lower bound
/// `1 - (1 - q0 (1 - 1/e) S)^M` with `q0 = a_p / S` (random walk); `M = m a_p`.
pub fn delivery_probability(
    model: MobilityKind,
    n: f64,
    beta: f64,
    a_p: f64,
    s_rw: f64,
    _tau: f64,
) -> f64 {
    let m_holders = n.powf(beta) * a_p;
    delivery_probability_with(model, a_p, s_rw, m_holders)
}

/// As [`delivery_probability`] with an explicit holder count `M`.
pub fn delivery_probability_with(model: MobilityKind, a_p: f64, s_rw: f64, m_holders: f64) -> f64 {
    let per = match model {
        MobilityKind::Iid => a_p,
        MobilityKind::RandomWalk => (a_p / s_rw) * (1.0 - (-1f64).exp()) * s_rw,
    };
    1.0 - (1.0 - per).powf(m_holders)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSimResult {
    pub mean_delay: f64,
    pub served: u64,
    pub max_len: usize,
}

/// Discrete-time queue: in each period one service attempt (success with
/// probability `q`, served packet's delay recorded) precedes one arrival
/// (probability `p`). Delays are in slots, `period` slots per period.
pub fn simulate_queue(p: f64, q: f64, period: f64, periods: u64, rng: &mut SimRng) -> QueueSimResult {
    let mut queue = std::collections::VecDeque::new();
    let mut total = 0.0;
    let mut served = 0u64;
    let mut max_len = 0;
    for k in 0..periods {
        if !queue.is_empty() && rng.random_bool(q) {
            let born: u64 = queue.pop_front().unwrap();
            total += (k - born) as f64;
            served += 1;
        }
        if rng.random_bool(p) {
            queue.push_back(k);
            max_len = max_len.max(queue.len());
        }
    }
    QueueSimResult {
        mean_delay: if served == 0 { f64::NAN } else { period * total / served as f64 },
        served,
        max_len,
    }
}
