//! Pathloss, interference, SINR and Shannon rates, plus the lattice series
//! that bound aggregate interference and the resulting rate floors.

use serde::{Deserialize, Serialize};

use crate::deployment::Tier;
use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    Bits,
    Nats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub alpha: f64,
    pub n0: f64,
    pub power: f64,
    pub log_base: LogBase,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            n0: 1.0,
            power: 1.0,
            log_base: LogBase::Bits,
        }
    }
}

impl ChannelParams {
    pub fn new(alpha: f64, n0: f64, power: f64) -> Result<Self> {
        let p = Self {
            alpha,
            n0,
            power,
            log_base: LogBase::Bits,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 2.0) {
            return Err(Error::Divergent(self.alpha));
        }
        if !(self.n0 > 0.0) || !(self.power > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise {} and power {} must be positive",
                self.n0, self.power
            )));
        }
        Ok(())
    }

    /// `log(1 + x)` in the configured base.
    pub fn log1p(&self, x: f64) -> f64 {
        match self.log_base {
            LogBase::Bits => x.ln_1p() / std::f64::consts::LN_2,
            LogBase::Nats => x.ln_1p(),
        }
    }

    /// Transmit power for a node scheduled on a grid of cell area `a`.
    pub fn tx_power(&self, cell_area: f64) -> f64 {
        self.power * cell_area.powf(self.alpha / 2.0)
    }
}

pub fn pathloss(r: f64, alpha: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::ZeroDistance);
    }
    Ok(r.powf(-alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxAssignment {
    pub tx: u32,
    pub rx: u32,
    pub tx_pos: Point,
    pub rx_pos: Point,
    pub power: f64,
    /// Tier whose traffic (and schedule) the transmission belongs to.
    pub tier: Tier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRate {
    pub rate: f64,
    pub signal: f64,
    pub same_tier: f64,
    pub cross_tier: f64,
    pub sinr: f64,
}

/// Received power at `rx` summed over `emitters` (position, power).
pub fn interference_at(
    rx: Point,
    emitters: impl IntoIterator<Item = (Point, f64)>,
    alpha: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (p, w) in emitters {
        total += w * pathloss(rx.dist(&p), alpha)?;
    }
    Ok(total)
}

/// Shannon rate of `all[index]` with every other entry of `all` treated as
/// interference, split by tier.
pub fn link_rate(index: usize, all: &[TxAssignment], params: &ChannelParams) -> Result<LinkRate> {
    let me = all
        .get(index)
        .ok_or_else(|| Error::InvalidParameter(format!("assignment {index} out of range")))?;
    if me.tx == me.rx || !(me.power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad assignment tx={} rx={} power={}",
            me.tx, me.rx, me.power
        )));
    }
    let signal = me.power * pathloss(me.tx_pos.dist(&me.rx_pos), params.alpha)?;
    let (mut same, mut cross) = (0.0, 0.0);
    for (k, other) in all.iter().enumerate() {
        if k == index {
            continue;
        }
        let i = other.power * pathloss(other.tx_pos.dist(&me.rx_pos), params.alpha)?;
        if other.tier == me.tier {
            same += i;
        } else {
            cross += i;
        }
    }
    let sinr = signal / (params.n0 + same + cross);
    Ok(LinkRate {
        rate: params.log1p(sinr),
        signal,
        same_tier: same,
        cross_tier: cross,
        sinr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSum {
    pub value: f64,
    /// Absolute error bound on `value`.
    pub error: f64,
}

/// `P * sum_{t>=1} coeff * t * (slope*t + intercept)^(-alpha)`.
///
/// Terms below the cut are summed directly; the tail is evaluated by
/// Euler-Maclaurin on the two completely monotone pieces
/// `u^(1-alpha)` and `u^(-alpha)` (with `u = slope*t + intercept`), whose
/// remainder is bounded by the first omitted correction.
pub fn lattice_series(
    coeff: f64,
    slope: f64,
    intercept: f64,
    alpha: f64,
    power: f64,
) -> Result<CertifiedSum> {
    if !(alpha > 2.0) {
        return Err(Error::Divergent(alpha));
    }
    if !(slope > 0.0) || slope + intercept <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "series base {slope}t{intercept:+} not positive at t=1"
        )));
    }
    const TARGET: f64 = 1e-10;
    let scale = coeff * power / slope;
    let mut cut: u64 = 64;
    loop {
        let mut head = 0.0;
        let mut comp = 0.0;
        for t in 1..cut {
            let u = slope * t as f64 + intercept;
            // Kahan summation keeps the head accurate for large cuts.
            let y = coeff * power * t as f64 * u.powf(-alpha) - comp;
            let s = head + y;
            comp = (s - head) - y;
            head = s;
        }
        let u = slope * cut as f64 + intercept;
        let (t1, r1) = em_tail(u, alpha - 1.0, slope);
        let (t2, r2) = em_tail(u, alpha, slope);
        let tail = scale * (t1 - intercept * t2);
        let rem = scale.abs() * (r1 + intercept.abs() * r2);
        let value = head + tail;
        let error = rem + 4.0 * f64::EPSILON * value.abs() * (cut as f64).sqrt();
        if error <= TARGET || cut >= 1 << 24 {
            return Ok(CertifiedSum { value, error });
        }
        cut *= 4;
    }
}

/// Euler-Maclaurin estimate of `sum_{t>=T} u(t)^(-s)` with
/// `u(t) = slope*t + b`, given `u = u(T)`; returns (estimate, remainder bound).
fn em_tail(u: f64, s: f64, slope: f64) -> (f64, f64) {
    // k-th t-derivative of u^(-s) is (-slope)^k * s(s+1)..(s+k-1) * u^(-s-k).
    let deriv = |k: i32| -> f64 {
        let mut c = 1.0;
        for j in 0..k {
            c *= -slope * (s + j as f64);
        }
        c * u.powf(-s - k as f64)
    };
    let integral = u.powf(1.0 - s) / (slope * (s - 1.0));
    let est = integral + deriv(0) / 2.0 - deriv(1) / 12.0 + deriv(3) / 720.0;
    let rem = deriv(5).abs() / 30240.0;
    (est, rem)
}

/// The four interference constants (per unit of `P`, scaled by `P`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConstants {
    /// Primary-on-primary: `8t (7t-1)^-alpha`.
    pub a: CertifiedSum,
    /// Secondary relaying on primary receivers: `8t (7t-6)^-alpha`.
    pub b: CertifiedSum,
    /// Static delivery on primary receivers: `2t (7t-5)^-alpha`.
    pub c: CertifiedSum,
    /// Mobile delivery on primary receivers: `8t (7t-5)^-alpha`.
    pub c_prime: CertifiedSum,
}

impl SeriesConstants {
    pub fn new(params: &ChannelParams) -> Result<Self> {
        let s = |coeff, intercept| lattice_series(coeff, 7.0, intercept, params.alpha, params.power);
        Ok(Self {
            a: s(8.0, -1.0)?,
            b: s(8.0, -6.0)?,
            c: s(2.0, -5.0)?,
            c_prime: s(8.0, -5.0)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Static,
    Mobile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateCase {
    /// Primary transmitter to its next-hop receiver.
    PrimaryRx,
    /// Secondary holder delivering to a primary destination.
    DeliveryRx,
}

/// Worst-case time-averaged rate of an active cell:
/// `(1/64) log(1 + P 5^(-alpha/2) / (N0 + c P sum 8t(7t-6)^-alpha))`, with
/// `c = 2` (static) or `3` (mobile). Both cases share the expression.
pub fn rate_floor(params: &ChannelParams, scenario: Scenario, _case: RateCase) -> Result<f64> {
    params.validate()?;
    let b = lattice_series(8.0, 7.0, -6.0, params.alpha, 1.0)?.value;
    let c = match scenario {
        Scenario::Static => 2.0,
        Scenario::Mobile => 3.0,
    };
    let signal = params.power * 5f64.powf(-params.alpha / 2.0);
    Ok(params.log1p(signal / (params.n0 + c * params.power * b)) / 64.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct partial sum to `cut` plus the midpoint of the integral bracket
    /// for the remaining terms.
    fn brute(coeff: f64, b: f64, alpha: f64, cut: u64) -> (f64, f64) {
        let f = |t: f64| coeff * t * (7.0 * t + b).powf(-alpha);
        let mut s = 0.0;
        for t in (1..=cut).rev() {
            s += f(t as f64);
        }
        // Antiderivative of f with u = 7t + b.
        let anti = |t: f64| {
            let u = 7.0 * t + b;
            coeff / 49.0 * (u.powf(2.0 - alpha) / (2.0 - alpha) - b * u.powf(1.0 - alpha) / (1.0 - alpha))
        };
        let upper = -anti(cut as f64);
        let lower = -anti(cut as f64 + 1.0);
        (s + (upper + lower) / 2.0, (upper - lower) / 2.0)
    }

    #[test]
    fn pathloss_examples() {
        assert_eq!(pathloss(1.0, 3.0).unwrap(), 1.0);
        assert!((pathloss(0.5, 4.0).unwrap() - 16.0).abs() < 1e-12);
        assert_eq!(pathloss(0.0, 3.0), Err(Error::ZeroDistance));
    }

    #[test]
    fn series_a_matches_brute_force() {
        let got = lattice_series(8.0, 7.0, -1.0, 3.0, 1.0).unwrap();
        assert!(got.error <= 1e-9);
        let (want, slack) = brute(8.0, -1.0, 3.0, 1_000_000);
        assert!((got.value - want).abs() < 1e-6 + slack, "{} vs {}", got.value, want);
        assert!((got.value - 0.0545).abs() < 0.002);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn series_golden_values_at_alpha_three() {
        // Reference values from 30-digit summation.
        let cases = [
            (8.0, -1.0, 0.054_361_975_516_815_568),
            (8.0, -6.0, 8.048_469_358_648_419_1),
            (2.0, -5.0, 0.259_283_685_835_004_39),
            (8.0, -5.0, 1.037_134_743_340_017_6),
        ];
        for (c, b, want) in cases {
            let got = lattice_series(c, 7.0, b, 3.0, 1.0).unwrap();
            assert!((got.value - want).abs() <= 1e-9, "({c},{b}) {} vs {want}", got.value);
        }
    }

    #[test]
    fn series_patterns_match_brute_force() {
        for &alpha in &[2.5, 3.0, 4.0] {
            for &(c, b) in &[(8.0, -1.0), (8.0, -6.0), (2.0, -5.0), (8.0, -5.0)] {
                let got = lattice_series(c, 7.0, b, alpha, 1.0).unwrap();
                let (want, slack) = brute(c, b, alpha, 200_000);
                assert!(
                    (got.value - want).abs() <= got.error + slack + 1e-12,
                    "alpha {alpha} ({c},{b}): {} vs {} +- {}",
                    got.value,
                    want,
                    slack
                );
            }
        }
    }

    #[test]
    fn series_diverges_at_two() {
        assert_eq!(lattice_series(8.0, 7.0, -1.0, 2.0, 1.0), Err(Error::Divergent(2.0)));
    }

    #[test]
    fn single_link_rate() {
        let p = ChannelParams::default();
        let a = 1.0 / 64.0;
        let d: f64 = 0.2;
        let t = TxAssignment {
            tx: 0,
            rx: 1,
            tx_pos: Point::new(0.1, 0.1),
            rx_pos: Point::new(0.3, 0.1),
            power: p.tx_power(a),
            tier: Tier::Primary,
        };
        let r = link_rate(0, &[t], &p).unwrap();
        let want = (1.0 + p.tx_power(a) * d.powf(-3.0) / p.n0).log2();
        assert!((r.rate - want).abs() < 1e-12);
        assert_eq!(r.same_tier, 0.0);
    }

    #[test]
    fn symmetric_pairs_have_equal_rates() {
        let p = ChannelParams::default();
        let mk = |tx, rx, a: Point, b: Point| TxAssignment {
            tx,
            rx,
            tx_pos: a,
            rx_pos: b,
            power: 1.0,
            tier: Tier::Primary,
        };
        let all = [
            mk(0, 1, Point::new(0.2, 0.5), Point::new(0.3, 0.5)),
            mk(2, 3, Point::new(0.8, 0.5), Point::new(0.7, 0.5)),
        ];
        let r0 = link_rate(0, &all, &p).unwrap();
        let r1 = link_rate(1, &all, &p).unwrap();
        assert!((r0.rate - r1.rate).abs() < 1e-12);
    }

    #[test]
    fn floors_are_ordered() {
        let p = ChannelParams::default();
        let s = rate_floor(&p, Scenario::Static, RateCase::PrimaryRx).unwrap();
        let m = rate_floor(&p, Scenario::Mobile, RateCase::PrimaryRx).unwrap();
        assert!(s > 0.0 && m > 0.0 && m <= s);
        let c = SeriesConstants::new(&p).unwrap();
        let b = c.b.value;
        let want = (1.0 + 5f64.powf(-1.5) / (1.0 + 2.0 * b)).log2() / 64.0;
        assert!((s - want).abs() < 1e-12);
    }

    #[test]
    fn power_scaling_makes_sinr_scale_free() {
        let p = ChannelParams::default();
        let rate_at = |a: f64| {
            let s = a.sqrt();
            let pts = [(0.0, 0.0, 1.0, 0.0), (6.0, 0.0, 7.0, 1.0), (0.0, 8.0, 0.0, 9.0)];
            let all: Vec<TxAssignment> = pts
                .iter()
                .enumerate()
                .map(|(i, &(x0, y0, x1, y1))| TxAssignment {
                    tx: 2 * i as u32,
                    rx: 2 * i as u32 + 1,
                    tx_pos: Point::new(x0 * s, y0 * s),
                    rx_pos: Point::new(x1 * s, y1 * s),
                    power: p.tx_power(a),
                    tier: Tier::Primary,
                })
                .collect();
            let mut q = p;
            q.n0 = 0.0;
            link_rate(0, &all, &q).unwrap().sinr
        };
        let (x, y) = (rate_at(1.0 / 64.0), rate_at(1.0 / 1024.0));
        assert!((x / y - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn dominance(alpha in 2.05f64..8.0) {
            let a = lattice_series(8.0, 7.0, -1.0, alpha, 1.0).unwrap().value;
            let b = lattice_series(8.0, 7.0, -6.0, alpha, 1.0).unwrap().value;
            let c = lattice_series(2.0, 7.0, -5.0, alpha, 1.0).unwrap().value;
            prop_assert!(b >= a && b >= c);
        }

        #[test]
        fn extra_transmitter_never_helps(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let p = ChannelParams::default();
            let base = TxAssignment {
                tx: 0, rx: 1,
                tx_pos: Point::new(0.5, 0.5), rx_pos: Point::new(0.55, 0.5),
                power: 1.0, tier: Tier::Primary,
            };
            let other = TxAssignment {
                tx: 2, rx: 3,
                tx_pos: Point::new(x, y), rx_pos: Point::new(0.0, 0.0),
                power: 1.0, tier: Tier::Secondary,
            };
            prop_assume!(other.tx_pos.dist(&base.rx_pos) > 1e-9);
            let alone = link_rate(0, &[base], &p).unwrap().rate;
            let with = link_rate(0, &[base, other], &p).unwrap().rate;
            prop_assert!(with <= alone);
        }

        #[test]
        fn certified_value_stable_under_longer_cut(alpha in 2.2f64..6.0) {
            let got = lattice_series(8.0, 7.0, -6.0, alpha, 1.0).unwrap();
            let (want, slack) = brute(8.0, -6.0, alpha, 20_000);
            prop_assert!((got.value - want).abs() <= got.error + slack + 1e-12);
        }
    }
}
