//! Interference probe: fully scheduled slots of either scenario, with every
//! sampled primary receiver's interference split by source and compared
//! with the lattice-series constants and rate floors.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{rate_floor, ChannelParams, RateCase, Scenario, SeriesConstants};
use crate::deployment::{Deployment, MobilityClass, Occupancy, Tier};
use crate::error::{Error, Result};
use crate::geometry::{CellIndex, FrameRegions, GridSpec, Point, FRAME_SLOTS};
use crate::secondary_mobile::{step_mobility, MobilityModel};
use crate::secondary_static::{role_of, SubframeRole};
use crate::seeds::{SeedStreams, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    /// Next-hop receiver of an active primary cell.
    PrimaryHop,
    /// Primary destination served by a secondary deliverer.
    Delivery,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSample {
    pub slot: u64,
    pub kind: ReceiverKind,
    pub cell: (usize, usize),
    /// From other primary-power transmitters of the primary tier.
    pub i_p: f64,
    /// From secondary transmitters at secondary power.
    pub i_sp_low: f64,
    /// From secondary deliverers at primary power.
    pub i_sp_delivery: f64,
    /// Time-averaged rate (per 64-slot frame).
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceReport {
    pub scenario: Scenario,
    pub samples: Vec<InterferenceSample>,
    pub a: f64,
    pub b: f64,
    /// `C` in the static scenario, `C'` in the mobile one.
    pub c: f64,
    pub floor_hop: f64,
    pub floor_delivery: f64,
    pub max_i_p: f64,
    pub max_i_sp_low: f64,
    pub max_i_sp_delivery: f64,
    pub min_rate_hop: f64,
    pub min_rate_delivery: f64,
    /// Samples exceeding their bound or falling below their floor.
    pub breaches: u64,
}

struct Tx {
    pos: Point,
    power: f64,
}

/// Probe `slots` consecutive slots. Every active primary cell transmits from
/// its designated relay to a random 4-neighbour cell; secondary cells active
/// in a random secondary TDMA slot transmit unless gated; every collection
/// region with a primary node in its sink cell runs one delivery.
pub fn probe(
    dep: &Deployment,
    pgrid: &GridSpec,
    sgrid: &GridSpec,
    scenario: Scenario,
    slots: u64,
    channel: &ChannelParams,
    seed: u64,
) -> Result<InterferenceReport> {
    if !pgrid.is_tiled() {
        return Err(Error::Config("interference probe needs a tiled primary grid".into()));
    }
    let consts = SeriesConstants::new(channel)?;
    let (a, b, c) = match scenario {
        Scenario::Static => (consts.a.value, consts.b.value, consts.c.value),
        Scenario::Mobile => (consts.a.value, consts.b.value, consts.c_prime.value),
    };
    let floor_hop = rate_floor(channel, scenario, RateCase::PrimaryRx)?;
    let floor_delivery = rate_floor(channel, scenario, RateCase::DeliveryRx)?;
    let regions = FrameRegions::new(pgrid, sgrid)?;
    let pres = regions.preservation_masks();
    let coll = regions.collection_masks();
    let pp = channel.tx_power(pgrid.cell_area);
    let ps = channel.tx_power(sgrid.cell_area);
    let streams = SeedStreams::new(seed);
    let mut rng = streams.stream("interference");
    let mut mob = streams.stream("mobility");
    let np = dep.num_primary;
    let mut spos: Vec<Point> = dep.secondary_positions().map(|(_, p)| p).collect();
    let class: Vec<Option<MobilityClass>> = dep.nodes[np..].iter().map(|n| n.class).collect();
    let pocc = dep.occupancy(pgrid, Tier::Primary);
    let mut samples = Vec::new();

    for t in 0..slots {
        let s = (t % FRAME_SLOTS as u64) as usize;
        if scenario == Scenario::Mobile && t > 0 {
            step_mobility(&mut spos, &MobilityModel::iid(), &mut mob);
        }
        let socc_p = Occupancy::build(pgrid, spos.iter().enumerate().map(|(i, &p)| (i as u32, p)));
        let socc_s = Occupancy::build(sgrid, spos.iter().enumerate().map(|(i, &p)| (i as u32, p)));
        let duty = match t % 2 {
            0 => MobilityClass::I,
            _ => MobilityClass::II,
        };

        // Primary-power hops: (tx, rx position, cell).
        let mut hops: Vec<(Tx, Point, CellIndex)> = Vec::new();
        for &cell in &regions.active[s] {
            let Some(tx) = pick_any(&pocc, &socc_p, cell, dep, &spos, &mut rng) else { continue };
            let nbrs: Vec<CellIndex> = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .filter_map(|&(dx, dy)| {
                    let x = cell.x as i64 + dx;
                    let y = cell.y as i64 + dy;
                    let k = pgrid.cells_per_side as i64;
                    ((0..k).contains(&x) && (0..k).contains(&y)).then(|| CellIndex::new(x as usize, y as usize))
                })
                .collect();
            let Some(&nc) = nbrs.choose(&mut rng) else { continue };
            let Some(rx) = pick_any(&pocc, &socc_p, nc, dep, &spos, &mut rng) else { continue };
            hops.push((Tx { pos: tx, power: pp }, rx, nc));
        }

        // Secondary transmitters at secondary power.
        let mut low: Vec<Tx> = Vec::new();
        let (own_active, deliver_active) = match scenario {
            Scenario::Static => (role_of(t) != SubframeRole::DeliverPrimary, role_of(t) == SubframeRole::DeliverPrimary),
            Scenario::Mobile => (true, true),
        };
        if own_active {
            let sigma = rng.random_range(0..FRAME_SLOTS);
            for sc in sgrid.active_cells(sigma) {
                let ci = sgrid.index(sc);
                let gated = match scenario {
                    Scenario::Static => pres[ci] >> s & 1 == 1,
                    Scenario::Mobile => (pres[ci] | coll[ci]) >> s & 1 == 1,
                };
                if gated {
                    continue;
                }
                let cands: Vec<u32> = socc_s
                    .at(sc)
                    .iter()
                    .copied()
                    .filter(|&i| scenario == Scenario::Static || class[i as usize].is_some_and(|c| c != duty))
                    .collect();
                if let Some(&i) = cands.choose(&mut rng) {
                    low.push(Tx { pos: spos[i as usize], power: ps });
                }
            }
        }

        // Deliverers at primary power, one per sink cell holding a primary
        // destination.
        let mut deliveries: Vec<(Tx, Point, CellIndex)> = Vec::new();
        if deliver_active {
            for sink in regions.sinks(s) {
                let dsts = pocc.at(sink);
                let Some(&d) = dsts.choose(&mut rng) else { continue };
                let cands: Vec<u32> = socc_p
                    .at(sink)
                    .iter()
                    .copied()
                    .filter(|&i| scenario == Scenario::Static || class[i as usize] == Some(duty))
                    .collect();
                let Some(&h) = cands.choose(&mut rng) else { continue };
                deliveries.push((Tx { pos: spos[h as usize], power: pp }, dep.position(d), sink));
            }
        }

        let sum = |rx: Point, txs: &mut dyn Iterator<Item = &Tx>| -> f64 {
            txs.map(|tx| tx.power * rx.dist(&tx.pos).powf(-channel.alpha)).sum()
        };
        for (idx, (tx, rx, cell)) in hops.iter().enumerate() {
            let i_p = sum(*rx, &mut hops.iter().enumerate().filter(|&(j, _)| j != idx).map(|(_, h)| &h.0));
            let i_low = sum(*rx, &mut low.iter());
            let i_del = sum(*rx, &mut deliveries.iter().map(|d| &d.0));
            let signal = tx.power * rx.dist(&tx.pos).powf(-channel.alpha);
            let rate = channel.log1p(signal / (channel.n0 + i_p + i_low + i_del)) / FRAME_SLOTS as f64;
            samples.push(InterferenceSample {
                slot: t,
                kind: ReceiverKind::PrimaryHop,
                cell: (cell.x, cell.y),
                i_p,
                i_sp_low: i_low,
                i_sp_delivery: i_del,
                rate,
            });
        }
        for (idx, (tx, rx, cell)) in deliveries.iter().enumerate() {
            let i_p = sum(*rx, &mut hops.iter().map(|h| &h.0));
            let i_low = sum(*rx, &mut low.iter());
            let i_del = sum(*rx, &mut deliveries.iter().enumerate().filter(|&(j, _)| j != idx).map(|(_, d)| &d.0));
            let signal = tx.power * rx.dist(&tx.pos).powf(-channel.alpha);
            let rate = channel.log1p(signal / (channel.n0 + i_p + i_low + i_del)) / FRAME_SLOTS as f64;
            samples.push(InterferenceSample {
                slot: t,
                kind: ReceiverKind::Delivery,
                cell: (cell.x, cell.y),
                i_p,
                i_sp_low: i_low,
                i_sp_delivery: i_del,
                rate,
            });
        }
    }

    let hop = || samples.iter().filter(|x| x.kind == ReceiverKind::PrimaryHop);
    let del = || samples.iter().filter(|x| x.kind == ReceiverKind::Delivery);
    let fmax = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let fmin = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    let mut breaches = 0u64;
    for x in hop() {
        breaches += (x.i_p > a || x.i_sp_low > b || x.i_sp_delivery > c || x.rate < floor_hop) as u64;
    }
    for x in del() {
        breaches += (x.rate < floor_delivery) as u64;
    }
    Ok(InterferenceReport {
        scenario,
        a,
        b,
        c,
        floor_hop,
        floor_delivery,
        max_i_p: fmax(&mut hop().map(|x| x.i_p)),
        max_i_sp_low: fmax(&mut hop().map(|x| x.i_sp_low)),
        max_i_sp_delivery: fmax(&mut hop().map(|x| x.i_sp_delivery)),
        min_rate_hop: fmin(&mut hop().map(|x| x.rate)),
        min_rate_delivery: fmin(&mut del().map(|x| x.rate)),
        breaches,
        samples,
    })
}

/// A uniformly chosen resident of `cell`, either tier.
fn pick_any(
    pocc: &Occupancy,
    socc: &Occupancy,
    cell: CellIndex,
    dep: &Deployment,
    spos: &[Point],
    rng: &mut SimRng,
) -> Option<Point> {
    let a = pocc.at(cell);
    let b = socc.at(cell);
    let total = a.len() + b.len();
    if total == 0 {
        return None;
    }
    let k = rng.random_range(0..total);
    Some(if k < a.len() { dep.position(a[k]) } else { spos[b[k - a.len()] as usize] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deployment::{sample_with, SampleOptions};

    #[test]
    fn small_probe_respects_bounds() {
        let dep = sample_with(40.0, 2.0, 2, SampleOptions { fixed_count: true, mobile_classes: true }).unwrap();
        let pg = GridSpec::with_cells(16, 8);
        let sg = GridSpec::with_cells(40, 8);
        for sc in [Scenario::Static, Scenario::Mobile] {
            let r = probe(&dep, &pg, &sg, sc, 20, &ChannelParams::default(), 1).unwrap();
            assert!(r.samples.iter().any(|x| x.kind == ReceiverKind::PrimaryHop));
            assert_eq!(r.breaches, 0, "{sc:?}: {r:?}");
            assert!(r.max_i_p > 0.0);
        }
    }

    #[test]
    fn rejects_partial_clusters() {
        let dep = sample_with(10.0, 2.0, 2, SampleOptions::default()).unwrap();
        let pg = GridSpec::with_cells(12, 8);
        let sg = GridSpec::with_cells(24, 8);
        assert!(probe(&dep, &pg, &sg, Scenario::Static, 1, &ChannelParams::default(), 1).is_err());
    }
}
