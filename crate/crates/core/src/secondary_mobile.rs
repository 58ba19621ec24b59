//! Mobile secondary tier: i.i.d. and random-walk mobility, the separation
//! threshold time, Q-queue relaying of overheard primary packets with
//! type-k tags, Class I/II delivery in collection regions with purging of
//! outdated packets, and a minimal two-hop scheme for the tier's own traffic.

use std::collections::{BTreeMap, VecDeque};
use std::rc::Rc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Geometric};
use serde::{Deserialize, Serialize};

pub use crate::analytics::MobilityKind;
use crate::deployment::{sample_secondary_only, Deployment, MobilityClass, Occupancy, SampleOptions, Tier};
use crate::error::{Error, Result};
use crate::geometry::{block_cells, CellIndex, FrameRegions, GridSpec, Point, CLUSTER_SIDE, FRAME_SLOTS};
use crate::metrics::{TierAccumulator, TierReport, Window};
use crate::primary::{Packet, PrimaryState};
use crate::seeds::{SeedStreams, SimRng};
use crate::trace::{Action, Trace, TraceEvent};

/// The eight king moves; index = 3-bit direction draw.
pub const RW_MOVES: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityModel {
    pub kind: MobilityKind,
    /// RW-cells per side (`1/sqrt(S)`); 0 for i.i.d.
    pub rw_side: usize,
}

impl MobilityModel {
    pub fn iid() -> Self {
        Self { kind: MobilityKind::Iid, rw_side: 0 }
    }

    /// Random walk over RW-cells of area `s`, which must tile the square and
    /// be at least the primary cell area.
    pub fn random_walk(s: f64, a_p: f64) -> Result<Self> {
        let side = rw_side_for(s)?;
        if s < a_p * (1.0 - 1e-9) {
            return Err(Error::Precondition {
                hypothesis: "S >= a_p",
                detail: format!("S = {s}, a_p = {a_p}"),
            });
        }
        Ok(Self { kind: MobilityKind::RandomWalk, rw_side: side })
    }

    pub fn s(&self) -> f64 {
        match self.kind {
            MobilityKind::Iid => 1.0,
            MobilityKind::RandomWalk => 1.0 / (self.rw_side * self.rw_side) as f64,
        }
    }
}

/// `1/sqrt(S)` when it is an integer.
pub fn rw_side_for(s: f64) -> Result<usize> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidParameter(format!("RW-cell area {s} outside (0, 1]")));
    }
    let side = (1.0 / s.sqrt()).round();
    if ((1.0 / s.sqrt()) - side).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("1/sqrt(S) = {} is not an integer", 1.0 / s.sqrt())));
    }
    Ok(side as usize)
}

fn wrap(v: i64, side: usize) -> usize {
    v.rem_euclid(side as i64) as usize
}

/// Move every position one primary slot forward.
pub fn step_mobility(positions: &mut [Point], model: &MobilityModel, rng: &mut SimRng) {
    match model.kind {
        MobilityKind::Iid => {
            for p in positions.iter_mut() {
                *p = Point::new(rng.random(), rng.random());
            }
        }
        MobilityKind::RandomWalk => {
            let l = model.rw_side;
            let lf = l as f64;
            // One draw per node: 3 bits of direction, 26 bits per offset.
            const UNIT: f64 = 1.0 / (1u64 << 26) as f64;
            let mut draws = vec![0u64; positions.len()];
            rng.fill(&mut draws[..]);
            let li = l as i64;
            let wrap_fast = |v: i64| if v < 0 { v + li } else if v >= li { v - li } else { v };
            for (p, &r) in positions.iter_mut().zip(&draws) {
                let cx = ((p.x * lf) as usize).min(l - 1) as i64;
                let cy = ((p.y * lf) as usize).min(l - 1) as i64;
                let (dx, dy) = RW_MOVES[(r & 7) as usize];
                let nx = wrap_fast(cx + dx) as f64;
                let ny = wrap_fast(cy + dy) as f64;
                let ox = ((r >> 12) & 0x3ff_ffff) as f64 * UNIT;
                let oy = (r >> 38) as f64 * UNIT;
                *p = Point::new(
                    ((nx + ox) / lf).min(1.0 - f64::EPSILON),
                    ((ny + oy) / lf).min(1.0 - f64::EPSILON),
                );
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationProfile {
    pub side: usize,
    /// `s[t-1]` is the separation after `t` steps.
    pub s: Vec<f64>,
    pub tau: usize,
}

fn walk_step(cur: &[f64], next: &mut [f64], side: usize) {
    next.iter_mut().for_each(|v| *v = 0.0);
    for y in 0..side {
        for x in 0..side {
            let w = cur[y * side + x] / 8.0;
            if w == 0.0 {
                continue;
            }
            for (dx, dy) in RW_MOVES {
                next[wrap(y as i64 + dy, side) * side + wrap(x as i64 + dx, side)] += w;
            }
        }
    }
}

/// Exact t-step distribution of the king-move walk on an `side x side`
/// torus, started from cell (0, 0). The walk is translation invariant, so
/// this row determines the whole transition matrix power.
pub fn walk_distribution(side: usize, steps: usize) -> Vec<f64> {
    let mut cur = vec![0.0; side * side];
    cur[0] = 1.0;
    let mut next = cur.clone();
    for _ in 0..steps {
        walk_step(&cur, &mut next, side);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Separation `s(t) = 1 - min_{start, target} p_t / S` for `t = 1..=horizon`
/// and the first `t` with `s(t) <= 1/e`.
///
/// The defining family of inequalities `p_t >= (1 - s) S` has this closed
/// form as its smallest feasible `s`.
pub fn separation_profile(side: usize, horizon: usize) -> Result<SeparationProfile> {
    if side == 0 || horizon == 0 {
        return Err(Error::InvalidParameter("side and horizon must be positive".into()));
    }
    let n = side * side;
    let pi = 1.0 / n as f64;
    let mut cur = vec![0.0; n];
    cur[0] = 1.0;
    let mut next = vec![0.0; n];
    let mut s = Vec::with_capacity(horizon);
    let mut tau = None;
    let threshold = (-1f64).exp();
    for t in 1..=horizon {
        walk_step(&cur, &mut next, side);
        std::mem::swap(&mut cur, &mut next);
        let min = cur.iter().copied().fold(f64::INFINITY, f64::min);
        let st = (1.0 - min / pi).max(0.0);
        s.push(st);
        if tau.is_none() && st <= threshold {
            tau = Some(t);
        }
    }
    match tau {
        Some(tau) => Ok(SeparationProfile { side, s, tau }),
        None => Err(Error::TauNotReached(horizon)),
    }
}

/// Separation threshold time for RW-cell area `s`, with a horizon large
/// enough for any grid (`tau` grows like the cell count).
pub fn mixing_tau(s: f64) -> Result<usize> {
    let side = rw_side_for(s)?;
    Ok(separation_profile(side, 4 * side * side + 16)?.tau)
}

/// One king-move step of every walker on a `side x side` torus, with the
/// direction of walker `i` taken from the low three bits of `dirs[i]`
/// (same order as [`RW_MOVES`]). Branch-free so the loop vectorises.
pub fn walk_cells(cx: &mut [u16], cy: &mut [u16], dirs: &[u8], side: i16) {
    for ((x, y), &d) in cx.iter_mut().zip(cy.iter_mut()).zip(dirs) {
        let d = (d & 7) as i16;
        // Skip the centre of the 3x3 block: 0..8 -> 0..3, 5..8.
        let idx = d + (d >> 2);
        let q = (idx * 11) >> 5;
        let nx = *x as i16 + idx - 3 * q - 1;
        let ny = *y as i16 + q - 1;
        let nx = nx + ((nx >> 15) & side);
        let ny = ny + ((ny >> 15) & side);
        *x = (nx - (((side - 1 - nx) >> 15) & side)) as u16;
        *y = (ny - (((side - 1 - ny) >> 15) & side)) as u16;
    }
}

// ---------------------------------------------------------------------------
// Two-hop scheme for the secondary tier's own traffic.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopKind {
    /// Source to its own destination.
    Direct,
    /// Source to a relay.
    ToRelay,
    /// Relay to the packet's destination.
    FromRelay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopEvent {
    pub kind: HopKind,
    pub from: u32,
    pub to: u32,
    pub created: u64,
}

impl HopEvent {
    pub fn delivered(&self) -> bool {
        self.kind != HopKind::ToRelay
    }
}

/// Reconstructed two-hop relaying: in an active cell, one transmission per
/// slot; deliveries to a co-located destination (direct or from a relay)
/// take precedence over handing a fresh packet to a random co-located relay.
/// Node indices are local (`0..len`).
#[derive(Debug, Clone)]
pub struct TwoHop {
    dest: Vec<Option<u32>>,
    own: Vec<VecDeque<u64>>,
    relay: Vec<BTreeMap<u32, VecDeque<u64>>>,
    relay_len: Vec<u32>,
    pub relay_high_water: u32,
    pub created: u64,
    pub delivered: u64,
}

impl TwoHop {
    pub fn new(dest: Vec<Option<u32>>) -> Self {
        let n = dest.len();
        Self {
            dest,
            own: vec![VecDeque::new(); n],
            relay: vec![BTreeMap::new(); n],
            relay_len: vec![0; n],
            relay_high_water: 0,
            created: 0,
            delivered: 0,
        }
    }

    pub fn arrive(&mut self, src: u32, t: u64) {
        self.own[src as usize].push_back(t);
        self.created += 1;
    }

    pub fn in_flight(&self) -> u64 {
        let own: usize = self.own.iter().map(|q| q.len()).sum();
        let rel: u64 = self.relay_len.iter().map(|&v| v as u64).sum();
        own as u64 + rel
    }

    /// Serve one active cell holding `nodes` (sorted local ids).
    pub fn serve(&mut self, nodes: &[u32], rng: &mut SimRng) -> Option<HopEvent> {
        if nodes.len() < 2 {
            return None;
        }
        let mut deliver: Vec<(HopKind, u32, u32)> = Vec::new();
        for &a in nodes {
            let ai = a as usize;
            if let Some(d) = self.dest[ai] {
                if !self.own[ai].is_empty() && nodes.binary_search(&d).is_ok() {
                    deliver.push((HopKind::Direct, a, d));
                }
            }
            if self.relay_len[ai] > 0 {
                for &b in nodes {
                    if b != a && self.relay[ai].get(&b).is_some_and(|q| !q.is_empty()) {
                        deliver.push((HopKind::FromRelay, a, b));
                    }
                }
            }
        }
        if !deliver.is_empty() {
            let (kind, a, b) = deliver[rng.random_range(0..deliver.len())];
            let ai = a as usize;
            let created = match kind {
                HopKind::Direct => self.own[ai].pop_front().unwrap(),
                _ => {
                    let q = self.relay[ai].get_mut(&b).unwrap();
                    let c = q.pop_front().unwrap();
                    if q.is_empty() {
                        self.relay[ai].remove(&b);
                    }
                    self.relay_len[ai] -= 1;
                    c
                }
            };
            self.delivered += 1;
            return Some(HopEvent { kind, from: a, to: b, created });
        }
        let senders: Vec<u32> = nodes
            .iter()
            .copied()
            .filter(|&a| !self.own[a as usize].is_empty())
            .collect();
        if senders.is_empty() {
            return None;
        }
        let a = senders[rng.random_range(0..senders.len())];
        let pos = nodes.binary_search(&a).unwrap();
        let j = rng.random_range(0..nodes.len() - 1);
        let b = nodes[if j >= pos { j + 1 } else { j }];
        let ai = a as usize;
        let created = self.own[ai].pop_front().unwrap();
        let d = self.dest[ai].unwrap();
        self.relay[b as usize].entry(d).or_default().push_back(created);
        self.relay_len[b as usize] += 1;
        self.relay_high_water = self.relay_high_water.max(self.relay_len[b as usize]);
        Some(HopEvent { kind: HopKind::ToRelay, from: a, to: b, created })
    }
}

/// Cells of a `side x side` grid active in intra-frame slot `s`.
fn active_coords(side: usize, s: usize) -> (Vec<usize>, Vec<usize>) {
    let xs = (s % CLUSTER_SIDE..side).step_by(CLUSTER_SIDE).collect();
    let ys = (s / CLUSTER_SIDE..side).step_by(CLUSTER_SIDE).collect();
    (xs, ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandaloneParams {
    pub kind: MobilityKind,
    /// Bernoulli arrival probability per source per slot.
    pub lambda: f64,
    pub window: Window,
    /// Extra slots after the window to let window-born packets finish.
    pub drain_cap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandaloneReport {
    pub m: f64,
    pub nodes: usize,
    pub cells_per_side: usize,
    pub a_s: f64,
    /// RW-cell area (equal to the cell area); 1 for i.i.d.
    pub s_rw: f64,
    pub tier: TierReport,
    /// Window-born packets still undelivered when the drain cap hit.
    pub censored: u64,
    pub cohort_created: u64,
    pub cohort_delivered: u64,
    /// Window-born packets eventually delivered, per pair per window slot.
    pub throughput_per_pair: f64,
    pub slots_run: u64,
    pub relay_high_water: u32,
}

/// The secondary tier alone on the `a_s = 1/m` grid with its two-hop scheme.
/// For the random walk the RW-cell coincides with the secondary cell.
pub fn run_standalone(m: f64, params: &StandaloneParams, seed: u64) -> Result<StandaloneReport> {
    let dep = sample_secondary_only(m, seed, SampleOptions { fixed_count: true, mobile_classes: false })?;
    let grid = GridSpec::fitted(1.0 / m, CLUSTER_SIDE)?;
    let l = grid.cells_per_side;
    let nn = dep.num_secondary();
    let streams = SeedStreams::new(seed);
    let mut dest = vec![None; nn];
    let sources: Vec<u32> = dep.secondary_pairs.iter().map(|&(a, _)| a).collect();
    for &(a, b) in &dep.secondary_pairs {
        dest[a as usize] = Some(b);
    }
    let mut hop = TwoHop::new(dest);
    let (mut cx, mut cy): (Vec<u16>, Vec<u16>) = dep
        .secondary_positions()
        .map(|(_, p)| {
            let c = grid.cell_of(p);
            (c.x as u16, c.y as u16)
        })
        .unzip();
    let w = params.window;
    let mut mob = streams.stream("mobility");
    let mut sched = streams.stream("schedule");
    let mut arr = streams.stream("arrivals");
    let np = sources.len() as u64;
    let arrivals = Geometric::new(params.lambda)
        .map_err(|e| Error::InvalidParameter(format!("lambda: {e}")))?;
    let mut next_arrival = arrivals.sample(&mut arr);
    let mut acc = TierAccumulator::default();
    let mut outstanding = 0u64;
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); l.div_ceil(CLUSTER_SIDE).pow(2)];
    let mut cohort_delivered = 0u64;
    let mut cohort_created = 0u64;
    let mut dirs = vec![0u8; nn];
    let mut phase = vec![0u8; nn];
    let mut t = 0u64;
    loop {
        if t >= w.end() && (outstanding == 0 || t >= w.end() + params.drain_cap) {
            break;
        }
        if t < w.end() {
            let base = t * np;
            while next_arrival < base + np {
                let src = sources[(next_arrival - base) as usize];
                hop.arrive(src, t);
                acc.created += 1;
                if w.contains(t) {
                    outstanding += 1;
                    cohort_created += 1;
                }
                next_arrival += 1 + arrivals.sample(&mut arr);
            }
        }
        let s = (t % FRAME_SLOTS as u64) as usize;
        let (xs, ys) = active_coords(l, s);
        let na = xs.len() * ys.len();
        match params.kind {
            MobilityKind::Iid => {
                // Only nodes landing in active cells matter; pick them by
                // geometric skipping (exponential / rate) and place each in a
                // uniform active cell.
                if na > 0 {
                    let rate = -(1.0 - na as f64 / (l * l) as f64).ln();
                    let mut i = 0u64;
                    loop {
                        i += if rate.is_infinite() { 0 } else { (mob.sample::<f64, _>(Exp1) / rate) as u64 };
                        if i as usize >= nn {
                            break;
                        }
                        buckets[mob.random_range(0..na)].push(i as u32);
                        i += 1;
                    }
                }
            }
            MobilityKind::RandomWalk => {
                if t > 0 {
                    mob.fill_bytes(&mut dirs);
                    walk_cells(&mut cx, &mut cy, &dirs, l as i16);
                }
                for ((p, &x), &y) in phase.iter_mut().zip(&cx).zip(&cy) {
                    *p = ((x & 7) | ((y & 7) << 3)) as u8;
                }
                let code = s as u8;
                for (ci, chunk) in phase.chunks(32).enumerate() {
                    // Cheap vectorisable pre-check; hits are rare (1 in 64).
                    if chunk.iter().fold(false, |acc, &p| acc | (p == code)) {
                        for (j, &p) in chunk.iter().enumerate() {
                            if p == code {
                                let node = ci * 32 + j;
                                let k = (cy[node] as usize / CLUSTER_SIDE) * xs.len()
                                    + cx[node] as usize / CLUSTER_SIDE;
                                buckets[k].push(node as u32);
                            }
                        }
                    }
                }
            }
        }
        for bucket in buckets.iter_mut().take(na) {
            if bucket.len() >= 2 {
                if let Some(ev) = hop.serve(bucket, &mut sched) {
                    if ev.delivered() {
                        let delay = (t - ev.created + 1) as f64;
                        acc.record(&w, ev.created, t, delay, 1.0);
                        if w.contains(ev.created) {
                            outstanding -= 1;
                            cohort_delivered += 1;
                            if t >= w.end() {
                                acc.push_delay(delay);
                            }
                        }
                    }
                }
            }
            bucket.clear();
        }
        t += 1;
    }
    if hop.created != hop.delivered + hop.in_flight() {
        return Err(Error::Invariant("two-hop packet conservation".into()));
    }
    let in_flight = hop.in_flight();
    Ok(StandaloneReport {
        m,
        nodes: nn,
        cells_per_side: l,
        a_s: grid.cell_area,
        s_rw: match params.kind {
            MobilityKind::Iid => 1.0,
            MobilityKind::RandomWalk => grid.cell_area,
        },
        tier: acc.finish(&w, sources.len(), in_flight),
        censored: outstanding,
        cohort_created,
        cohort_delivered,
        throughput_per_pair: cohort_delivered as f64 / (w.measure as f64 * sources.len().max(1) as f64),
        slots_run: t,
        relay_high_water: hop.relay_high_water,
    })
}

// ---------------------------------------------------------------------------
// Mobile secondary tier carrying primary traffic.

#[derive(Debug, Clone, PartialEq, Eq)]
struct Bitset(Vec<u64>);

impl Bitset {
    fn new(n: usize) -> Self {
        Bitset(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn count_and(&self, other: &Bitset) -> u32 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a & b).count_ones()).sum()
    }
}

/// One overheard primary packet: every secondary inside the source's
/// preservation block at creation holds a copy until it purges it.
#[derive(Debug, Clone)]
struct HeldPacket {
    created: u64,
    type_k: u32,
    holders: Rc<Bitset>,
    /// Holders that have not purged this copy yet.
    remaining: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobileParams {
    pub model: MobilityModel,
    pub p: f64,
    /// Relay queues per primary pair (1 for i.i.d., `tau` for the walk).
    pub queues: usize,
    /// Own-traffic arrival probability per secondary source per slot.
    pub own_lambda: f64,
    pub window: Window,
    pub audit: bool,
    pub trace: bool,
    /// Slots of (slot, node, cell) mobility samples to keep.
    pub mobility_trace_slots: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MobileViolations {
    pub queue_bound_exceeded: u64,
    pub purge_breaches: u64,
    pub class_breaches: u64,
    pub type_k_breaches: u64,
    pub conservation_breaches: u64,
    pub gating_breaches: u64,
    pub primary_moved: u64,
    /// Packets no secondary overheard (the pair stalls on them).
    pub unheard_packets: u64,
}

impl MobileViolations {
    pub fn invariant_breaches(&self) -> u64 {
        self.purge_breaches
            + self.class_breaches
            + self.type_k_breaches
            + self.conservation_breaches
            + self.gating_breaches
            + self.primary_moved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileReport {
    pub primary: TierReport,
    pub secondary: TierReport,
    pub violations: MobileViolations,
    pub a_p: f64,
    pub a_s: f64,
    pub s_rw: f64,
    pub queues: usize,
    /// Longest per-node, per-pair relay queue seen.
    pub queue_high_water: u32,
    pub queue_bound: u32,
    /// Handshakes where the desired packet was eligible for delivery.
    pub opportunities: u64,
    pub successes: u64,
    /// `successes / opportunities`.
    pub measured_q: f64,
    /// Mean of `1 - (1 - a_p)^M` over the same opportunities, `M` being the
    /// on-duty holders of the desired packet.
    pub predicted_q: f64,
    pub mean_holders: f64,
    pub silent_handshakes: u64,
}

pub struct MobileSim<'a> {
    dep: &'a Deployment,
    pub params: MobileParams,
    pub pgrid: GridSpec,
    pub sgrid: GridSpec,
    pub primary: PrimaryState,
    pos: Vec<Point>,
    primary_pos: Vec<Point>,
    class_sets: [Bitset; 2],
    class_of: Vec<Option<MobilityClass>>,
    held: Vec<BTreeMap<u64, HeldPacket>>,
    watermark: Vec<Vec<u32>>,
    qlen: Vec<Vec<u16>>,
    dst_pairs: Vec<Vec<u32>>,
    sinks: Vec<Vec<CellIndex>>,
    gate_mask: Vec<u64>,
    own: TwoHop,
    own_sources: Vec<u32>,
    own_next: u64,
    own_geo: Option<Geometric>,
    rng_mob: SimRng,
    rng_traffic: SimRng,
    rng_own: SimRng,
    rng_sched: SimRng,
    own_buf: Vec<(u32, u32)>,
    pub trace: Trace,
    pub mobility_trace: Vec<(u64, u32, u32)>,
    pacc: TierAccumulator,
    sacc: TierAccumulator,
    pub violations: MobileViolations,
    high_water: u32,
    opportunities: u64,
    successes: u64,
    predicted: f64,
    holders_sum: f64,
    silent: u64,
    delivered_seen: usize,
    occ: Occupancy,
    t: u64,
}

impl<'a> MobileSim<'a> {
    pub fn new(
        dep: &'a Deployment,
        pgrid: GridSpec,
        params: MobileParams,
        streams: &SeedStreams,
    ) -> Result<Self> {
        if params.queues == 0 {
            return Err(Error::InvalidParameter("at least one relay queue per pair".into()));
        }
        if params.model.kind == MobilityKind::RandomWalk
            && params.model.s() < pgrid.cell_area * (1.0 - 1e-9)
        {
            return Err(Error::Precondition {
                hypothesis: "S >= a_p",
                detail: format!("S = {}, a_p = {}", params.model.s(), pgrid.cell_area),
            });
        }
        let ms = dep.num_secondary();
        let np_nodes = dep.num_primary;
        let sgrid = GridSpec::fitted(1.0 / dep.m.max(1.0), CLUSTER_SIDE)?;
        let regions = FrameRegions::new(&pgrid, &sgrid)?;
        let gate_mask: Vec<u64> = regions
            .preservation_masks()
            .iter()
            .zip(regions.collection_masks())
            .map(|(a, b)| a | b)
            .collect();
        let sinks = (0..FRAME_SLOTS).map(|s| regions.sinks(s).collect()).collect();
        let pos: Vec<Point> = dep.secondary_positions().map(|(_, p)| p).collect();
        let primary_pos: Vec<Point> = dep.primary_positions().map(|(_, p)| p).collect();
        let class_of: Vec<Option<MobilityClass>> =
            dep.nodes[np_nodes..].iter().map(|n| n.class).collect();
        let mut class_sets = [Bitset::new(ms), Bitset::new(ms)];
        for (i, c) in class_of.iter().enumerate() {
            match c {
                Some(MobilityClass::I) => class_sets[0].set(i),
                Some(MobilityClass::II) => class_sets[1].set(i),
                None => {}
            }
        }
        let primary = PrimaryState::new(dep, &pgrid, vec![None; pgrid.num_cells()], 0);
        let np = primary.routes.len();
        let mut dst_pairs = vec![Vec::new(); pgrid.num_cells()];
        let mut order: Vec<usize> = (0..np).collect();
        order.sort_by_key(|&k| primary.routes[k].dst);
        for k in order {
            dst_pairs[pgrid.index(primary.routes[k].dst_cell)].push(k as u32);
        }
        let local = |id: u32| id - np_nodes as u32;
        let mut dest = vec![None; ms];
        let mut own_sources = Vec::new();
        for &(a, b) in &dep.secondary_pairs {
            dest[local(a) as usize] = Some(local(b));
            own_sources.push(local(a));
        }
        let own_geo = if params.own_lambda > 0.0 {
            Some(Geometric::new(params.own_lambda).map_err(|e| Error::InvalidParameter(format!("own_lambda: {e}")))?)
        } else {
            None
        };
        let mut rng_own = streams.stream("own-traffic");
        let own_next = own_geo.as_ref().map_or(u64::MAX, |g| g.sample(&mut rng_own));
        let occ = Occupancy::build(&pgrid, pos.iter().enumerate().map(|(i, &p)| (i as u32, p)));
        Ok(Self {
            dep,
            params,
            pgrid,
            sgrid,
            primary,
            pos,
            primary_pos,
            class_sets,
            class_of,
            held: vec![BTreeMap::new(); np],
            watermark: vec![vec![0; ms]; np],
            qlen: vec![vec![0; ms]; np],
            dst_pairs,
            sinks,
            gate_mask,
            own: TwoHop::new(dest),
            own_sources,
            own_next,
            own_geo,
            rng_mob: streams.stream("mobility"),
            rng_traffic: streams.stream("traffic"),
            rng_own,
            rng_sched: streams.stream("schedule"),
            own_buf: Vec::new(),
            trace: Trace::new(params.trace),
            mobility_trace: Vec::new(),
            pacc: TierAccumulator::default(),
            sacc: TierAccumulator::default(),
            violations: MobileViolations::default(),
            high_water: 0,
            opportunities: 0,
            successes: 0,
            predicted: 0.0,
            holders_sum: 0.0,
            silent: 0,
            delivered_seen: 0,
            occ,
            t: 0,
        })
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn positions(&self) -> &[Point] {
        &self.pos
    }

    fn type_k(&self, t: u64) -> u32 {
        ((t / FRAME_SLOTS as u64) % self.params.queues as u64) as u32
    }

    fn duty(t: u64) -> usize {
        // Class I delivers at even primary slots, Class II at odd ones.
        (t % 2) as usize
    }

    /// One primary slot: move, overhear, deliver, then own traffic.
    pub fn step(&mut self) {
        let t = self.t;
        let s = (t % FRAME_SLOTS as u64) as usize;
        if t > 0 {
            step_mobility(&mut self.pos, &self.params.model, &mut self.rng_mob);
        }
        if t < self.params.mobility_trace_slots {
            for (i, p) in self.pos.iter().enumerate() {
                self.mobility_trace.push((t, i as u32, self.pgrid.cell_of_index(*p) as u32));
            }
        }
        self.occ = Occupancy::build(&self.pgrid, self.pos.iter().enumerate().map(|(i, &p)| (i as u32, p)));
        self.overhear(t);
        self.deliver(t, s);
        self.own_traffic(t, s);
        let w = self.params.window;
        for d in &self.primary.delivered[self.delivered_seen..] {
            self.pacc.record(&w, d.created, d.delivered, d.delay() as f64, 1.0);
        }
        self.delivered_seen = self.primary.delivered.len();
        if self.params.audit && t.is_multiple_of(FRAME_SLOTS as u64) {
            let moved = self
                .dep
                .primary_positions()
                .zip(&self.primary_pos)
                .any(|((_, a), b)| a != *b);
            self.violations.primary_moved += moved as u64;
        }
        self.t += 1;
    }

    fn overhear(&mut self, t: u64) {
        let ms = self.pos.len();
        let active = self.primary.active(t).to_vec();
        for a in active {
            let created = self
                .primary
                .create_packets(a, t, self.params.p, &mut self.rng_traffic, &mut self.trace);
            if created.is_empty() {
                continue;
            }
            let mut holders = Bitset::new(ms);
            let mut count = 0u32;
            for c in block_cells(a, &self.pgrid) {
                for &i in self.occ.at(c) {
                    holders.set(i as usize);
                    count += 1;
                }
            }
            let holders = Rc::new(holders);
            let type_k = self.type_k(t);
            for (k, pkt) in created {
                self.pacc.created += 1;
                if count == 0 {
                    self.violations.unheard_packets += 1;
                }
                for c in block_cells(a, &self.pgrid) {
                    for &i in self.occ.at(c) {
                        let q = &mut self.qlen[k][i as usize];
                        *q = q.saturating_add(1);
                        self.high_water = self.high_water.max(*q as u32);
                    }
                }
                self.trace.push(|| TraceEvent {
                    slot: t,
                    cell: (a.x, a.y),
                    action: Action::Overheard,
                    sn: pkt.sn,
                    src: pkt.src,
                    dst: pkt.dst,
                    role: None,
                });
                self.held[k].insert(
                    pkt.sn,
                    HeldPacket { created: t, type_k, holders: holders.clone(), remaining: count },
                );
            }
        }
    }

    /// Drop copies of pair `k` with SN below `d` held by node `i`.
    fn purge(&mut self, k: usize, i: usize, d: u64) {
        let w = self.watermark[k][i] as u64;
        if w >= d {
            return;
        }
        let mut dropped = Vec::new();
        for (&sn, rec) in self.held[k].range_mut(w..d) {
            if rec.holders.get(i) {
                rec.remaining -= 1;
                self.qlen[k][i] -= 1;
                if rec.remaining == 0 {
                    dropped.push(sn);
                }
            }
        }
        for sn in dropped {
            self.held[k].remove(&sn);
        }
        self.watermark[k][i] = d as u32;
    }

    fn deliver(&mut self, t: u64, s: usize) {
        let duty = Self::duty(t);
        let duty_class = if duty == 0 { MobilityClass::I } else { MobilityClass::II };
        let a_p = self.pgrid.cell_area;
        let sinks = self.sinks[s].clone();
        for c in sinks {
            let cidx = self.pgrid.index(c);
            if self.dst_pairs[cidx].is_empty() {
                continue;
            }
            let requester = self
                .occ
                .at(c)
                .iter()
                .copied()
                .filter(|&i| self.class_of[i as usize] == Some(duty_class))
                .min();
            if requester.is_none() {
                self.silent += self.dst_pairs[cidx].len() as u64;
                continue;
            }
            let collection: Vec<u32> = block_cells(c, &self.pgrid)
                .into_iter()
                .flat_map(|b| self.occ.at(b).to_vec())
                .collect();
            for j in 0..self.dst_pairs[cidx].len() {
                let k = self.dst_pairs[cidx][j] as usize;
                let d = self.primary.desired[k];
                for &i in &collection {
                    self.purge(k, i as usize, d);
                }
                if self.params.audit {
                    for &i in &collection {
                        let stale = self.held[k]
                            .range(..d)
                            .any(|(&sn, r)| r.holders.get(i as usize) && (self.watermark[k][i as usize] as u64) <= sn);
                        self.violations.purge_breaches += stale as u64;
                    }
                }
                let Some(rec) = self.held[k].get(&d) else { continue };
                if rec.created >= t {
                    continue;
                }
                if self.params.model.kind == MobilityKind::RandomWalk && rec.type_k != self.type_k(t) {
                    continue;
                }
                self.opportunities += 1;
                let m_obs = rec.holders.count_and(&self.class_sets[duty]);
                self.holders_sum += m_obs as f64;
                self.predicted += 1.0 - (1.0 - a_p).powi(m_obs as i32);
                let holder = self
                    .occ
                    .at(c)
                    .iter()
                    .copied()
                    .find(|&i| self.class_of[i as usize] == Some(duty_class) && rec.holders.get(i as usize));
                let Some(h) = holder else { continue };
                if self.class_of[h as usize] != Some(duty_class) {
                    self.violations.class_breaches += 1;
                }
                if rec.type_k != ((rec.created / FRAME_SLOTS as u64) % self.params.queues as u64) as u32 {
                    self.violations.type_k_breaches += 1;
                }
                let r = &self.primary.routes[k];
                let pkt = Packet::new(d, r.src, r.dst, Tier::Primary, rec.created);
                if self.primary.try_deliver(k, &pkt, t) {
                    self.successes += 1;
                    let role = if duty == 0 { "class_i" } else { "class_ii" };
                    self.trace.push(|| TraceEvent {
                        slot: t,
                        cell: (c.x, c.y),
                        action: Action::Delivered,
                        sn: d,
                        src: pkt.src,
                        dst: pkt.dst,
                        role: Some(role),
                    });
                }
            }
        }
    }

    fn own_traffic(&mut self, t: u64, s: usize) {
        let w = self.params.window;
        if let Some(geo) = self.own_geo {
            let np = self.own_sources.len() as u64;
            let base = t * np;
            while self.own_next < base + np {
                let src = self.own_sources[(self.own_next - base) as usize];
                self.own.arrive(src, t);
                self.sacc.created += 1;
                self.own_next += 1 + geo.sample(&mut self.rng_own);
            }
        }
        // Class I sends own traffic at odd slots, Class II at even ones.
        let on = 1 - Self::duty(t);
        let l = self.sgrid.cells_per_side;
        let mut cells = std::mem::take(&mut self.own_buf);
        cells.clear();
        for (i, p) in self.pos.iter().enumerate() {
            if !self.class_sets[on].get(i) {
                continue;
            }
            let c = self.sgrid.cell_of(*p);
            if c.x % CLUSTER_SIDE != s % CLUSTER_SIDE || c.y % CLUSTER_SIDE != s / CLUSTER_SIDE {
                continue;
            }
            let ci = c.y * l + c.x;
            if self.gate_mask[ci] >> s & 1 == 1 {
                continue;
            }
            if self.params.audit && self.pgrid_region_hit(*p, t) {
                self.violations.gating_breaches += 1;
            }
            cells.push((ci as u32, i as u32));
        }
        // Stable sort keeps ids ascending within a cell.
        cells.sort_by_key(|&(c, _)| c);
        let mut nodes = Vec::new();
        for group in cells.chunk_by(|a, b| a.0 == b.0) {
            nodes.clear();
            nodes.extend(group.iter().map(|&(_, i)| i));
            if let Some(ev) = self.own.serve(&nodes, &mut self.rng_sched) {
                if ev.delivered() {
                    self.sacc.record(&w, ev.created, t, (t - ev.created + 1) as f64, 1.0);
                }
            }
        }
        self.own_buf = cells;
    }

    /// Independent check: is `p` inside any preservation or collection
    /// block of slot `t`?
    fn pgrid_region_hit(&self, p: Point, t: u64) -> bool {
        let s = (t % FRAME_SLOTS as u64) as usize;
        let c = self.pgrid.cell_of(p);
        let active = self.pgrid.active_cells(s);
        active
            .iter()
            .chain(self.sinks[s].iter())
            .any(|&a| block_cells(a, &self.pgrid).contains(&c))
    }

    pub fn run(mut self) -> Result<MobileReport> {
        while self.t < self.params.window.end() {
            self.step();
        }
        self.finish()
    }

    pub fn finish(mut self) -> Result<MobileReport> {
        let pending: u64 = (0..self.primary.routes.len())
            .map(|k| self.primary.next_sn[k] - self.primary.desired[k])
            .sum();
        if self.primary.created != self.primary.delivered.len() as u64 + pending {
            self.violations.conservation_breaches += 1;
        }
        if self.params.audit {
            for k in 0..self.held.len() {
                for sn in self.primary.desired[k]..self.primary.next_sn[k] {
                    if !self.held[k].contains_key(&sn) && self.violations.unheard_packets == 0 {
                        self.violations.conservation_breaches += 1;
                    }
                }
            }
        }
        if self.own.created != self.own.delivered + self.own.in_flight() {
            self.violations.conservation_breaches += 1;
        }
        let bound = (self.dep.n.round() as u32) + 1;
        if self.high_water > bound {
            self.violations.queue_bound_exceeded += 1;
        }
        let w = self.params.window;
        let np = self.primary.routes.len();
        let own_pairs = self.own_sources.len();
        let own_in = self.own.in_flight();
        let opp = self.opportunities.max(1) as f64;
        Ok(MobileReport {
            primary: std::mem::take(&mut self.pacc).finish(&w, np, pending),
            secondary: std::mem::take(&mut self.sacc).finish(&w, own_pairs, own_in),
            violations: self.violations.clone(),
            a_p: self.pgrid.cell_area,
            a_s: self.sgrid.cell_area,
            s_rw: self.params.model.s(),
            queues: self.params.queues,
            queue_high_water: self.high_water,
            queue_bound: bound,
            opportunities: self.opportunities,
            successes: self.successes,
            measured_q: self.successes as f64 / opp,
            predicted_q: self.predicted / opp,
            mean_holders: self.holders_sum / opp,
            silent_handshakes: self.silent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deployment::sample_with;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Separation from dense matrix powers over every (start, target) pair.
    fn dense_separation(side: usize, steps: usize) -> Vec<f64> {
        let n = side * side;
        let mut p = vec![vec![0.0; n]; n];
        for y in 0..side {
            for x in 0..side {
                for dx in -1i64..=1 {
                    for dy in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let tx = (x as i64 + dx).rem_euclid(side as i64) as usize;
                        let ty = (y as i64 + dy).rem_euclid(side as i64) as usize;
                        p[y * side + x][ty * side + tx] += 0.125;
                    }
                }
            }
        }
        let mut pt = p.clone();
        let mut out = Vec::new();
        for _ in 0..steps {
            let min = pt.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            out.push((1.0 - min * n as f64).max(0.0));
            let mut next = vec![vec![0.0; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if pt[i][k] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        next[i][j] += pt[i][k] * p[k][j];
                    }
                }
            }
            pt = next;
        }
        out
    }

    #[test]
    fn single_cell_mixes_at_once() {
        let prof = separation_profile(1, 4).unwrap();
        assert_eq!(prof.tau, 1);
        assert!(prof.s.iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(mixing_tau(1.0).unwrap(), 1);
    }

    #[test]
    fn convolution_matches_dense_powers() {
        for side in [2, 3, 4] {
            let prof = separation_profile(side, 30).unwrap();
            let dense = dense_separation(side, 30);
            for (a, b) in prof.s.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-12, "side {side}: {a} vs {b}");
            }
            let tau = dense.iter().position(|&v| v <= (-1f64).exp()).unwrap() + 1;
            assert_eq!(prof.tau, tau);
        }
        // On the 2x2 torus the walk never stays put, so s(1) = 1.
        assert_eq!(separation_profile(2, 5).unwrap().s[0], 1.0);
    }

    #[test]
    fn tau_scales_with_cell_count() {
        for side in [8usize, 16] {
            let tau = separation_profile(side, 4 * side * side).unwrap().tau;
            let ts = tau as f64 / (side * side) as f64;
            assert!((0.1..0.3).contains(&ts), "side {side}: tau S = {ts}");
        }
    }

    #[test]
    fn rejects_non_tiling_cells() {
        assert!(rw_side_for(0.3).is_err());
        assert!(MobilityModel::random_walk(1.0 / 16.0, 1.0 / 4.0).is_err());
        assert_eq!(MobilityModel::random_walk(1.0 / 16.0, 1.0 / 64.0).unwrap().rw_side, 4);
    }

    #[test]
    fn walk_cells_follow_the_move_table() {
        let side = 5i16;
        for d in 0u8..8 {
            for (x, y) in [(0u16, 0u16), (4, 4), (0, 4), (2, 3)] {
                let (mut cx, mut cy) = (vec![x], vec![y]);
                walk_cells(&mut cx, &mut cy, &[d | 0xf8], side);
                let (dx, dy) = RW_MOVES[d as usize];
                assert_eq!(cx[0] as usize, wrap(x as i64 + dx, 5));
                assert_eq!(cy[0] as usize, wrap(y as i64 + dy, 5));
            }
        }
    }

    #[test]
    fn one_walk_step_hits_each_neighbour_evenly() {
        let model = MobilityModel::random_walk(1.0 / 25.0, 1.0 / 25.0).unwrap();
        let start = Point::new(0.05, 0.05);
        let mut pos = vec![start; 80_000];
        let mut rng = SimRng::seed_from_u64(9);
        step_mobility(&mut pos, &model, &mut rng);
        let mut counts = [0usize; 25];
        for p in &pos {
            assert!((0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y));
            counts[(p.y * 5.0) as usize * 5 + (p.x * 5.0) as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        for (dx, dy) in RW_MOVES {
            let c = counts[wrap(dy, 5) * 5 + wrap(dx, 5)];
            assert!((c as f64 / 80_000.0 - 0.125).abs() < 0.005, "{dx},{dy}: {c}");
        }
    }

    #[test]
    fn iid_positions_are_uniform_and_fresh() {
        let mut pos = vec![Point::new(0.1, 0.1); 40_000];
        let mut rng = SimRng::seed_from_u64(4);
        step_mobility(&mut pos, &MobilityModel::iid(), &mut rng);
        let before = pos.clone();
        step_mobility(&mut pos, &MobilityModel::iid(), &mut rng);
        let mut quad = [0usize; 4];
        let mut same_quad = 0usize;
        for (a, b) in before.iter().zip(&pos) {
            let qa = (a.x >= 0.5) as usize + 2 * (a.y >= 0.5) as usize;
            let qb = (b.x >= 0.5) as usize + 2 * (b.y >= 0.5) as usize;
            quad[qb] += 1;
            same_quad += (qa == qb) as usize;
        }
        for q in quad {
            assert!((q as f64 / 40_000.0 - 0.25).abs() < 0.01);
        }
        // Independent steps land in the same quadrant one time in four.
        assert!((same_quad as f64 / 40_000.0 - 0.25).abs() < 0.01);
    }

    #[test]
    fn walk_keeps_uniform_law() {
        let model = MobilityModel::random_walk(1.0 / 16.0, 1.0 / 64.0).unwrap();
        let mut rng = SimRng::seed_from_u64(2);
        let mut pos: Vec<Point> = (0..32_000).map(|_| Point::new(rng.random(), rng.random())).collect();
        for _ in 0..5 {
            step_mobility(&mut pos, &model, &mut rng);
        }
        let mut counts = [0usize; 16];
        for p in &pos {
            counts[(p.y * 4.0) as usize * 4 + (p.x * 4.0) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 32_000.0 - 1.0 / 16.0).abs() < 0.006);
        }
    }

    #[test]
    fn two_hop_prefers_delivery_then_relays() {
        let mut rng = SimRng::seed_from_u64(1);
        // 0 -> 2, 1 is a bystander.
        let mut hop = TwoHop::new(vec![Some(2), None, None]);
        hop.arrive(0, 5);
        assert_eq!(hop.serve(&[0], &mut rng), None);
        let ev = hop.serve(&[0, 1], &mut rng).unwrap();
        assert_eq!((ev.kind, ev.from, ev.to, ev.created), (HopKind::ToRelay, 0, 1, 5));
        hop.arrive(0, 6);
        // Relay 1 meets destination 2: delivery beats a fresh hand-off.
        let ev = hop.serve(&[0, 1, 2], &mut rng).unwrap();
        assert!(ev.delivered());
        assert_eq!(hop.delivered + hop.in_flight(), hop.created);
        let ev = hop.serve(&[0, 2], &mut rng).unwrap();
        assert_eq!(ev.kind, HopKind::Direct);
        assert_eq!(hop.in_flight(), 0);
    }

    fn mobile_params(model: MobilityModel, queues: usize, p: f64, slots: u64) -> MobileParams {
        MobileParams {
            model,
            p,
            queues,
            own_lambda: 0.01,
            window: Window { warmup: 0, measure: slots },
            audit: true,
            trace: false,
            mobility_trace_slots: 0,
        }
    }

    fn mobile_dep() -> Deployment {
        sample_with(10.0, 2.0, 5, SampleOptions { fixed_count: true, mobile_classes: true }).unwrap()
    }

    #[test]
    fn audited_iid_run_is_clean() {
        let dep = mobile_dep();
        let params = mobile_params(MobilityModel::iid(), 1, 0.05, 64 * 60);
        let r = MobileSim::new(&dep, GridSpec::with_cells(8, 8), params, &SeedStreams::new(3))
            .unwrap()
            .run()
            .unwrap();
        assert_eq!(r.violations.invariant_breaches(), 0, "{:?}", r.violations);
        assert!(r.primary.delivered > 0 && r.secondary.delivered > 0);
        assert!(r.queue_high_water <= r.queue_bound);
    }

    #[test]
    fn audited_walk_run_is_clean() {
        let dep = mobile_dep();
        let model = MobilityModel::random_walk(1.0 / 16.0, 1.0 / 64.0).unwrap();
        let tau = mixing_tau(model.s()).unwrap();
        let params = mobile_params(model, tau, 0.02, 64 * 80);
        let r = MobileSim::new(&dep, GridSpec::with_cells(8, 8), params, &SeedStreams::new(3))
            .unwrap()
            .run()
            .unwrap();
        assert_eq!(r.violations.invariant_breaches(), 0, "{:?}", r.violations);
        assert!(r.primary.delivered > 0);
    }

    #[test]
    fn overload_breaks_the_queue_bound() {
        let dep = mobile_dep();
        let params = mobile_params(MobilityModel::iid(), 1, 0.95, 64 * 300);
        let r = MobileSim::new(&dep, GridSpec::with_cells(8, 8), params, &SeedStreams::new(3))
            .unwrap()
            .run()
            .unwrap();
        assert!(r.measured_q < 0.95);
        assert!(r.violations.queue_bound_exceeded > 0, "high water {}", r.queue_high_water);
    }

    #[test]
    fn standalone_conserves_and_delivers() {
        let params = StandaloneParams {
            kind: MobilityKind::RandomWalk,
            lambda: 1e-3,
            window: Window { warmup: 64, measure: 2000 },
            drain_cap: 200_000,
        };
        let r = run_standalone(100.0, &params, 7).unwrap();
        assert_eq!(r.cells_per_side, 10);
        assert_eq!(r.censored, 0);
        assert_eq!(r.cohort_created, r.cohort_delivered);
        assert!(r.tier.delay_mean > 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn separation_never_increases(side in 1usize..9) {
            let prof = separation_profile(side, 4 * side * side + 16).unwrap();
            for w in prof.s.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            prop_assert!(prof.s[prof.tau - 1] <= (-1f64).exp());
        }
    }
}
