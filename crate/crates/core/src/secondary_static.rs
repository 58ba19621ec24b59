//! Static secondary tier: three-subframe frames, preservation gating,
//! N-way splitting of primary packets over parallel secondary HV paths,
//! reassembly at an intermediate destination and delivery in collection
//! regions, alongside the tier's own multi-hop traffic.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deployment::{Deployment, Occupancy, Tier};
use crate::error::{Error, Result};
use crate::geometry::{block_cells, CellIndex, FrameRegions, GridSpec, FRAME_SLOTS};
use crate::metrics::{TierAccumulator, TierReport, Window};
use crate::primary::{assign_relays, hv_cell, max_load_on_path, Packet, PathLoad, PrimaryState};
use crate::seeds::{SeedStreams, SimRng};
use crate::trace::{Action, Trace, TraceEvent};

pub use crate::analytics::size_secondary_grid;

/// Secondary slots per subframe; one subframe lasts one primary slot.
pub const SLOTS_PER_SUBFRAME: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubframeRole {
    OwnTraffic,
    RelayPrimary,
    DeliverPrimary,
}

impl SubframeRole {
    pub fn label(&self) -> &'static str {
        match self {
            SubframeRole::OwnTraffic => "own",
            SubframeRole::RelayPrimary => "relay",
            SubframeRole::DeliverPrimary => "deliver",
        }
    }
}

/// Role of the secondary subframe running alongside primary slot `t`.
pub fn role_of(t: u64) -> SubframeRole {
    match t % 3 {
        0 => SubframeRole::OwnTraffic,
        1 => SubframeRole::RelayPrimary,
        _ => SubframeRole::DeliverPrimary,
    }
}

/// Relays and secondary-grid routes for one primary pair's segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub relays: Vec<u32>,
    pub starts: Vec<CellIndex>,
    pub intermediate: u32,
    pub end: CellIndex,
    pub lens: Vec<u32>,
    pub max_len: u32,
}

impl SplitPlan {
    pub fn n(&self) -> usize {
        self.relays.len()
    }

    /// Cell holding segment `i` after `h` lockstep hops.
    pub fn cell(&self, i: usize, h: u32) -> CellIndex {
        hv_cell(self.starts[i], self.end, h.min(self.lens[i]) as usize)
    }

    pub fn live(&self, i: usize, h: u32) -> bool {
        h < self.lens[i]
    }
}

/// Choose `n_split` distinct secondary relays in the first-hop primary cell
/// and the intermediate destination (the secondary nearest the destination
/// inside the destination's primary cell).
#[allow(clippy::too_many_arguments)]
pub fn split_primary_packet(
    first_hop: CellIndex,
    dst_node: u32,
    dep: &Deployment,
    primary: &GridSpec,
    secondary: &GridSpec,
    sec_on_primary: &Occupancy,
    n_split: usize,
    rng: &mut SimRng,
) -> Result<SplitPlan> {
    let cands = sec_on_primary.at(first_hop);
    if cands.len() < n_split || n_split == 0 {
        return Err(Error::Precondition {
            hypothesis: "N secondary relays in the first-hop cell",
            detail: format!(
                "cell ({}, {}) holds {} secondaries, need {n_split}",
                first_hop.x,
                first_hop.y,
                cands.len()
            ),
        });
    }
    let relays: Vec<u32> = cands.choose_multiple(rng, n_split).copied().collect();
    let dpos = dep.position(dst_node);
    let dcell = primary.cell_of(dpos);
    let intermediate = sec_on_primary
        .at(dcell)
        .iter()
        .copied()
        .min_by(|&a, &b| {
            dep.position(a)
                .dist(&dpos)
                .partial_cmp(&dep.position(b).dist(&dpos))
                .unwrap()
                .then(a.cmp(&b))
        })
        .ok_or(Error::EmptyCell((dcell.x, dcell.y)))?;
    let end = secondary.cell_of(dep.position(intermediate));
    let starts: Vec<CellIndex> = relays
        .iter()
        .map(|&r| secondary.cell_of(dep.position(r)))
        .collect();
    let lens: Vec<u32> = starts.iter().map(|s| s.manhattan(&end) as u32).collect();
    let max_len = lens.iter().copied().max().unwrap_or(0);
    Ok(SplitPlan {
        relays,
        starts,
        intermediate,
        end,
        lens,
        max_len,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PairMode {
    /// Destination within one cell of the source: delivered on creation.
    Direct,
    Split(SplitPlan),
    /// Split precondition failed; the pair uses unassisted primary relaying.
    Fallback,
}

/// A primary packet in transit as `N` segments advancing together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSet {
    pub sn: u64,
    pub created: u64,
    pub hop: u32,
    /// Per-segment hop counters, kept only when auditing.
    pub seg_hops: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticParams {
    pub p: f64,
    pub p_s: f64,
    pub n_split: usize,
    /// Secondary pairs whose packets are simulated individually.
    pub tagged_flows: usize,
    pub window: Window,
    pub audit: bool,
    pub trace: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StaticViolations {
    pub empty_relay_cells: usize,
    pub primary_relay_cells: usize,
    pub short_first_hop_pairs: usize,
    pub fallback_pairs: usize,
    pub fallback_packets: u64,
    pub gating_breaches: u64,
    pub lockstep_breaches: u64,
    pub conservation_breaches: u64,
}

impl StaticViolations {
    /// Breaches of structural invariants (as opposed to counted
    /// precondition failures).
    pub fn invariant_breaches(&self) -> u64 {
        self.gating_breaches + self.lockstep_breaches + self.conservation_breaches
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticReport {
    pub primary: TierReport,
    pub secondary: TierReport,
    pub violations: StaticViolations,
    /// Fraction of primary cells whose designated relay is a secondary node.
    pub secondary_relay_fraction: f64,
    pub n_split: usize,
    pub primary_cells_per_side: usize,
    pub secondary_cells_per_side: usize,
    pub a_p: f64,
    pub a_s: f64,
    pub gated_set_steps: u64,
    pub reassembly_high_water: usize,
    pub direct_pairs: usize,
    pub split_pairs: usize,
}

struct OwnFlow {
    pair: usize,
    src: CellIndex,
    dst: CellIndex,
    len: usize,
    payload: f64,
    next_sn: u64,
    queues: Vec<VecDeque<(u64, u64)>>,
}

pub struct StaticSim<'a> {
    dep: &'a Deployment,
    pub params: StaticParams,
    pub pgrid: GridSpec,
    pub sgrid: GridSpec,
    pub primary: PrimaryState,
    pub modes: Vec<PairMode>,
    payload: Vec<f64>,
    pres_mask: Vec<u64>,
    sink_pairs: Vec<Vec<u32>>,
    pres_rects: Vec<Vec<(f64, f64, f64, f64)>>,
    sets: Vec<VecDeque<SplitSet>>,
    ready: Vec<BTreeMap<u64, u64>>,
    own: Vec<OwnFlow>,
    traffic_rng: SimRng,
    own_rng: SimRng,
    pub trace: Trace,
    pacc: TierAccumulator,
    sacc: TierAccumulator,
    pub violations: StaticViolations,
    secondary_relay_fraction: f64,
    gated_steps: u64,
    reassembly_high_water: usize,
    delivered_seen: usize,
    t: u64,
}

impl<'a> StaticSim<'a> {
    pub fn new(
        dep: &'a Deployment,
        pgrid: GridSpec,
        sgrid: GridSpec,
        params: StaticParams,
        streams: &SeedStreams,
    ) -> Result<Self> {
        let regions = FrameRegions::new(&pgrid, &sgrid)?;
        let pres_mask = regions.preservation_masks();
        let p_occ = dep.occupancy(&pgrid, Tier::Primary);
        let s_occ = dep.occupancy(&pgrid, Tier::Secondary);
        let (relays, empty) = assign_relays(&pgrid, &p_occ, &s_occ, &mut streams.stream("relays"));
        let mut violations = StaticViolations {
            empty_relay_cells: empty,
            ..Default::default()
        };
        let sec_relays = relays
            .iter()
            .filter(|r| r.is_some_and(|id| dep.tier(id) == Tier::Secondary))
            .count();
        violations.primary_relay_cells = relays.iter().flatten().count() - sec_relays;
        let secondary_relay_fraction = sec_relays as f64 / pgrid.num_cells() as f64;
        let primary = PrimaryState::new(dep, &pgrid, relays, empty);

        let mut seg_rng = streams.stream("segments");
        let mut modes = Vec::with_capacity(primary.routes.len());
        for r in &primary.routes {
            if r.direct() {
                modes.push(PairMode::Direct);
                continue;
            }
            let first = r.path.at(1);
            let relay_ok = primary.relays[pgrid.index(first)]
                .is_some_and(|id| dep.tier(id) == Tier::Secondary);
            let plan = split_primary_packet(
                first,
                r.dst,
                dep,
                &pgrid,
                &sgrid,
                &s_occ,
                params.n_split,
                &mut seg_rng,
            );
            match plan {
                Ok(p) if relay_ok => modes.push(PairMode::Split(p)),
                Ok(_) => modes.push(PairMode::Fallback),
                Err(Error::Precondition { .. }) => {
                    violations.short_first_hop_pairs += 1;
                    modes.push(PairMode::Fallback)
                }
                Err(_) => modes.push(PairMode::Fallback),
            }
        }
        violations.fallback_pairs = modes.iter().filter(|m| matches!(m, PairMode::Fallback)).count();

        // Fluid payloads: ingress share at the source cell, bounded by the
        // most loaded secondary cell of any segment path.
        let mut seg_load = PathLoad::new(&sgrid);
        for m in &modes {
            if let PairMode::Split(p) = m {
                for &s in &p.starts {
                    seg_load.add(s, p.end);
                }
            }
        }
        let seg_load = seg_load.finish();
        let payload: Vec<f64> = modes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let sc = pgrid.index(primary.routes[k].src_cell);
                let ingress = 1.0 / primary.sources_in_cell[sc].len().max(1) as f64;
                match m {
                    PairMode::Direct => ingress,
                    PairMode::Fallback => primary.multihop_payload(k),
                    PairMode::Split(p) => {
                        let worst = p
                            .starts
                            .iter()
                            .map(|&s| max_load_on_path(&seg_load, &sgrid, s, p.end))
                            .max()
                            .unwrap_or(1)
                            .max(1);
                        ingress.min(p.n() as f64 / worst as f64)
                    }
                }
            })
            .collect();

        let mut sink_pairs = vec![Vec::new(); pgrid.num_cells()];
        for (k, m) in modes.iter().enumerate() {
            if matches!(m, PairMode::Split(_)) {
                sink_pairs[pgrid.index(primary.routes[k].dst_cell)].push(k as u32);
            }
        }

        let pres_rects = (0..FRAME_SLOTS)
            .map(|s| {
                pgrid
                    .active_cells(s)
                    .into_iter()
                    .flat_map(|a| block_cells(a, &pgrid))
                    .map(|c| pgrid.rect(c))
                    .collect()
            })
            .collect();

        // Own traffic: loads from every secondary pair, packets for a tagged
        // subset.
        let mut own_load = PathLoad::new(&sgrid);
        let cell_pair = |&(a, b): &(u32, u32)| {
            (sgrid.cell_of(dep.position(a)), sgrid.cell_of(dep.position(b)))
        };
        for pr in &dep.secondary_pairs {
            let (s, d) = cell_pair(pr);
            own_load.add(s, d);
        }
        let own_load = own_load.finish();
        let mut idx: Vec<usize> = (0..dep.secondary_pairs.len()).collect();
        idx.shuffle(&mut streams.stream("tagged"));
        idx.truncate(params.tagged_flows);
        idx.sort_unstable();
        let own = idx
            .into_iter()
            .map(|k| {
                let (s, d) = cell_pair(&dep.secondary_pairs[k]);
                let len = s.manhattan(&d);
                OwnFlow {
                    pair: k,
                    src: s,
                    dst: d,
                    len,
                    payload: 1.0 / max_load_on_path(&own_load, &sgrid, s, d).max(1) as f64,
                    next_sn: 0,
                    queues: vec![VecDeque::new(); len.max(1)],
                }
            })
            .collect();

        let np = primary.routes.len();
        Ok(Self {
            dep,
            params,
            pgrid,
            sgrid,
            primary,
            modes,
            payload,
            pres_mask,
            sink_pairs,
            pres_rects,
            sets: vec![VecDeque::new(); np],
            ready: vec![BTreeMap::new(); np],
            own,
            traffic_rng: streams.stream("traffic"),
            own_rng: streams.stream("own-traffic"),
            trace: Trace::new(params.trace),
            pacc: TierAccumulator::default(),
            sacc: TierAccumulator::default(),
            violations,
            secondary_relay_fraction,
            gated_steps: 0,
            reassembly_high_water: 0,
            delivered_seen: 0,
            t: 0,
        })
    }

    #[inline]
    fn gated(&self, c: CellIndex, s: usize) -> bool {
        self.pres_mask[self.sgrid.index(c)] >> s & 1 == 1
    }

    /// Independent geometric check that a transmitting secondary cell keeps
    /// at least one secondary cell width from every preservation block.
    fn clear_of_preservation(&self, c: CellIndex, s: usize) -> bool {
        let (x0, y0, x1, y1) = self.sgrid.rect(c);
        let g = self.sgrid.side() * (1.0 - 1e-6);
        self.pres_rects[s].iter().all(|&(a0, b0, a1, b1)| {
            let dx = (a0 - x1).max(x0 - a1).max(0.0);
            let dy = (b0 - y1).max(y0 - b1).max(0.0);
            dx.max(dy) >= g
        })
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    /// Advance one primary slot (and its secondary subframe).
    pub fn step(&mut self) {
        let t = self.t;
        let s = (t % FRAME_SLOTS as u64) as usize;
        let active = self.primary.active(t).to_vec();
        for &c in &active {
            let created =
                self.primary
                    .create_packets(c, t, self.params.p, &mut self.traffic_rng, &mut self.trace);
            for (k, pkt) in created {
                self.pacc.created += 1;
                match &self.modes[k] {
                    PairMode::Direct => {
                        let ok = self.primary.try_deliver(k, &pkt, t);
                        debug_assert!(ok);
                    }
                    PairMode::Split(plan) => {
                        let n = plan.n();
                        self.trace.push(|| TraceEvent {
                            slot: t,
                            cell: (c.x, c.y),
                            action: Action::Split,
                            sn: pkt.sn,
                            src: pkt.src,
                            dst: pkt.dst,
                            role: None,
                        });
                        self.sets[k].push_back(SplitSet {
                            sn: pkt.sn,
                            created: t,
                            hop: 0,
                            seg_hops: if self.params.audit { vec![0; n] } else { Vec::new() },
                        });
                    }
                    PairMode::Fallback => {
                        self.violations.fallback_packets += 1;
                        self.trace.push(|| TraceEvent {
                            slot: t,
                            cell: (c.x, c.y),
                            action: Action::Fallback,
                            sn: pkt.sn,
                            src: pkt.src,
                            dst: pkt.dst,
                            role: None,
                        });
                        self.primary.inject(k, 1, pkt);
                    }
                }
            }
            self.primary.relay_cell(c, t, &mut self.trace);
        }
        match role_of(t) {
            SubframeRole::OwnTraffic => self.own_subframe(t, s),
            SubframeRole::RelayPrimary => self.relay_subframe(t, s),
            SubframeRole::DeliverPrimary => self.deliver_subframe(t, s),
        }
        self.collect_deliveries();
        self.t += 1;
    }

    fn collect_deliveries(&mut self) {
        let w = self.params.window;
        for d in &self.primary.delivered[self.delivered_seen..] {
            self.pacc
                .record(&w, d.created, d.delivered, d.delay() as f64, self.payload[d.pair]);
        }
        self.delivered_seen = self.primary.delivered.len();
    }

    fn relay_subframe(&mut self, t: u64, s: usize) {
        let audit = self.params.audit;
        for k in 0..self.sets.len() {
            let PairMode::Split(plan) = &self.modes[k] else {
                continue;
            };
            let mut moved_from: Option<u32> = None;
            let mut done = Vec::new();
            for (j, set) in self.sets[k].iter_mut().enumerate() {
                if set.created >= t {
                    continue;
                }
                if moved_from == Some(set.hop) {
                    continue;
                }
                let h = set.hop;
                let mut blocked = false;
                for i in 0..plan.n() {
                    if plan.live(i, h) {
                        let c = plan.cell(i, h);
                        if self.pres_mask[self.sgrid.index(c)] >> s & 1 == 1 {
                            blocked = true;
                            break;
                        }
                    }
                }
                if blocked {
                    self.gated_steps += 1;
                    continue;
                }
                if audit {
                    let mut first: Option<u32> = None;
                    for i in 0..plan.n() {
                        if plan.live(i, h) {
                            let c = plan.cell(i, h);
                            let (x0, y0, x1, y1) = self.sgrid.rect(c);
                            let g = self.sgrid.side() * (1.0 - 1e-6);
                            let clear = self.pres_rects[s].iter().all(|&(a0, b0, a1, b1)| {
                                let dx = (a0 - x1).max(x0 - a1).max(0.0);
                                let dy = (b0 - y1).max(y0 - b1).max(0.0);
                                dx.max(dy) >= g
                            });
                            if !clear {
                                self.violations.gating_breaches += 1;
                            }
                            set.seg_hops[i] += 1;
                            match first {
                                None => first = Some(set.seg_hops[i]),
                                Some(f) if f != set.seg_hops[i] => {
                                    self.violations.lockstep_breaches += 1
                                }
                                _ => {}
                            }
                        }
                    }
                }
                set.hop += 1;
                moved_from = Some(h);
                if set.hop >= plan.max_len {
                    done.push(j);
                }
            }
            for &j in done.iter().rev() {
                let set = self.sets[k].remove(j).unwrap();
                if audit {
                    let whole = set
                        .seg_hops
                        .iter()
                        .zip(&plan.lens)
                        .all(|(&a, &l)| a == l);
                    if !whole {
                        self.violations.lockstep_breaches += 1;
                    }
                }
                let r = &self.primary.routes[k];
                let (src, dst) = (r.src, r.dst);
                let end = plan.end;
                self.trace.push(|| TraceEvent {
                    slot: t,
                    cell: (end.x, end.y),
                    action: Action::Reassembled,
                    sn: set.sn,
                    src,
                    dst,
                    role: Some("relay"),
                });
                self.ready[k].insert(set.sn, set.created);
                self.reassembly_high_water = self.reassembly_high_water.max(self.ready[k].len());
            }
        }
    }

    fn deliver_subframe(&mut self, t: u64, s: usize) {
        let sinks: Vec<CellIndex> = self.primary_sinks(s);
        for c in sinks {
            let idx = self.pgrid.index(c);
            for j in 0..self.sink_pairs[idx].len() {
                let k = self.sink_pairs[idx][j] as usize;
                let want = self.primary.desired[k];
                if let Some(&created) = self.ready[k].get(&want) {
                    let r = &self.primary.routes[k];
                    let pkt = Packet::new(want, r.src, r.dst, Tier::Primary, created);
                    let ok = self.primary.try_deliver(k, &pkt, t);
                    debug_assert!(ok);
                    self.ready[k].remove(&want);
                    self.trace.push(|| TraceEvent {
                        slot: t,
                        cell: (c.x, c.y),
                        action: Action::Delivered,
                        sn: want,
                        src: pkt.src,
                        dst: pkt.dst,
                        role: Some("deliver"),
                    });
                } else if !self.ready[k].is_empty() {
                    self.primary.handshake_idle += 1;
                }
            }
        }
    }

    fn primary_sinks(&self, s: usize) -> Vec<CellIndex> {
        let k = self.pgrid.cells_per_side;
        let half = (self.pgrid.cluster_side / 2) as i64;
        let mut out = Vec::new();
        for a in self.pgrid.active_cells(s) {
            if self.pgrid.is_tiled() {
                out.push(CellIndex::new((a.x + half as usize) % k, a.y));
            } else {
                for dx in [half, -half] {
                    let x = a.x as i64 + dx;
                    if (0..k as i64).contains(&x) {
                        out.push(CellIndex::new(x as usize, a.y));
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn own_subframe(&mut self, t: u64, s: usize) {
        let w = self.params.window;
        let audit = self.params.audit;
        for f in 0..self.own.len() {
            if self.own_rng.random_bool(self.params.p_s) {
                let flow = &mut self.own[f];
                flow.queues[0].push_back((flow.next_sn, t));
                flow.next_sn += 1;
                self.sacc.created += 1;
            }
            let len = self.own[f].len;
            for h in (0..len.max(1)).rev() {
                let flow = &self.own[f];
                if flow.queues[h].is_empty() {
                    continue;
                }
                let c = hv_cell(flow.src, flow.dst, h);
                if self.gated(c, s) {
                    continue;
                }
                if audit && !self.clear_of_preservation(c, s) {
                    self.violations.gating_breaches += 1;
                }
                let flow = &mut self.own[f];
                let (sn, created) = flow.queues[h].pop_front().unwrap();
                if h + 1 >= len {
                    let delay = ((t - created + 1) * SLOTS_PER_SUBFRAME) as f64;
                    self.sacc.record(&w, created, t, delay, flow.payload);
                    let (pair, dst) = (flow.pair, flow.dst);
                    let (a, b) = self.dep.secondary_pairs[pair];
                    self.trace.push(|| TraceEvent {
                        slot: t,
                        cell: (dst.x, dst.y),
                        action: Action::Delivered,
                        sn,
                        src: a,
                        dst: b,
                        role: Some("own"),
                    });
                } else {
                    flow.queues[h + 1].push_back((sn, created));
                }
            }
        }
    }

    pub fn primary_in_flight(&self) -> u64 {
        let sets: usize = self.sets.iter().map(|q| q.len()).sum();
        let ready: usize = self.ready.iter().map(|q| q.len()).sum();
        (sets + ready + self.primary.in_flight()) as u64
    }

    pub fn secondary_in_flight(&self) -> u64 {
        self.own
            .iter()
            .map(|f| f.queues.iter().map(|q| q.len()).sum::<usize>())
            .sum::<usize>() as u64
    }

    /// Run to the end of the measurement window and report.
    pub fn run(mut self) -> Result<StaticReport> {
        let end = self.params.window.end();
        while self.t < end {
            self.step();
        }
        self.finish()
    }

    pub fn finish(mut self) -> Result<StaticReport> {
        let p_in = self.primary_in_flight();
        let s_in = self.secondary_in_flight();
        let delivered = self.primary.delivered.len() as u64;
        if self.primary.created != delivered + p_in {
            self.violations.conservation_breaches += 1;
        }
        let own_created: u64 = self.own.iter().map(|f| f.next_sn).sum();
        if own_created != self.sacc.created {
            self.violations.conservation_breaches += 1;
        }
        if self.params.audit {
            self.primary.audit()?;
        }
        let w = self.params.window;
        let counted = self.modes.len() - self.violations.fallback_pairs;
        let split_pairs = self.modes.iter().filter(|m| matches!(m, PairMode::Split(_))).count();
        let direct_pairs = self.modes.iter().filter(|m| matches!(m, PairMode::Direct)).count();
        // Fallback deliveries are excluded from the fitted tier report.
        let mut pacc = TierAccumulator::default();
        pacc.created = self.pacc.created;
        for d in &self.primary.delivered {
            if !matches!(self.modes[d.pair], PairMode::Fallback) {
                pacc.record(&w, d.created, d.delivered, d.delay() as f64, self.payload[d.pair]);
            }
        }
        let secondary_pairs = self.own.len();
        Ok(StaticReport {
            primary: pacc.finish(&w, counted, p_in),
            secondary: std::mem::take(&mut self.sacc).finish(&w, secondary_pairs, s_in),
            violations: self.violations.clone(),
            secondary_relay_fraction: self.secondary_relay_fraction,
            n_split: self.params.n_split,
            primary_cells_per_side: self.pgrid.cells_per_side,
            secondary_cells_per_side: self.sgrid.cells_per_side,
            a_p: self.pgrid.cell_area,
            a_s: self.sgrid.cell_area,
            gated_set_steps: self.gated_steps,
            reassembly_high_water: self.reassembly_high_water,
            direct_pairs,
            split_pairs,
        })
    }
}
