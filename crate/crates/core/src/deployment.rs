//! Node placement for both tiers, S-D pairing, cell occupancy and relay choice.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellIndex, GridSpec, Point};
use crate::seeds::{SeedStreams, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tier {
    Primary,
    Secondary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MobilityClass {
    I,
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub tier: Tier,
    pub position: Point,
    pub class: Option<MobilityClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleOptions {
    /// Use exactly `round(density)` nodes instead of a Poisson count.
    pub fixed_count: bool,
    /// Split secondary pairs into two mobility classes.
    pub mobile_classes: bool,
}

/// Both tiers of one realisation. Primary nodes occupy ids `0..num_primary`,
/// secondary nodes the remaining ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub n: f64,
    pub beta: f64,
    pub m: f64,
    pub seed: u64,
    pub nodes: Vec<Node>,
    pub num_primary: usize,
    pub primary_pairs: Vec<(u32, u32)>,
    pub secondary_pairs: Vec<(u32, u32)>,
    /// Ids left without a partner (at most one per tier).
    pub unpaired: Vec<u32>,
    partner: Vec<Option<u32>>,
    pair_of: Vec<Option<u32>>,
}

pub fn sample_deployment(n: f64, beta: f64, seed: u64) -> Result<Deployment> {
    sample_with(n, beta, seed, SampleOptions::default())
}

pub fn sample_with(n: f64, beta: f64, seed: u64, opts: SampleOptions) -> Result<Deployment> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidParameter(format!("primary density {n} must be >= 1")));
    }
    if !(beta >= 2.0) || !beta.is_finite() {
        return Err(Error::Precondition {
            hypothesis: "beta >= 2",
            detail: format!("beta = {beta}"),
        });
    }
    let m = n.powf(beta);
    let streams = SeedStreams::new(seed);
    let mut counts = streams.stream("counts");
    let np = draw_count(n, opts.fixed_count, &mut counts)?;
    let ns = draw_count(m, opts.fixed_count, &mut counts)?;
    Ok(assemble(n, beta, m, seed, np, ns, opts, &streams, None))
}

/// Primary positions of `sample_with(n, beta, seed, opts)` without
/// materialising the secondary tier. Used where only primary occupancy
/// matters and `m = n^beta` nodes would not fit.
pub fn sample_primary_positions(n: f64, seed: u64, fixed_count: bool) -> Result<Vec<Point>> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidParameter(format!("primary density {n} must be >= 1")));
    }
    let streams = SeedStreams::new(seed);
    let np = draw_count(n, fixed_count, &mut streams.stream("counts"))?;
    let mut rng = streams.stream("placement");
    Ok((0..np).map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>())).collect())
}

/// A secondary tier alone (no primary nodes), for standalone sweeps of the
/// secondary own-traffic scheme.
pub fn sample_secondary_only(m: f64, seed: u64, opts: SampleOptions) -> Result<Deployment> {
    if !(m >= 2.0) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!("secondary density {m} must be >= 2")));
    }
    let streams = SeedStreams::new(seed);
    let ns = draw_count(m, opts.fixed_count, &mut streams.stream("counts"))?;
    Ok(assemble(0.0, f64::NAN, m, seed, 0, ns, opts, &streams, None))
}

fn draw_count(density: f64, fixed: bool, rng: &mut SimRng) -> Result<usize> {
    if fixed {
        return Ok(density.round() as usize);
    }
    let d = Poisson::new(density)
        .map_err(|e| Error::InvalidParameter(format!("poisson({density}): {e}")))?;
    Ok(d.sample(rng) as usize)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    n: f64,
    beta: f64,
    m: f64,
    seed: u64,
    np: usize,
    ns: usize,
    opts: SampleOptions,
    streams: &SeedStreams,
    positions: Option<Vec<Point>>,
) -> Deployment {
    let positions = positions.unwrap_or_else(|| {
        let mut rng = streams.stream("placement");
        (0..np + ns)
            .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect()
    });
    let mut nodes: Vec<Node> = positions
        .into_iter()
        .enumerate()
        .map(|(i, position)| Node {
            id: i as u32,
            tier: if i < np { Tier::Primary } else { Tier::Secondary },
            position,
            class: None,
        })
        .collect();

    let mut rng = streams.stream("pairing");
    let mut unpaired = Vec::new();
    let primary_pairs = random_matching(0..np as u32, &mut rng, &mut unpaired);
    let secondary_pairs = random_matching(np as u32..(np + ns) as u32, &mut rng, &mut unpaired);

    if opts.mobile_classes {
        let mut order: Vec<usize> = (0..secondary_pairs.len()).collect();
        order.shuffle(&mut streams.stream("classes"));
        let half = order.len() / 2;
        for (rank, &pi) in order.iter().enumerate() {
            let class = if rank < half { MobilityClass::I } else { MobilityClass::II };
            let (a, b) = secondary_pairs[pi];
            nodes[a as usize].class = Some(class);
            nodes[b as usize].class = Some(class);
        }
    }

    let total = np + ns;
    let mut partner = vec![None; total];
    let mut pair_of = vec![None; total];
    for (k, &(a, b)) in primary_pairs.iter().enumerate() {
        partner[a as usize] = Some(b);
        partner[b as usize] = Some(a);
        pair_of[a as usize] = Some(k as u32);
        pair_of[b as usize] = Some(k as u32);
    }
    for (k, &(a, b)) in secondary_pairs.iter().enumerate() {
        partner[a as usize] = Some(b);
        partner[b as usize] = Some(a);
        pair_of[a as usize] = Some(k as u32);
        pair_of[b as usize] = Some(k as u32);
    }

    Deployment {
        n,
        beta,
        m,
        seed,
        nodes,
        num_primary: np,
        primary_pairs,
        secondary_pairs,
        unpaired,
        partner,
        pair_of,
    }
}

fn random_matching(
    ids: std::ops::Range<u32>,
    rng: &mut SimRng,
    unpaired: &mut Vec<u32>,
) -> Vec<(u32, u32)> {
    let mut v: Vec<u32> = ids.collect();
    v.shuffle(rng);
    if v.len() % 2 == 1 {
        unpaired.push(v.pop().unwrap());
    }
    v.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

impl Deployment {
    pub fn num_secondary(&self) -> usize {
        self.nodes.len() - self.num_primary
    }

    pub fn position(&self, id: u32) -> Point {
        self.nodes[id as usize].position
    }

    pub fn tier(&self, id: u32) -> Tier {
        self.nodes[id as usize].tier
    }

    pub fn partner(&self, id: u32) -> Option<u32> {
        self.partner[id as usize]
    }

    /// Index of the pair (within its tier's pair list) containing `id`.
    pub fn pair_index(&self, id: u32) -> Option<usize> {
        self.pair_of[id as usize].map(|k| k as usize)
    }

    pub fn primary_positions(&self) -> impl Iterator<Item = (u32, Point)> + '_ {
        self.nodes[..self.num_primary].iter().map(|n| (n.id, n.position))
    }

    pub fn secondary_positions(&self) -> impl Iterator<Item = (u32, Point)> + '_ {
        self.nodes[self.num_primary..].iter().map(|n| (n.id, n.position))
    }

    pub fn occupancy(&self, grid: &GridSpec, tier: Tier) -> Occupancy {
        match tier {
            Tier::Primary => Occupancy::build(grid, self.primary_positions()),
            Tier::Secondary => Occupancy::build(grid, self.secondary_positions()),
        }
    }

    /// Line-oriented export: a header with `n`, `beta` and `seed`, then one
    /// `id tier x y` line per node. Pairings and classes are rebuilt from
    /// the seed on import.
    pub fn export_text(&self, opts: SampleOptions) -> String {
        let mut s = String::with_capacity(self.nodes.len() * 48);
        let _ = writeln!(
            s,
            "n {:?} beta {:?} seed {} m {:?} classes {}",
            self.n, self.beta, self.seed, self.m, opts.mobile_classes as u8
        );
        for node in &self.nodes {
            let t = match node.tier {
                Tier::Primary => 'p',
                Tier::Secondary => 's',
            };
            let _ = writeln!(s, "{} {} {:?} {:?}", node.id, t, node.position.x, node.position.y);
        }
        s
    }

    pub fn import_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        });
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let field = |key: &str| -> Result<&str> {
            toks.iter()
                .position(|t| *t == key)
                .and_then(|i| toks.get(i + 1).copied())
                .ok_or_else(|| Error::Parse {
                    line: hl + 1,
                    msg: format!("header lacks `{key}`"),
                })
        };
        let n: f64 = parse_tok(field("n")?, hl)?;
        let beta: f64 = parse_tok(field("beta")?, hl)?;
        let seed: u64 = parse_tok(field("seed")?, hl)?;
        let m: f64 = match field("m") {
            Ok(v) => parse_tok(v, hl)?,
            Err(_) => n.powf(beta),
        };
        let mobile_classes = matches!(field("classes"), Ok("1"));

        let mut positions = Vec::new();
        let mut np = 0usize;
        let mut seen_secondary = false;
        for (ln, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 4 {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected 4 fields, got {}", t.len()),
                });
            }
            let id: usize = parse_tok(t[0], ln)?;
            if id != positions.len() {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("ids must be consecutive from 0 (got {id})"),
                });
            }
            match t[1] {
                "p" if !seen_secondary => np += 1,
                "p" => {
                    return Err(Error::Parse {
                        line: ln + 1,
                        msg: "primary nodes must precede secondary nodes".into(),
                    })
                }
                "s" => seen_secondary = true,
                other => {
                    return Err(Error::Parse {
                        line: ln + 1,
                        msg: format!("unknown tier `{other}`"),
                    })
                }
            }
            positions.push(Point::new(parse_tok(t[2], ln)?, parse_tok(t[3], ln)?));
        }
        let ns = positions.len() - np;
        let opts = SampleOptions {
            fixed_count: false,
            mobile_classes,
        };
        Ok(assemble(
            n,
            beta,
            m,
            seed,
            np,
            ns,
            opts,
            &SeedStreams::new(seed),
            Some(positions),
        ))
    }
}

fn parse_tok<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line: line + 1,
        msg: format!("cannot parse `{s}`"),
    })
}

/// Compressed cell-to-node index: the ids resident in cell `i` are
/// `ids[start[i]..start[i + 1]]`, in increasing id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub grid: GridSpec,
    start: Vec<u32>,
    ids: Vec<u32>,
}

impl Occupancy {
    pub fn build(grid: &GridSpec, nodes: impl Iterator<Item = (u32, Point)>) -> Self {
        let items: Vec<(u32, u32)> = nodes
            .map(|(id, p)| (grid.cell_of_index(p) as u32, id))
            .collect();
        Self::from_cells(grid, &items)
    }

    /// Build from precomputed `(cell index, node id)` pairs.
    pub fn from_cells(grid: &GridSpec, items: &[(u32, u32)]) -> Self {
        let nc = grid.num_cells();
        let mut start = vec![0u32; nc + 1];
        for &(c, _) in items {
            start[c as usize + 1] += 1;
        }
        for i in 0..nc {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut ids = vec![0u32; items.len()];
        let mut place = |c: u32, id: u32| {
            ids[fill[c as usize] as usize] = id;
            fill[c as usize] += 1;
        };
        if items.is_sorted_by_key(|&(_, id)| id) {
            for &(c, id) in items {
                place(c, id);
            }
        } else {
            let mut sorted: Vec<&(u32, u32)> = items.iter().collect();
            sorted.sort_by_key(|&&(_, id)| id);
            for &&(c, id) in &sorted {
                place(c, id);
            }
        }
        Self {
            grid: *grid,
            start,
            ids,
        }
    }

    pub fn cell(&self, index: usize) -> &[u32] {
        &self.ids[self.start[index] as usize..self.start[index + 1] as usize]
    }

    pub fn at(&self, c: CellIndex) -> &[u32] {
        self.cell(self.grid.index(c))
    }

    pub fn count(&self, index: usize) -> usize {
        (self.start[index + 1] - self.start[index]) as usize
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..self.grid.num_cells()).map(|i| self.count(i)).collect()
    }

    pub fn total(&self) -> usize {
        self.ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStats {
    pub counts: Vec<usize>,
    /// `histogram[k]` = number of cells holding exactly `k` nodes.
    pub histogram: Vec<usize>,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl OccupancyStats {
    pub fn from_counts(counts: Vec<usize>) -> Self {
        let max = counts.iter().copied().max().unwrap_or(0);
        let min = counts.iter().copied().min().unwrap_or(0);
        let mut histogram = vec![0usize; max + 1];
        for &c in &counts {
            histogram[c] += 1;
        }
        let mean = if counts.is_empty() {
            0.0
        } else {
            counts.iter().sum::<usize>() as f64 / counts.len() as f64
        };
        Self {
            counts,
            histogram,
            min,
            max,
            mean,
        }
    }

    /// True if some cell holds fewer than `lo` or more than `hi` nodes.
    pub fn any_outside(&self, lo: f64, hi: f64) -> bool {
        self.counts
            .iter()
            .any(|&c| (c as f64) < lo || (c as f64) > hi)
    }
}

pub fn occupancy_stats(dep: &Deployment, grid: &GridSpec, tier: Tier) -> OccupancyStats {
    OccupancyStats::from_counts(dep.occupancy(grid, tier).counts())
}

/// Uniform choice among every node (either tier) resident in `cell`.
pub fn pick_designated_relay(
    cell: CellIndex,
    primary: &Occupancy,
    secondary: &Occupancy,
    rng: &mut SimRng,
) -> Result<u32> {
    let a = primary.at(cell);
    let b = secondary.at(cell);
    let total = a.len() + b.len();
    if total == 0 {
        return Err(Error::EmptyCell((cell.x, cell.y)));
    }
    let k = rng.random_range(0..total);
    Ok(if k < a.len() { a[k] } else { b[k - a.len()] })
}
