//! Unit-square geometry: cell grids, cluster tiling, TDMA slot classes,
//! preservation/collection regions and torus arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of cells along one side of a TDMA cluster (64-cell clusters).
pub const CLUSTER_SIDE: usize = 8;
/// Slots in one TDMA frame.
pub const FRAME_SLOTS: usize = CLUSTER_SIDE * CLUSTER_SIDE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub x: usize,
    pub y: usize,
}

impl CellIndex {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Chebyshev (8-neighbourhood) distance on the plain square.
    pub fn chebyshev(&self, other: &CellIndex) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    pub fn manhattan(&self, other: &CellIndex) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

/// A square grid over the unit square.
///
/// `cell_area` is always `1 / cells_per_side^2`, i.e. the area actually used
/// after rounding the requested target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cell_area: f64,
    pub cells_per_side: usize,
    pub cluster_side: usize,
}

impl GridSpec {
    /// Grid whose side is the multiple of `cluster_side` nearest to
    /// `1/sqrt(target_cell_area)`, so that clusters tile it exactly.
    pub fn make_grid(target_cell_area: f64, cluster_side: usize) -> Result<Self> {
        if !(target_cell_area > 0.0 && target_cell_area <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cell area {target_cell_area} outside (0, 1]"
            )));
        }
        if cluster_side == 0 {
            return Err(Error::InvalidParameter("cluster side must be positive".into()));
        }
        let raw = 1.0 / target_cell_area.sqrt();
        if raw + 1e-9 < cluster_side as f64 {
            return Err(Error::GridTooSmall {
                cells_per_side: raw.floor() as usize,
                cluster_side,
            });
        }
        let clusters = ((raw / cluster_side as f64).round() as usize).max(1);
        Ok(Self::with_cells(clusters * cluster_side, cluster_side))
    }

    /// Grid whose side is the integer nearest to `1/sqrt(target_cell_area)`,
    /// without requiring whole clusters. Partial clusters at the right and
    /// top edges simply leave some TDMA slots idle there.
    pub fn fitted(target_cell_area: f64, cluster_side: usize) -> Result<Self> {
        if !(target_cell_area > 0.0 && target_cell_area <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cell area {target_cell_area} outside (0, 1]"
            )));
        }
        let cells = (1.0 / target_cell_area.sqrt()).round().max(1.0) as usize;
        if cells < cluster_side {
            return Err(Error::GridTooSmall {
                cells_per_side: cells,
                cluster_side,
            });
        }
        Ok(Self::with_cells(cells, cluster_side))
    }

    pub fn with_cells(cells_per_side: usize, cluster_side: usize) -> Self {
        assert!(cells_per_side > 0 && cluster_side > 0);
        Self {
            cell_area: 1.0 / (cells_per_side * cells_per_side) as f64,
            cells_per_side,
            cluster_side,
        }
    }

    pub fn side(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    /// True when clusters tile the grid exactly (torus arithmetic is then
    /// consistent with the TDMA pattern).
    pub fn is_tiled(&self) -> bool {
        self.cells_per_side.is_multiple_of(self.cluster_side)
    }

    pub fn index(&self, c: CellIndex) -> usize {
        c.y * self.cells_per_side + c.x
    }

    pub fn cell_at(&self, index: usize) -> CellIndex {
        CellIndex::new(index % self.cells_per_side, index / self.cells_per_side)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.num_cells()).map(|i| self.cell_at(i))
    }

    pub fn cell_of(&self, p: Point) -> CellIndex {
        let k = self.cells_per_side;
        // `as` saturates negatives and NaN to 0, so no floor call is needed.
        let f = |v: f64| ((v * k as f64) as usize).min(k - 1);
        CellIndex::new(f(p.x), f(p.y))
    }

    pub fn cell_of_index(&self, p: Point) -> usize {
        self.index(self.cell_of(p))
    }

    pub fn center(&self, c: CellIndex) -> Point {
        let s = self.side();
        Point::new((c.x as f64 + 0.5) * s, (c.y as f64 + 0.5) * s)
    }

    /// Axis-aligned rectangle `(x0, y0, x1, y1)` covered by a cell.
    pub fn rect(&self, c: CellIndex) -> (f64, f64, f64, f64) {
        let s = self.side();
        (c.x as f64 * s, c.y as f64 * s, (c.x + 1) as f64 * s, (c.y + 1) as f64 * s)
    }

    /// Intra-frame TDMA slot of a cell (row-major within its cluster).
    pub fn tdma_slot(&self, c: CellIndex) -> usize {
        (c.y % self.cluster_side) * self.cluster_side + c.x % self.cluster_side
    }

    /// Cells active in intra-frame slot `slot`, one per (possibly partial)
    /// cluster.
    pub fn active_cells(&self, slot: usize) -> Vec<CellIndex> {
        let cs = self.cluster_side;
        let slot = slot % (cs * cs);
        let (ox, oy) = (slot % cs, slot / cs);
        let mut out = Vec::new();
        let mut y = oy;
        while y < self.cells_per_side {
            let mut x = ox;
            while x < self.cells_per_side {
                out.push(CellIndex::new(x, y));
                x += cs;
            }
            y += cs;
        }
        out
    }

    /// Cells whose index range overlaps the open rectangle, used for
    /// mapping areas onto this grid. Errs on the inclusive side.
    pub fn cells_overlapping(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<CellIndex> {
        let k = self.cells_per_side as f64;
        let lo = |a: f64| (((a * k) - 1.0 - 1e-9).floor() + 1.0).max(0.0) as usize;
        let hi = |b: f64| {
            let v = ((b * k) + 1e-9).ceil() - 1.0;
            (v.max(-1.0) as i64).min(self.cells_per_side as i64 - 1)
        };
        let (xa, xb) = (lo(x0), hi(x1));
        let (ya, yb) = (lo(y0), hi(y1));
        let mut out = Vec::new();
        if xb < 0 || yb < 0 {
            return out;
        }
        for y in ya..=(yb as usize) {
            for x in xa..=(xb as usize) {
                out.push(CellIndex::new(x, y));
            }
        }
        out
    }
}

/// Coordinate-wise addition modulo the grid side.
pub fn torus_step(cell: CellIndex, offset: (i64, i64), grid: &GridSpec) -> CellIndex {
    let k = grid.cells_per_side as i64;
    CellIndex::new(
        (cell.x as i64 + offset.0).rem_euclid(k) as usize,
        (cell.y as i64 + offset.1).rem_euclid(k) as usize,
    )
}

/// The eight non-zero offsets of the king's move.
pub const NEIGHBOR_OFFSETS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    Preservation,
    Collection,
}

/// A 3x3 block of primary cells plus a one-secondary-cell guard ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub center: CellIndex,
    /// Primary cells of the block. Exactly nine on tiled grids (wrapping at
    /// the edges); clipped to the unit square otherwise.
    pub primary_cells: Vec<CellIndex>,
    /// Width of the guard ring (one secondary cell side).
    pub guard_width: f64,
}

impl Region {
    fn new(kind: RegionKind, center: CellIndex, primary: &GridSpec, guard_width: f64) -> Self {
        Self {
            kind,
            center,
            primary_cells: block_cells(center, primary),
            guard_width,
        }
    }

    pub fn contains_primary(&self, c: CellIndex) -> bool {
        self.primary_cells.contains(&c)
    }

    /// Secondary cells touching the block or its guard ring.
    pub fn secondary_cover(&self, primary: &GridSpec, secondary: &GridSpec) -> Vec<CellIndex> {
        let g = self.guard_width;
        let mut out: Vec<CellIndex> = self
            .primary_cells
            .iter()
            .flat_map(|&c| {
                let (x0, y0, x1, y1) = primary.rect(c);
                secondary.cells_overlapping(x0 - g, y0 - g, x1 + g, y1 + g)
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// True if the point lies in the block or the guard ring.
    pub fn contains_point(&self, p: Point, primary: &GridSpec) -> bool {
        let g = self.guard_width;
        self.primary_cells.iter().any(|&c| {
            let (x0, y0, x1, y1) = primary.rect(c);
            p.x > x0 - g && p.x < x1 + g && p.y > y0 - g && p.y < y1 + g
        })
    }
}

/// The 3x3 block of cells around `center`: torus-wrapped on tiled grids,
/// clipped to the square otherwise.
pub fn block_cells(center: CellIndex, grid: &GridSpec) -> Vec<CellIndex> {
    if grid.is_tiled() {
        let mut v: Vec<CellIndex> = [(0, 0)]
            .iter()
            .chain(NEIGHBOR_OFFSETS.iter())
            .map(|&o| torus_step(center, o, grid))
            .collect();
        v.sort();
        v.dedup();
        v
    } else {
        physical_block(center, grid)
    }
}

/// The 3x3 block clipped to the unit square (no wraparound).
pub fn physical_block(center: CellIndex, grid: &GridSpec) -> Vec<CellIndex> {
    let k = grid.cells_per_side as i64;
    let mut v = Vec::with_capacity(9);
    for dy in -1..=1i64 {
        for dx in -1..=1i64 {
            let x = center.x as i64 + dx;
            let y = center.y as i64 + dy;
            if (0..k).contains(&x) && (0..k).contains(&y) {
                v.push(CellIndex::new(x as usize, y as usize));
            }
        }
    }
    v
}

/// Preservation and collection regions for one primary slot.
///
/// Each active cell gets a preservation region. Collection regions sit half
/// a cluster away horizontally: `(x + cluster_side/2) mod side` on tiled
/// grids; on untiled grids every in-range cell at `x ± cluster_side/2` is
/// used, so that each cell is a sink exactly once per frame.
pub fn regions_for_slot(
    active: &[CellIndex],
    primary: &GridSpec,
    secondary: &GridSpec,
) -> Result<Vec<Region>> {
    if primary.cluster_side != CLUSTER_SIDE || primary.cells_per_side < CLUSTER_SIDE {
        return Err(Error::Config(format!(
            "regions need at least {CLUSTER_SIDE} primary cells per side with {CLUSTER_SIDE}-cell clusters (got {} / {})",
            primary.cells_per_side, primary.cluster_side
        )));
    }
    let guard = secondary.side();
    let half = (primary.cluster_side / 2) as i64;
    let mut regions: Vec<Region> = active
        .iter()
        .map(|&c| Region::new(RegionKind::Preservation, c, primary, guard))
        .collect();
    let mut sinks: Vec<CellIndex> = Vec::new();
    for &a in active {
        if primary.is_tiled() {
            sinks.push(torus_step(a, (half, 0), primary));
        } else {
            let k = primary.cells_per_side as i64;
            for dx in [half, -half] {
                let x = a.x as i64 + dx;
                if (0..k).contains(&x) {
                    sinks.push(CellIndex::new(x as usize, a.y));
                }
            }
        }
    }
    sinks.sort();
    sinks.dedup();
    regions.extend(
        sinks
            .into_iter()
            .map(|c| Region::new(RegionKind::Collection, c, primary, guard)),
    );
    Ok(regions)
}

/// Regions of every intra-frame slot, computed once per run.
#[derive(Debug, Clone)]
pub struct FrameRegions {
    pub primary: GridSpec,
    pub secondary: GridSpec,
    pub active: Vec<Vec<CellIndex>>,
    pub preservation: Vec<Vec<Region>>,
    pub collection: Vec<Vec<Region>>,
}

impl FrameRegions {
    pub fn new(primary: &GridSpec, secondary: &GridSpec) -> Result<Self> {
        let mut active = Vec::with_capacity(FRAME_SLOTS);
        let mut preservation = Vec::with_capacity(FRAME_SLOTS);
        let mut collection = Vec::with_capacity(FRAME_SLOTS);
        for s in 0..FRAME_SLOTS {
            let act = primary.active_cells(s);
            let regs = regions_for_slot(&act, primary, secondary)?;
            let (p, c): (Vec<_>, Vec<_>) = regs
                .into_iter()
                .partition(|r| r.kind == RegionKind::Preservation);
            active.push(act);
            preservation.push(p);
            collection.push(c);
        }
        Ok(Self {
            primary: *primary,
            secondary: *secondary,
            active,
            preservation,
            collection,
        })
    }

    pub fn sinks(&self, slot: usize) -> impl Iterator<Item = CellIndex> + '_ {
        self.collection[slot % FRAME_SLOTS].iter().map(|r| r.center)
    }

    /// Per secondary cell, a bitmask over intra-frame slots in which the cell
    /// touches a preservation region.
    pub fn preservation_masks(&self) -> Vec<u64> {
        self.masks(&self.preservation)
    }

    pub fn collection_masks(&self) -> Vec<u64> {
        self.masks(&self.collection)
    }

    fn masks(&self, regions: &[Vec<Region>]) -> Vec<u64> {
        let mut m = vec![0u64; self.secondary.num_cells()];
        for (s, regs) in regions.iter().enumerate() {
            for r in regs {
                for c in r.secondary_cover(&self.primary, &self.secondary) {
                    m[self.secondary.index(c)] |= 1u64 << s;
                }
            }
        }
        m
    }

    /// Per primary cell, bitmask of slots in which the cell belongs to a
    /// preservation (resp. collection) block.
    pub fn primary_masks(&self) -> (Vec<u64>, Vec<u64>) {
        let n = self.primary.num_cells();
        let (mut pm, mut cm) = (vec![0u64; n], vec![0u64; n]);
        for s in 0..FRAME_SLOTS {
            for r in &self.preservation[s] {
                for &c in &r.primary_cells {
                    pm[self.primary.index(c)] |= 1u64 << s;
                }
            }
            for r in &self.collection[s] {
                for &c in &r.primary_cells {
                    cm[self.primary.index(c)] |= 1u64 << s;
                }
            }
        }
        (pm, cm)
    }

    /// Intra-frame slot in which each primary cell is a sink.
    pub fn sink_slot_of(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.primary.num_cells()];
        for s in 0..FRAME_SLOTS {
            for c in self.sinks(s) {
                out[self.primary.index(c)] = s;
            }
        }
        out
    }
}
