//! Initial resource placements: clustered, powerlaw and uniform random.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::geom::{Arena, Vec2};
use crate::rng::RngStreams;
use crate::Error;

/// Resources keep at least this distance from every wall.
pub const WALL_MARGIN: f64 = 0.1;
/// Spacing of the cluster-local grid (half the pickup radius).
pub const GRID_PITCH: f64 = 0.15;
/// Minimum Chebyshev gap between two cluster footprints.
pub const CLUSTER_GAP: f64 = 0.4;
pub const DEFAULT_MIN_SPACING: f64 = 0.05;
const ATTEMPTS_PER_ITEM: usize = 10_000;
const LAYOUT_RESTARTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Clustered,
    Powerlaw,
    Random,
}

impl Distribution {
    pub const ALL: [Distribution; 3] =
        [Distribution::Clustered, Distribution::Powerlaw, Distribution::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Distribution::Clustered => "clustered",
            Distribution::Powerlaw => "powerlaw",
            Distribution::Random => "random",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "clustered" => Ok(Distribution::Clustered),
            "powerlaw" => Ok(Distribution::Powerlaw),
            "random" => Ok(Distribution::Random),
            other => Err(Error::Spec(format!("unknown distribution `{other}`"))),
        }
    }
}

/// One tier of a cluster schedule: `count` clusters of `size` resources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleTier {
    pub size: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClusterSchedule {
    pub tiers: Vec<ScheduleTier>,
}

impl ClusterSchedule {
    pub fn total(&self) -> usize {
        self.tiers.iter().map(|t| t.size * t.count).sum()
    }

    /// All cluster sizes, largest first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .tiers
            .iter()
            .flat_map(|t| std::iter::repeat_n(t.size, t.count))
            .collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    }
}

impl fmt::Display for ClusterSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.tiers.iter().map(|t| format!("{}x{}", t.count, t.size)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Rank schedule for the powerlaw layout.
///
/// Cluster sizes are `base^r` for ranks `r = 0..ranks`. Each rank is budgeted
/// an equal share of the resources; a rank whose cluster size exceeds its
/// budget passes the budget down to the next rank, and rank 0 (singletons)
/// absorbs whatever is left. For 256 resources this gives the classic
/// `{1x64, 4x16, 16x4, 64x1}` mixture.
pub fn powerlaw_schedule(count: usize, ranks: u32, base: usize) -> Result<ClusterSchedule, Error> {
    if ranks == 0 || base < 2 {
        return Err(Error::Spec(format!("invalid powerlaw schedule ranks={ranks} base={base}")));
    }
    let share = count / ranks as usize;
    let mut leftover = count - share * ranks as usize;
    let mut carry = 0usize;
    let mut tiers = Vec::new();
    for r in (0..ranks).rev() {
        let size = base.pow(r);
        let mut budget = share + carry;
        if r == 0 {
            budget += leftover;
            leftover = 0;
        }
        let n = budget / size;
        carry = budget - n * size;
        if n > 0 {
            tiers.push(ScheduleTier { size, count: n });
        }
    }
    debug_assert_eq!(carry, 0);
    debug_assert_eq!(leftover, 0);
    Ok(ClusterSchedule { tiers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub distribution: Distribution,
    pub resource_count: usize,
    pub arena: Arena,
    pub seed: u64,
    pub min_spacing: f64,
    pub exclusion_radius: f64,
    pub powerlaw_ranks: u32,
    pub powerlaw_base: usize,
    /// Replaces the solver's powerlaw schedule when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_override: Option<ClusterSchedule>,
}

impl LayoutSpec {
    pub fn new(distribution: Distribution, resource_count: usize, arena: Arena, seed: u64) -> Self {
        Self {
            distribution,
            resource_count,
            arena,
            seed,
            min_spacing: DEFAULT_MIN_SPACING,
            exclusion_radius: arena.center_zone_radius + 0.3,
            powerlaw_ranks: 4,
            powerlaw_base: 4,
            schedule_override: None,
        }
    }

    /// The cluster schedule this spec resolves to (clustered and powerlaw only).
    pub fn schedule(&self) -> Result<ClusterSchedule, Error> {
        match self.distribution {
            Distribution::Clustered => {
                if !self.resource_count.is_multiple_of(4) {
                    return Err(Error::Spec(format!(
                        "clustered layout needs a count divisible by 4, got {}",
                        self.resource_count
                    )));
                }
                let size = self.resource_count / 4;
                let tiers = if size == 0 {
                    vec![]
                } else {
                    vec![ScheduleTier { size, count: 4 }]
                };
                Ok(ClusterSchedule { tiers })
            }
            Distribution::Powerlaw => {
                let schedule = match &self.schedule_override {
                    Some(s) => s.clone(),
                    None => powerlaw_schedule(
                        self.resource_count,
                        self.powerlaw_ranks,
                        self.powerlaw_base,
                    )?,
                };
                if schedule.total() != self.resource_count {
                    return Err(Error::Spec(format!(
                        "schedule {schedule} sums to {} but {} resources requested",
                        schedule.total(),
                        self.resource_count
                    )));
                }
                Ok(schedule)
            }
            Distribution::Random => Err(Error::Spec("random layouts have no cluster schedule".into())),
        }
    }

    fn check(&self) -> Result<(), Error> {
        if self.exclusion_radius < self.arena.center_zone_radius {
            return Err(Error::Spec("exclusion radius smaller than the collection zone".into()));
        }
        if self.arena.center_zone_radius >= self.arena.half_width {
            return Err(Error::Spec("collection zone does not fit in the arena".into()));
        }
        Ok(())
    }
}

/// Uniform grid over the arena for radius queries on resources.
#[derive(Debug, Clone)]
struct SpatialIndex {
    origin: Vec2,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl SpatialIndex {
    fn build(arena: &Arena, positions: &[Vec2], cell: f64) -> Self {
        let cols = ((arena.half_width * 2.0) / cell).ceil().max(1.0) as usize;
        let rows = ((arena.half_height * 2.0) / cell).ceil().max(1.0) as usize;
        let mut idx = Self {
            origin: Vec2::new(-arena.half_width, -arena.half_height),
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        };
        for (i, p) in positions.iter().enumerate() {
            let (c, r) = idx.cell_of(*p);
            idx.buckets[r * cols + c].push(i);
        }
        idx
    }

    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let c = ((p.x - self.origin.x) / self.cell).floor().max(0.0) as usize;
        let r = ((p.y - self.origin.y) / self.cell).floor().max(0.0) as usize;
        (c.min(self.cols - 1), r.min(self.rows - 1))
    }

    fn candidates(&self, p: Vec2, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let (c0, r0) = self.cell_of(p - Vec2::new(radius, radius));
        let (c1, r1) = self.cell_of(p + Vec2::new(radius, radius));
        (r0..=r1).flat_map(move |r| {
            (c0..=c1).flat_map(move |c| self.buckets[r * self.cols + c].iter().copied())
        })
    }
}

/// Resource positions plus their picked state.
#[derive(Debug, Clone)]
pub struct ResourceField {
    positions: Vec<Vec2>,
    picked: Vec<bool>,
    remaining: usize,
    index: SpatialIndex,
}

impl ResourceField {
    pub fn new(arena: &Arena, positions: Vec<Vec2>) -> Self {
        let index = SpatialIndex::build(arena, &positions, 0.5);
        let n = positions.len();
        Self {
            positions,
            picked: vec![false; n],
            remaining: n,
            index,
        }
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn picked(&self) -> &[bool] {
        &self.picked
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn count_unpicked_within(&self, p: Vec2, radius: f64) -> usize {
        let r2 = radius * radius;
        self.index
            .candidates(p, radius)
            .filter(|&i| !self.picked[i] && self.positions[i].dist_sq(p) <= r2)
            .count()
    }

    /// Index of the nearest unpicked resource within `radius`; ties go to the lower index.
    pub fn nearest_unpicked_within(&self, p: Vec2, radius: f64) -> Option<usize> {
        let r2 = radius * radius;
        self.index
            .candidates(p, radius)
            .filter(|&i| !self.picked[i])
            .map(|i| (i, self.positions[i].dist_sq(p)))
            .filter(|&(_, d)| d <= r2)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }

    /// Marks resource `i` picked; returns false if it already was.
    pub fn pick(&mut self, i: usize) -> bool {
        if self.picked[i] {
            return false;
        }
        self.picked[i] = true;
        self.remaining -= 1;
        true
    }
}

fn admissible_point(spec: &LayoutSpec, p: Vec2) -> bool {
    spec.arena.contains_with_margin(p, WALL_MARGIN) && p.norm() >= spec.exclusion_radius
}

fn uniform_in_box<R: Rng + ?Sized>(rng: &mut R, hx: f64, hy: f64) -> Vec2 {
    let x = if hx > 0.0 { rng.random_range(-hx..=hx) } else { 0.0 };
    let y = if hy > 0.0 { rng.random_range(-hy..=hy) } else { 0.0 };
    Vec2::new(x, y)
}

pub fn gen_random(spec: &LayoutSpec) -> Result<Vec<Vec2>, Error> {
    if spec.distribution != Distribution::Random {
        return Err(Error::Spec(format!("gen_random called with {}", spec.distribution)));
    }
    spec.check()?;
    let mut rng = RngStreams::new(spec.seed).layout();
    let hx = spec.arena.half_width - WALL_MARGIN;
    let hy = spec.arena.half_height - WALL_MARGIN;
    let min2 = spec.min_spacing * spec.min_spacing;
    let mut points: Vec<Vec2> = Vec::with_capacity(spec.resource_count);
    for k in 0..spec.resource_count {
        let mut placed = false;
        for _ in 0..ATTEMPTS_PER_ITEM {
            let p = uniform_in_box(&mut rng, hx, hy);
            if admissible_point(spec, p) && points.iter().all(|q| q.dist_sq(p) >= min2) {
                points.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Layout(format!(
                "could not place resource {k} of {} at spacing {}",
                spec.resource_count, spec.min_spacing
            )));
        }
    }
    Ok(points)
}

/// Offsets of a `size`-item cluster on a centered grid, filled row-major.
pub fn cluster_offsets(size: usize) -> Vec<Vec2> {
    if size == 0 {
        return vec![];
    }
    let cols = (size as f64).sqrt().ceil() as usize;
    let rows = size.div_ceil(cols);
    let cx = (cols - 1) as f64 / 2.0;
    let cy = (rows - 1) as f64 / 2.0;
    (0..size)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            Vec2::new((c as f64 - cx) * GRID_PITCH, (cy - r as f64) * GRID_PITCH)
        })
        .collect()
}

fn half_extent(size: usize) -> (f64, f64) {
    if size <= 1 {
        return (0.0, 0.0);
    }
    let cols = (size as f64).sqrt().ceil() as usize;
    let rows = size.div_ceil(cols);
    (
        (cols - 1) as f64 / 2.0 * GRID_PITCH,
        (rows - 1) as f64 / 2.0 * GRID_PITCH,
    )
}

#[derive(Clone, Copy)]
struct Footprint {
    center: Vec2,
    hx: f64,
    hy: f64,
}

impl Footprint {
    fn gap(&self, other: &Footprint) -> f64 {
        let gx = (self.center.x - other.center.x).abs() - (self.hx + other.hx);
        let gy = (self.center.y - other.center.y).abs() - (self.hy + other.hy);
        gx.max(gy)
    }

    fn min_radius(&self) -> f64 {
        let dx = (self.center.x.abs() - self.hx).max(0.0);
        let dy = (self.center.y.abs() - self.hy).max(0.0);
        dx.hypot(dy)
    }
}

fn place_clusters(spec: &LayoutSpec, sizes: &[usize]) -> Result<Vec<Vec2>, Error> {
    spec.check()?;
    let mut rng = RngStreams::new(spec.seed).layout();
    'restart: for _ in 0..LAYOUT_RESTARTS {
        let mut placed: Vec<Footprint> = Vec::with_capacity(sizes.len());
        for &size in sizes {
            let (hx, hy) = half_extent(size);
            let bx = spec.arena.half_width - WALL_MARGIN - hx;
            let by = spec.arena.half_height - WALL_MARGIN - hy;
            if bx < 0.0 || by < 0.0 {
                return Err(Error::Layout(format!("a {size}-cluster does not fit in the arena")));
            }
            let mut ok = None;
            for _ in 0..ATTEMPTS_PER_ITEM {
                let fp = Footprint {
                    center: uniform_in_box(&mut rng, bx, by),
                    hx,
                    hy,
                };
                if fp.min_radius() >= spec.exclusion_radius
                    && placed.iter().all(|q| q.gap(&fp) >= CLUSTER_GAP)
                {
                    ok = Some(fp);
                    break;
                }
            }
            match ok {
                Some(fp) => placed.push(fp),
                None => continue 'restart,
            }
        }
        let mut points = Vec::with_capacity(spec.resource_count);
        for (fp, &size) in placed.iter().zip(sizes) {
            points.extend(cluster_offsets(size).into_iter().map(|o| fp.center + o));
        }
        return Ok(points);
    }
    Err(Error::Layout(format!(
        "could not place {} clusters after {LAYOUT_RESTARTS} restarts",
        sizes.len()
    )))
}

pub fn gen_clustered(spec: &LayoutSpec) -> Result<Vec<Vec2>, Error> {
    if spec.distribution != Distribution::Clustered {
        return Err(Error::Spec(format!("gen_clustered called with {}", spec.distribution)));
    }
    let sizes = spec.schedule()?.sizes();
    place_clusters(spec, &sizes)
}

pub fn gen_powerlaw(spec: &LayoutSpec) -> Result<Vec<Vec2>, Error> {
    if spec.distribution != Distribution::Powerlaw {
        return Err(Error::Spec(format!("gen_powerlaw called with {}", spec.distribution)));
    }
    let sizes = spec.schedule()?.sizes();
    place_clusters(spec, &sizes)
}

/// Generates the positions for `spec`, dispatching on its distribution.
pub fn generate(spec: &LayoutSpec) -> Result<Vec<Vec2>, Error> {
    match spec.distribution {
        Distribution::Random => gen_random(spec),
        Distribution::Clustered => gen_clustered(spec),
        Distribution::Powerlaw => gen_powerlaw(spec),
    }
}

/// Layout file: a `#` header describing the spec, then one `x y` pair per line.
pub fn write_layout_file(spec: &LayoutSpec, positions: &[Vec2]) -> String {
    let mut out = format!(
        "# distribution={} count={} arena={} seed={} min_spacing={} exclusion_radius={}\n",
        spec.distribution,
        spec.resource_count,
        spec.arena.side(),
        spec.seed,
        spec.min_spacing,
        spec.exclusion_radius
    );
    if matches!(spec.distribution, Distribution::Clustered | Distribution::Powerlaw) {
        if let Ok(s) = spec.schedule() {
            out.push_str(&format!("# schedule={s}\n"));
        }
    }
    for p in positions {
        out.push_str(&format!("{} {}\n", p.x, p.y));
    }
    out
}

pub fn parse_layout_file(text: &str) -> Result<Vec<Vec2>, Error> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => points.push(Vec2::new(x, y)),
            _ => return Err(Error::Layout(format!("line {}: expected `x y`, got `{line}`", n + 1))),
        }
    }
    Ok(points)
}

/// Scatter data for plotting: the collection zone followed by every resource.
pub fn scatter_csv(spec: &LayoutSpec, positions: &[Vec2]) -> String {
    let mut out = String::from("kind,x,y,radius\n");
    out.push_str(&format!("center_zone,0,0,{}\n", spec.arena.center_zone_radius));
    for p in positions {
        out.push_str(&format!("resource,{},{},0\n", p.x, p.y));
    }
    out
}
