use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{reduce, wrap};

/// Vertical lines `{s} × T` on the 2-torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalLines {
    abscissae: Vec<f64>,
}

impl VerticalLines {
    pub fn new(abscissae: Vec<f64>) -> Result<Self> {
        if abscissae.is_empty() {
            return Err(Error::InvalidParameter("need at least one vertical line".into()));
        }
        let mut s: Vec<f64> = abscissae.into_iter().map(reduce).collect();
        s.sort_by(f64::total_cmp);
        if s.windows(2).any(|w| w[1] - w[0] < 1e-12) {
            return Err(Error::InvalidParameter("vertical lines must be distinct".into()));
        }
        Ok(Self { abscissae: s })
    }

    /// Lines at `2πj/N`, `j = 1..N`.
    pub fn equispaced(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|j| TAU * j as f64 / n as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    /// Sorted abscissae in `[0, 2π)`.
    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    /// Strip `k` is the interval `[s_k, s_{k+1}]` (the last one wraps).
    pub fn strip(&self, k: usize) -> (f64, f64) {
        let n = self.len();
        let a = self.abscissae[k];
        let b = if k + 1 < n { self.abscissae[k + 1] } else { self.abscissae[0] + TAU };
        (a, b)
    }

    /// Strip containing abscissa `x` (canonical representative).
    pub fn strip_of(&self, x: f64) -> usize {
        let x = reduce(x);
        let s = &self.abscissae;
        match s.iter().rposition(|&a| a <= x) {
            Some(k) => k,
            None => s.len() - 1,
        }
    }

    pub fn min_width(&self) -> f64 {
        (0..self.len())
            .map(|k| {
                let (a, b) = self.strip(k);
                b - a
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallPacking {
    pub n: usize,
    pub lines: VerticalLines,
    pub balls: Vec<Ball>,
    /// Margin index `M`: every ball keeps distance `2/M` from the lines.
    pub margin: u64,
    /// Ball indices per strip.
    pub strips: Vec<Vec<usize>>,
    pub max_radius: f64,
    pub total_area: f64,
    pub uncovered_area: f64,
}

impl BallPacking {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn strip_of_ball(&self, l: usize) -> usize {
        self.strips.iter().position(|s| s.binary_search(&l).is_ok()).unwrap_or(0)
    }

    /// Spatial index over the balls.
    pub fn index(&self) -> BallIndex {
        BallIndex::build(&self.balls, self.max_radius)
    }
}

/// Uniform bucket grid on the torus; cells are at least one max diameter wide.
#[derive(Debug, Clone)]
pub struct BallIndex {
    cells: usize,
    size: f64,
    buckets: Vec<Vec<u32>>,
}

impl BallIndex {
    fn empty(max_radius: f64) -> Self {
        let cells = ((TAU / (2.0 * max_radius)).floor() as usize).clamp(1, 4096);
        Self { cells, size: TAU / cells as f64, buckets: vec![Vec::new(); cells * cells] }
    }

    fn build(balls: &[Ball], max_radius: f64) -> Self {
        let mut ix = Self::empty(max_radius.max(1e-12));
        for (i, b) in balls.iter().enumerate() {
            ix.insert(i as u32, b.center);
        }
        ix
    }

    fn cell(&self, x: f64) -> usize {
        ((reduce(x) / self.size) as usize).min(self.cells - 1)
    }

    fn insert(&mut self, id: u32, c: [f64; 2]) {
        let k = self.cell(c[0]) * self.cells + self.cell(c[1]);
        self.buckets[k].push(id);
    }

    /// Calls `f` with candidate ball ids near `p`.
    pub fn for_each_near(&self, p: [f64; 2], mut f: impl FnMut(usize)) {
        let (i, j) = (self.cell(p[0]) as isize, self.cell(p[1]) as isize);
        let n = self.cells as isize;
        let span: &[isize] = if self.cells >= 3 { &[-1, 0, 1] } else { &[0] };
        let all: Vec<isize> = (0..n).collect();
        let (ri, rj) = if self.cells >= 3 { (span, span) } else { (&all[..], &all[..]) };
        for di in ri {
            for dj in rj {
                let a = if self.cells >= 3 { (i + di).rem_euclid(n) } else { *di };
                let b = if self.cells >= 3 { (j + dj).rem_euclid(n) } else { *dj };
                for &id in &self.buckets[(a * n + b) as usize] {
                    f(id as usize);
                }
            }
        }
    }

    /// Index of the ball containing `p`, if any.
    pub fn locate(&self, balls: &[Ball], p: [f64; 2]) -> Option<usize> {
        let mut hit = None;
        self.for_each_near(p, |id| {
            if hit.is_none() {
                let b = &balls[id];
                let d0 = wrap(p[0] - b.center[0]);
                let d1 = wrap(p[1] - b.center[1]);
                if d0 * d0 + d1 * d1 < b.radius * b.radius {
                    hit = Some(id);
                }
            }
        });
        hit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingOptions {
    /// Gap disks at least this fraction of the lattice radius are always added.
    pub fill_ratio: f64,
    /// Target uncovered area is `budget_scale · 4π²/n`.
    pub budget_scale: f64,
    /// Hard cap on the number of disks.
    pub max_balls: usize,
}

impl Default for PackingOptions {
    fn default() -> Self {
        Self { fill_ratio: 0.125, budget_scale: 0.5, max_balls: 8_000_000 }
    }
}

/// Relative shrink applied to every disk so closed disks stay disjoint.
const SHRINK: f64 = 1e-9;

pub fn pack_balls(n: usize, lines: &VerticalLines) -> Result<BallPacking> {
    pack_balls_with(n, lines, PackingOptions::default())
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Circle {
        x: f64,
        y: f64,
        r: f64,
    },
    /// Vertical line `x = at`; `side = 1` keeps disks to its right.
    Line {
        at: f64,
        side: f64,
    },
}

#[derive(Debug, Clone, Copy)]
struct Gap {
    shapes: [Shape; 3],
    cand: (f64, f64, f64),
    seq: u64,
}

impl PartialEq for Gap {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Gap {}
impl PartialOrd for Gap {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Gap {
    fn cmp(&self, o: &Self) -> Ordering {
        self.cand.2.total_cmp(&o.cand.2).then_with(|| o.seq.cmp(&self.seq))
    }
}

/// Smallest positive root of `a ρ² + b ρ + c = 0`.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let roots: Vec<f64> = if a.abs() < 1e-14 * (b.abs() + c.abs()) {
        if b == 0.0 {
            vec![]
        } else {
            vec![-c / b]
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // stable pair of roots
        let q = -0.5 * (b + b.signum() * sq);
        let mut v = vec![];
        if q != 0.0 {
            v.push(q / a);
            v.push(c / q);
        } else {
            v.push(0.0);
        }
        v
    };
    roots.into_iter().filter(|&r| r > 0.0 && r.is_finite()).min_by(f64::total_cmp)
}

/// Circle externally tangent to three shapes (at most one line).
fn apollonius(s: &[Shape; 3]) -> Option<(f64, f64, f64)> {
    let mut circles = vec![];
    let mut line = None;
    for sh in s {
        match *sh {
            Shape::Circle { x, y, r } => circles.push((x, y, r)),
            Shape::Line { at, side } => line = Some((at, side)),
        }
    }
    match (circles.len(), line) {
        (3, None) => {
            let (x1, y1, r1) = circles[0];
            // work relative to the first circle
            let rel: Vec<(f64, f64, f64)> = circles[1..].iter().map(|&(x, y, r)| (x - x1, y - y1, r)).collect();
            // (c_i)·p + (r_i - r1) ρ = (|c_i|² - r_i² + r1²)/2
            let (a11, a12, b1r, b10) = (
                rel[0].0,
                rel[0].1,
                r1 - rel[0].2,
                0.5 * (rel[0].0.powi(2) + rel[0].1.powi(2) - rel[0].2.powi(2) + r1 * r1),
            );
            let (a21, a22, b2r, b20) = (
                rel[1].0,
                rel[1].1,
                r1 - rel[1].2,
                0.5 * (rel[1].0.powi(2) + rel[1].1.powi(2) - rel[1].2.powi(2) + r1 * r1),
            );
            let det = a11 * a22 - a12 * a21;
            if det.abs() < 1e-300 {
                return None;
            }
            // p = P0 + ρ P1
            let p0 = ((b10 * a22 - a12 * b20) / det, (a11 * b20 - b10 * a21) / det);
            let p1 = ((b1r * a22 - a12 * b2r) / det, (a11 * b2r - b1r * a21) / det);
            let a = p1.0 * p1.0 + p1.1 * p1.1 - 1.0;
            let b = 2.0 * (p0.0 * p1.0 + p0.1 * p1.1 - r1);
            let c = p0.0 * p0.0 + p0.1 * p0.1 - r1 * r1;
            let rho = smallest_positive_root(a, b, c)?;
            Some((x1 + p0.0 + rho * p1.0, y1 + p0.1 + rho * p1.1, rho))
        }
        (2, Some((at, side))) => {
            let (x1, y1, r1) = circles[0];
            let (x2, y2, r2) = circles[1];
            // x = at + side ρ; relative to circle 1
            let ex = at - x1;
            let (dx, dy) = (x2 - x1, y2 - y1);
            if dy.abs() < 1e-300 {
                return None;
            }
            // |p - c2|² - |p - c1|² = (ρ + r2)² - (ρ + r1)² with p relative to c1:
            // -2 dx X - 2 dy Y + dx² + dy² = 2ρ(r2 - r1) + r2² - r1²,  X = ex + side ρ
            let k0 = (dx * dx + dy * dy - r2 * r2 + r1 * r1 - 2.0 * dx * ex) / (2.0 * dy);
            let k1 = (-2.0 * dx * side - 2.0 * (r2 - r1)) / (2.0 * dy);
            // Y = k0 + k1 ρ;  X² + Y² = (ρ + r1)²
            let a = 1.0 + k1 * k1 - 1.0;
            let b = 2.0 * ex * side + 2.0 * k0 * k1 - 2.0 * r1;
            let c = ex * ex + k0 * k0 - r1 * r1;
            let rho = smallest_positive_root(a, b, c)?;
            Some((x1 + ex + side * rho, y1 + k0 + k1 * rho, rho))
        }
        _ => None,
    }
}

struct Builder {
    balls: Vec<Ball>,
    index: BallIndex,
    area: f64,
    r_max: f64,
}

impl Builder {
    fn clearance(&self, x: f64, y: f64, mut limit: f64) -> f64 {
        self.index.for_each_near([x, y], |id| {
            let b = &self.balls[id];
            let d0 = wrap(x - b.center[0]);
            let d1 = wrap(y - b.center[1]);
            let gap = (d0 * d0 + d1 * d1).sqrt() - b.radius;
            if gap < limit {
                limit = gap;
            }
        });
        limit
    }

    fn push(&mut self, x: f64, y: f64, r: f64) {
        let c = [reduce(x), reduce(y)];
        self.index.insert(self.balls.len() as u32, c);
        self.balls.push(Ball { center: c, radius: r });
        self.area += PI * r * r;
    }
}

/// Packs disjoint disks of radius `≤ 1/n` covering all but `4π²/n` of the
/// torus, keeping a margin `2/M` from every line.
pub fn pack_balls_with(n: usize, lines: &VerticalLines, opts: PackingOptions) -> Result<BallPacking> {
    if n == 0 {
        return Err(Error::InvalidParameter("stage n must be at least 1".into()));
    }
    let torus_area = TAU * TAU;
    let target = opts.budget_scale * torus_area / n as f64;
    let r_cap = 1.0 / n as f64;
    let nl = lines.len() as f64;
    let width = lines.min_width();
    // margin: band area 8πN/M within a quarter of the budget, 2/M < width/4
    let need = (32.0 * PI * nl / target).max(8.0 / width * (1.0 + 1e-12));
    let mut margin: u64 = 2;
    while (margin as f64) <= need {
        margin *= 2;
        if margin > 1 << 40 {
            return Err(Error::Packing("margin index overflow".into()));
        }
    }
    let g = 2.0 / margin as f64;
    if width <= 8.0 / margin as f64 {
        return Err(Error::Packing(format!("strips of width {width} too thin for margin 2/{margin}")));
    }
    let k_row = (PI / r_cap).ceil().max(1.0) as usize;
    let spacing = TAU / k_row as f64;
    let mut r0 = 0.5 * spacing;
    let band_min = width - 2.0 * g;
    if band_min < 2.0 * r0 {
        r0 = 0.5 * band_min;
    }
    let r0 = r0 * (1.0 - SHRINK);
    let mut b = Builder { balls: vec![], index: BallIndex::empty(r0), area: 0.0, r_max: r0 };
    // one heap per strip so that each strip meets its own share of the
    // target and congruent strips get congruent packings
    let mut heaps: Vec<(BinaryHeap<Gap>, u64)> = vec![(BinaryHeap::new(), 0); lines.len()];
    let push_gap = |(heap, seq): &mut (BinaryHeap<Gap>, u64), shapes: [Shape; 3]| {
        if let Some(cand) = apollonius(&shapes) {
            heap.push(Gap { shapes, cand, seq: *seq });
            *seq += 1;
        }
    };
    let mut strip_area = vec![0.0; lines.len()];
    for k in 0..lines.len() {
        let heap = &mut heaps[k];
        let (a, bnd) = lines.strip(k);
        let lo = a + g;
        let hi = bnd - g;
        let w = hi - lo;
        let h_hex = spacing * 3f64.sqrt() / 2.0;
        let mut rows = if w < 2.0 * r0 { 0 } else { ((w - 2.0 * r0) / h_hex).floor() as usize + 1 };
        if rows > 1 && rows % 2 == 0 {
            rows -= 1;
        }
        if rows == 0 {
            return Err(Error::Packing(format!("strip {k} cannot hold a disk")));
        }
        let h = if rows > 1 { (w - 2.0 * r0) / (rows - 1) as f64 } else { 0.0 };
        let xs: Vec<f64> =
            (0..rows).map(|i| if rows == 1 { 0.5 * (lo + hi) } else { lo + r0 + i as f64 * h }).collect();
        let offset = |i: usize| if i % 2 == 1 { 0.5 * spacing } else { 0.0 };
        for (i, &x) in xs.iter().enumerate() {
            for q in 0..k_row {
                b.push(x, offset(i) + q as f64 * spacing, r0);
                strip_area[k] += PI * r0 * r0;
            }
        }
        let circ = |i: usize, q: isize| Shape::Circle { x: xs[i], y: offset(i) + q as f64 * spacing, r: r0 };
        for q in 0..k_row as isize {
            // edge gaps against the margins
            push_gap(heap, [Shape::Line { at: lo, side: 1.0 }, circ(0, q), circ(0, q + 1)]);
            let last = rows - 1;
            push_gap(heap, [Shape::Line { at: hi, side: -1.0 }, circ(last, q), circ(last, q + 1)]);
            for i in 0..rows.saturating_sub(1) {
                // triangles between rows i and i+1
                let (even, odd) = if i % 2 == 0 { (i, i + 1) } else { (i + 1, i) };
                push_gap(heap, [circ(even, q), circ(even, q + 1), circ(odd, q)]);
                push_gap(heap, [circ(odd, q - 1), circ(odd, q), circ(even, q)]);
            }
        }
    }
    let keep_ratio = opts.fill_ratio * r0;
    let floor = r0 * 1e-5;
    for (k, heap) in heaps.iter_mut().enumerate() {
        let (a, bnd) = lines.strip(k);
        let full = TAU * (bnd - a);
        let share = target * (bnd - a) / TAU;
        while let Some(gap) = heap.0.pop() {
            let (x, y, cand) = gap.cand;
            let done = full - strip_area[k] <= share;
            if (done && cand < keep_ratio) || cand < floor {
                break;
            }
            if b.balls.len() >= opts.max_balls {
                break;
            }
            let xr = if reduce(x) < a { reduce(x) + TAU } else { reduce(x) };
            let edge = (xr - (a + g)).min(bnd - g - xr);
            let r = b.clearance(x, y, cand).min(edge).min(cand) * (1.0 - SHRINK);
            if r < floor {
                continue;
            }
            b.push(x, y, r);
            strip_area[k] += PI * r * r;
            let new = Shape::Circle { x, y, r };
            let [s0, s1, s2] = gap.shapes;
            push_gap(heap, [s0, s1, new]);
            push_gap(heap, [s1, s2, new]);
            push_gap(heap, [s0, s2, new]);
        }
    }
    let uncovered = torus_area - b.area;
    if uncovered > target {
        return Err(Error::Packing(format!(
            "uncovered area {uncovered:.4} exceeds target {target:.4} after {} disks",
            b.balls.len()
        )));
    }
    let mut strips = vec![Vec::new(); lines.len()];
    for (l, ball) in b.balls.iter().enumerate() {
        strips[lines.strip_of(ball.center[0])].push(l);
    }
    Ok(BallPacking {
        n,
        lines: lines.clone(),
        max_radius: b.r_max,
        total_area: b.area,
        uncovered_area: uncovered,
        balls: b.balls,
        margin,
        strips,
    })
}
