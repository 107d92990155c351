//! Lazily evaluated homeomorphism expressions.
//!
//! Operator constructions produce maps that are defined tile-by-tile
//! (conjugates of a core map along the orbit of a region).  Rather than
//! materialising those immediately, they are kept as expression trees and
//! evaluated pointwise under an explicit [`EvalBudget`]; [`compact`] turns an
//! expression back into a [`PLMap`] up to a requested tolerance.

use std::sync::Arc;

use crate::error::{HomeoError, Result};
use crate::homeo::interval::OpenSet;
use crate::homeo::plmap::{sanitize_monotone, Extension, PLMap};

/// Hard limits for pointwise evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalBudget {
    /// Maximum tile index `|k|` searched when locating a point in a tiled map.
    pub tile_depth: u32,
    /// Maximum exponent magnitude allowed in a `Power` node.
    pub power_depth: u32,
}

impl Default for EvalBudget {
    fn default() -> Self {
        EvalBudget { tile_depth: 64, power_depth: 64 }
    }
}

/// How a tiled map finds the tile index of a point.
#[derive(Clone)]
pub enum Locator {
    /// Scan `k = 0, 1, -1, 2, ...` testing `f^{-k}(x)` for membership in the
    /// base region, up to the tile-depth budget.
    Search,
    /// Tiles are translates of the base by multiples of the given period
    /// (the conjugator is that translation), so the index is computed
    /// directly.
    Translation(f64),
}

/// Per-tile map rule for a [`Node::Tiled`] expression.
#[derive(Clone)]
pub enum TileRule {
    /// The same core map on every tile.
    Constant(LazyHomeo),
    /// An arbitrary indexed family of core maps.
    Indexed(Arc<dyn Fn(i64) -> Result<LazyHomeo> + Send + Sync>),
}

impl TileRule {
    fn map(&self, k: i64) -> Result<LazyHomeo> {
        match self {
            TileRule::Constant(h) => Ok(h.clone()),
            TileRule::Indexed(f) => f(k),
        }
    }
}

/// A map defined as `f^k . m_k . f^{-k}` on the tile `f^k(base)` for each
/// `k`, and the identity off the tiles.
#[derive(Clone)]
pub struct TiledNode {
    /// The conjugator `f`.
    pub conjugator: LazyHomeo,
    /// The base region `I` (tile 0).
    pub base: OpenSet,
    /// Core map per tile index.
    pub rule: TileRule,
    pub locator: Locator,
    /// Optional region known to contain every tile with `k != 0`; points
    /// outside `base` and `hull` short-circuit to the identity.
    pub hull: Option<OpenSet>,
}

enum Node {
    Atom(PLMap),
    /// `Compose([f, g, ...])` applies the last factor first.
    Compose(Vec<LazyHomeo>),
    Inverse(LazyHomeo),
    Power(LazyHomeo, i64),
    Tiled(TiledNode),
}

/// A lazily evaluated increasing homeomorphism of the line.
#[derive(Clone)]
pub struct LazyHomeo {
    node: Arc<Node>,
    /// Declared translation period the map commutes with, if any.
    period: Option<f64>,
}

impl LazyHomeo {
    pub fn atom(map: PLMap) -> Self {
        let period = map.commuting_period();
        LazyHomeo { node: Arc::new(Node::Atom(map)), period }
    }

    /// Composition applying the last factor first.
    pub fn compose(factors: Vec<LazyHomeo>) -> Self {
        let period = factors
            .iter()
            .map(|f| f.period)
            .reduce(|a, b| match (a, b) {
                (Some(p), Some(q)) if (p - q).abs() < 1e-12 => Some(p),
                _ => None,
            })
            .flatten();
        LazyHomeo { node: Arc::new(Node::Compose(factors)), period }
    }

    pub fn inverse(&self) -> Self {
        LazyHomeo { node: Arc::new(Node::Inverse(self.clone())), period: self.period }
    }

    pub fn power(&self, n: i64) -> Self {
        LazyHomeo { node: Arc::new(Node::Power(self.clone(), n)), period: self.period }
    }

    pub fn tiled(node: TiledNode, period: Option<f64>) -> Self {
        LazyHomeo { node: Arc::new(Node::Tiled(node)), period }
    }

    /// Declares (without checking) that the map commutes with `x + p`.
    pub fn with_period(mut self, p: f64) -> Self {
        self.period = Some(p);
        self
    }

    pub fn declared_period(&self) -> Option<f64> {
        self.period
    }

    pub fn eval(&self, x: f64, budget: &EvalBudget) -> Result<f64> {
        self.eval_dir(x, budget, false)
    }

    pub fn eval_inv(&self, y: f64, budget: &EvalBudget) -> Result<f64> {
        self.eval_dir(y, budget, true)
    }

    fn eval_dir(&self, x: f64, budget: &EvalBudget, inv: bool) -> Result<f64> {
        match &*self.node {
            Node::Atom(m) => Ok(if inv { m.eval_inv(x) } else { m.eval(x) }),
            Node::Compose(fs) => {
                let mut y = x;
                if inv {
                    for f in fs {
                        y = f.eval_dir(y, budget, true)?;
                    }
                } else {
                    for f in fs.iter().rev() {
                        y = f.eval_dir(y, budget, false)?;
                    }
                }
                Ok(y)
            }
            Node::Inverse(f) => f.eval_dir(x, budget, !inv),
            Node::Power(f, n) => {
                if n.unsigned_abs() > budget.power_depth as u64 {
                    return Err(HomeoError::BudgetExhausted(format!(
                        "power exponent {n} exceeds budget {}",
                        budget.power_depth
                    )));
                }
                let reverse = (*n < 0) != inv;
                let mut y = x;
                for _ in 0..n.unsigned_abs() {
                    y = f.eval_dir(y, budget, reverse)?;
                }
                Ok(y)
            }
            Node::Tiled(t) => t.eval_dir(x, budget, inv),
        }
    }

    /// Best-effort collection of true breakpoints of the map inside
    /// `[lo, hi]`, thinned so consecutive points are at least `min_gap`
    /// apart at collection time.  Evaluation failures are ignored.
    pub fn harvest(&self, lo: f64, hi: f64, min_gap: f64, budget: &EvalBudget, out: &mut Vec<f64>) {
        self.harvest_dir(lo, hi, min_gap, budget, false, out, 0);
    }

    fn harvest_dir(
        &self,
        lo: f64,
        hi: f64,
        min_gap: f64,
        budget: &EvalBudget,
        inv: bool,
        out: &mut Vec<f64>,
        depth: u32,
    ) {
        if depth > 24 || hi <= lo {
            return;
        }
        match &*self.node {
            Node::Atom(m) => {
                let b = if inv { m.inverse().breakpoints_in(lo, hi) } else { m.breakpoints_in(lo, hi) };
                push_thinned(b, min_gap, out);
            }
            Node::Compose(fs) => {
                // Walk the factors in application order, pulling each
                // factor's breakpoints back through the prefix applied so far.
                let order: Vec<&LazyHomeo> = if inv { fs.iter().collect() } else { fs.iter().rev().collect() };
                let mut cur_lo = lo;
                let mut cur_hi = hi;
                let mut prefix: Vec<&LazyHomeo> = Vec::new();
                for f in order {
                    let mut local = Vec::new();
                    f.harvest_dir(cur_lo, cur_hi, min_gap, budget, inv, &mut local, depth + 1);
                    // Pull back through the already-applied prefix.
                    'pts: for p in local {
                        let mut x = p;
                        for g in prefix.iter().rev() {
                            match g.eval_dir(x, budget, !inv) {
                                Ok(v) => x = v,
                                Err(_) => continue 'pts,
                            }
                        }
                        if x >= lo && x <= hi {
                            out.push(x);
                        }
                    }
                    let (nlo, nhi) = match (f.eval_dir(cur_lo, budget, inv), f.eval_dir(cur_hi, budget, inv)) {
                        (Ok(a), Ok(b)) => (a, b),
                        _ => return,
                    };
                    prefix.push(f);
                    cur_lo = nlo;
                    cur_hi = nhi;
                }
            }
            Node::Inverse(f) => f.harvest_dir(lo, hi, min_gap, budget, !inv, out, depth + 1),
            Node::Power(f, n) => {
                if *n == 0 {
                    return;
                }
                let steps = n.unsigned_abs().min(12);
                let reverse = (*n < 0) != inv;
                let mut cur_lo = lo;
                let mut cur_hi = hi;
                let mut prefix = 0u64;
                for _ in 0..steps {
                    let mut local = Vec::new();
                    f.harvest_dir(cur_lo, cur_hi, min_gap, budget, reverse, &mut local, depth + 1);
                    'pts: for p in local {
                        let mut x = p;
                        for _ in 0..prefix {
                            match f.eval_dir(x, budget, !reverse) {
                                Ok(v) => x = v,
                                Err(_) => continue 'pts,
                            }
                        }
                        if x >= lo && x <= hi {
                            out.push(x);
                        }
                    }
                    let (nlo, nhi) = match (
                        f.eval_dir(cur_lo, budget, reverse),
                        f.eval_dir(cur_hi, budget, reverse),
                    ) {
                        (Ok(a), Ok(b)) => (a, b),
                        _ => return,
                    };
                    prefix += 1;
                    cur_lo = nlo;
                    cur_hi = nhi;
                }
            }
            Node::Tiled(t) => t.harvest(lo, hi, min_gap, budget, out, depth),
        }
    }
}

impl TiledNode {
    /// Finds the tile containing `x`, returning `(k, f^{-k}(x))`.
    fn locate(&self, x: f64, budget: &EvalBudget) -> Result<Option<(i64, f64)>> {
        if let Locator::Translation(p) = self.locator {
            let base0 = self.base.intervals()[0].0;
            let k = ((x - base0) / p).floor() as i64;
            let xr = x - k as f64 * p;
            return Ok(if self.base.contains(xr) { Some((k, xr)) } else { None });
        }
        if self.base.contains(x) {
            return Ok(Some((0, x)));
        }
        if let Some(h) = &self.hull {
            if !h.contains(x) {
                return Ok(None);
            }
        }
        let mut up = x;
        let mut down = x;
        for k in 1..=budget.tile_depth as i64 {
            up = self.conjugator.eval_inv(up, budget)?;
            if self.base.contains(up) {
                return Ok(Some((k, up)));
            }
            down = self.conjugator.eval(down, budget)?;
            if self.base.contains(down) {
                return Ok(Some((-k, down)));
            }
        }
        // Not found within the budget: the point is (numerically) outside
        // every resolvable tile, where the map is the identity.
        Ok(None)
    }

    fn eval_dir(&self, x: f64, budget: &EvalBudget, inv: bool) -> Result<f64> {
        let Some((k, x0)) = self.locate(x, budget)? else {
            return Ok(x);
        };
        let m = self.rule.map(k)?;
        let mut y = m.eval_dir(x0, budget, inv)?;
        if let Locator::Translation(p) = self.locator {
            return Ok(y + k as f64 * p);
        }
        for _ in 0..k.unsigned_abs() {
            y = if k > 0 {
                self.conjugator.eval(y, budget)?
            } else {
                self.conjugator.eval_inv(y, budget)?
            };
        }
        Ok(y)
    }

    fn harvest(&self, lo: f64, hi: f64, min_gap: f64, budget: &EvalBudget, out: &mut Vec<f64>, depth: u32) {
        // Materialise tiles while they are wider than the thinning gap.
        let kmax = budget.tile_depth as i64;
        for (a0, b0) in self.base.components_in(lo - 4.0, hi + 4.0) {
            out.push(a0);
            out.push(b0);
            for dir in [1i64, -1] {
                let mut a = a0;
                let mut b = b0;
                for step in 1..=kmax {
                    let k = dir * step;
                    let (na, nb) = if dir > 0 {
                        match (self.conjugator.eval(a, budget), self.conjugator.eval(b, budget)) {
                            (Ok(x), Ok(y)) => (x, y),
                            _ => break,
                        }
                    } else {
                        match (self.conjugator.eval_inv(a, budget), self.conjugator.eval_inv(b, budget)) {
                            (Ok(x), Ok(y)) => (x, y),
                            _ => break,
                        }
                    };
                    a = na;
                    b = nb;
                    if b - a < min_gap {
                        break;
                    }
                    if b < lo || a > hi {
                        // The tile may re-enter the window for translation
                        // locators only; for search locators tiles shrink
                        // into the hull, so keep scanning a little.
                        if step > 4 {
                            break;
                        }
                        continue;
                    }
                    out.push(a);
                    out.push(b);
                    if let Ok(m) = self.rule.map(k) {
                        let mut local = Vec::new();
                        let (m_lo, m_hi) = match (
                            inverse_along(self, a, k, budget),
                            inverse_along(self, b, k, budget),
                        ) {
                            (Ok(x), Ok(y)) => (x, y),
                            _ => continue,
                        };
                        m.harvest_dir(m_lo, m_hi, min_gap, budget, false, &mut local, depth + 1);
                        'pts: for p in local {
                            let mut y = p;
                            for _ in 0..k.unsigned_abs() {
                                let r = if k > 0 {
                                    self.conjugator.eval(y, budget)
                                } else {
                                    self.conjugator.eval_inv(y, budget)
                                };
                                match r {
                                    Ok(v) => y = v,
                                    Err(_) => continue 'pts,
                                }
                            }
                            if y >= lo && y <= hi {
                                out.push(y);
                            }
                        }
                    }
                }
            }
            // Tile 0 itself.
            if let Ok(m) = self.rule.map(0) {
                let mut local = Vec::new();
                m.harvest_dir(a0.max(lo), b0.min(hi), min_gap, budget, false, &mut local, depth + 1);
                out.extend(local);
            }
        }
    }
}

/// Applies `f^{-k}` to `x` for the tiled node's conjugator.
fn inverse_along(t: &TiledNode, x: f64, k: i64, budget: &EvalBudget) -> Result<f64> {
    let mut y = x;
    for _ in 0..k.unsigned_abs() {
        y = if k > 0 { t.conjugator.eval_inv(y, budget)? } else { t.conjugator.eval(y, budget)? };
    }
    Ok(y)
}

fn push_thinned(points: Vec<f64>, min_gap: f64, out: &mut Vec<f64>) {
    let mut last = f64::NEG_INFINITY;
    for p in points {
        if p - last >= min_gap {
            out.push(p);
            last = p;
        }
    }
}

/// The domain and extension rule used when materialising a lazy map.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub lo: f64,
    pub hi: f64,
    pub kind: FrameKind,
}

#[derive(Debug, Clone, Copy)]
pub enum FrameKind {
    /// `[lo, hi]` spans one period; result extends equivariantly.
    Periodic { image_period: f64 },
    /// Result is pinned to the identity at `lo` and `hi` and extends as the
    /// identity.
    IdentityOutside,
    /// Result extends affinely with the end-segment slopes.
    AffineTails,
}

impl Frame {
    pub fn periodic(lo: f64, period: f64) -> Frame {
        Frame { lo, hi: lo + period, kind: FrameKind::Periodic { image_period: period } }
    }

    pub fn window(lo: f64, hi: f64) -> Frame {
        Frame { lo, hi, kind: FrameKind::AffineTails }
    }
}

/// Removes trailing samples that collide with an endpoint pin `(px, py)` in
/// either coordinate at float resolution (the pin itself included).
fn drop_pin_collisions(bx: &mut Vec<f64>, by: &mut Vec<f64>, px: f64, py: f64) {
    let xslack = 5e-14 * px.abs().max(1.0);
    let yslack = 4.0 * f64::EPSILON * py.abs().max(1.0);
    while bx.len() > 1 {
        let i = bx.len() - 1;
        if bx[i] >= px - xslack || by[i] >= py - yslack {
            bx.pop();
            by.pop();
        } else {
            break;
        }
    }
}

/// Materialises a lazy map as a [`PLMap`] with sup error at most ~`eps` on
/// the frame.
///
/// Sample points are drawn from harvested structural breakpoints, the given
/// anchors, and a coarse uniform grid, then refined adaptively until linear
/// interpolation matches pointwise evaluation.
pub fn compact(
    h: &LazyHomeo,
    eps: f64,
    frame: Frame,
    anchors: &[f64],
    budget: &EvalBudget,
) -> Result<PLMap> {
    let (lo, hi) = (frame.lo, frame.hi);
    let min_gap = (eps * 1e-3).max(5e-14);
    let mut xs: Vec<f64> = vec![lo, hi];
    xs.extend(anchors.iter().copied().filter(|&x| x > lo && x < hi));
    let n0 = 128usize;
    for i in 1..n0 {
        xs.push(lo + (hi - lo) * i as f64 / n0 as f64);
    }
    h.harvest(lo, hi, min_gap, budget, &mut xs);
    xs.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < min_gap);
    if *xs.last().unwrap() < hi {
        xs.push(hi);
    }

    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    for &x in &xs {
        pts.push((x, h.eval(x, budget)?));
    }

    // Adaptive refinement: probe two interior points per segment.
    let mut stack: Vec<(f64, f64, f64, f64)> =
        pts.windows(2).map(|w| (w[0].0, w[0].1, w[1].0, w[1].1)).collect();
    let mut added = 0usize;
    const MAX_POINTS: usize = 400_000;
    while let Some((x0, y0, x1, y1)) = stack.pop() {
        if x1 - x0 < 4.0 * min_gap || added > MAX_POINTS {
            continue;
        }
        for t in [0.382, 0.618] {
            let xm = x0 + t * (x1 - x0);
            let ym = h.eval(xm, budget)?;
            let lin = y0 + (xm - x0) * (y1 - y0) / (x1 - x0);
            if (ym - lin).abs() > 0.5 * eps {
                pts.push((xm, ym));
                added += 1;
                stack.push((x0, y0, xm, ym));
                stack.push((xm, ym, x1, y1));
                break;
            }
        }
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (mut bx, mut by): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();

    match frame.kind {
        FrameKind::Periodic { image_period } => {
            let y0 = by[0];
            let n = bx.len() - 1;
            if (by[n] - y0 - image_period).abs() > 16.0 * eps + 1e-9 {
                return Err(HomeoError::InvalidMap(format!(
                    "map does not close up over the period: {} vs {}",
                    by[n] - y0,
                    image_period
                )));
            }
            let (px, py) = (bx[0] + (hi - lo), y0 + image_period);
            // Near an attracting boundary the map can saturate to the pin
            // value at float resolution well before the endpoint; drop such
            // trailing samples so the pin survives the monotone sweep.
            drop_pin_collisions(&mut bx, &mut by, px, py);
            bx.push(px);
            by.push(py);
            let (bx, by) = sanitize_monotone(bx, by, 8.0 * eps + 1e-12)?;
            let m = PLMap::new(bx, by, Extension::Periodic { period: hi - lo, image_period })?;
            Ok(m.simplify(0.0))
        }
        FrameKind::IdentityOutside => {
            let n = bx.len() - 1;
            if (by[0] - bx[0]).abs() > 16.0 * eps + 1e-9 || (by[n] - bx[n]).abs() > 16.0 * eps + 1e-9
            {
                return Err(HomeoError::InvalidMap(
                    "map is not the identity at the frame boundary".into(),
                ));
            }
            by[0] = bx[0];
            let (px, py) = (bx[n], bx[n]);
            drop_pin_collisions(&mut bx, &mut by, px, py);
            bx.push(px);
            by.push(py);
            let (bx, by) = sanitize_monotone(bx, by, 8.0 * eps + 1e-12)?;
            let m = PLMap::new(bx, by, Extension::IdentityOutside)?;
            Ok(m.simplify(0.0))
        }
        FrameKind::AffineTails => {
            let (bx, by) = sanitize_monotone(bx, by, 8.0 * eps + 1e-12)?;
            let n = bx.len() - 1;
            let left = (by[1] - by[0]) / (bx[1] - bx[0]);
            let right = (by[n] - by[n - 1]) / (bx[n] - bx[n - 1]);
            let m = PLMap::new(
                bx,
                by,
                Extension::AffineTails { left_slope: left, right_slope: right },
            )?;
            Ok(m.simplify(0.0))
        }
    }
}
