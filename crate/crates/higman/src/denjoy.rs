//! Blow-up of the dyadic orbit of the affine doubling action.
//!
//! Start from the pair f(x) = 2x, g(x) = x + 1 acting on the line. Every
//! dyadic rational o = n/2^m is replaced by a closed interval J_o of
//! prescribed length; the lengths decay doubly exponentially in the level m,
//! so the total inserted mass per unit interval is finite. The maps extend
//! over the new line by sending J_o affinely onto J_{f(o)} (resp. J_{g(o)})
//! and interpolating affinely across the gaps. After a global rescaling the
//! translation becomes exactly x ↦ x + 2, which is the normalization the
//! rest of the construction assumes.
//!
//! The extended doubling map f̄ commutes with the rescaled translation as
//! f̄(x + 2) = f̄(x) + 4, so it is stored as a single periodic cell with
//! image period 4 and the conjugacy f̄ ∘ ḡ ∘ f̄⁻¹ = ḡ² holds to float
//! precision everywhere, not just on a finite window.

use serde::Serialize;

use crate::error::{HomeoError, Result};
use crate::homeo::interval::OpenSet;
use crate::homeo::plmap::{Extension, PLMap};

/// A dyadic rational n / 2^level, kept in reduced form (odd numerator
/// whenever level > 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dyadic {
    pub num: i64,
    pub level: u32,
}

impl Dyadic {
    pub fn new(mut num: i64, mut level: u32) -> Self {
        while level > 0 && num % 2 == 0 {
            num /= 2;
            level -= 1;
        }
        Dyadic { num, level }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / f64::exp2(self.level as f64)
    }

    /// Image under the doubling map, reduced.
    pub fn doubled(self) -> Dyadic {
        if self.level > 0 {
            Dyadic { num: self.num, level: self.level - 1 }
        } else {
            Dyadic { num: 2 * self.num, level: 0 }
        }
    }
}

/// Parameters of the blow-up.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlowupConfig {
    /// Base length scale for the inserted intervals (|J_0| = kappa/4 before
    /// rescaling). Must satisfy the normalized bound |J_0| ≤ 1/4.
    pub kappa: f64,
    /// Maximal dyadic level that receives an interval. Levels above `depth`
    /// are omitted; their total length per unit is below kappa/2^(2^depth),
    /// which for the default depth 6 is under 1e-19.
    pub depth: u32,
    /// Half-width of the window on which inserted intervals are enumerated
    /// (the model itself extends periodically to the whole line).
    pub window: u32,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        BlowupConfig { kappa: 0.125, depth: 6, window: 8 }
    }
}

/// Result of choosing the global rescaling.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Normalization {
    /// Inserted mass per unit interval before rescaling.
    pub unit_mass: f64,
    /// Affine scale: new coordinates are lambda times (old plus inserted
    /// mass), chosen so one old unit spans exactly 2 new units.
    pub lambda: f64,
}

/// One inserted interval: the dyadic that was blown up and the closed
/// interval replacing it in the new line.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Insertion {
    pub at: Dyadic,
    pub lo: f64,
    pub hi: f64,
}

/// The blown-up line together with the extended pair of maps.
#[derive(Debug, Clone, Serialize)]
pub struct DenjoyModel {
    pub cfg: BlowupConfig,
    pub norm: Normalization,
    /// Inserted intervals for every included dyadic in [-window, window+2).
    pub inserted: Vec<Insertion>,
    /// Extended doubling map, stored as one periodic cell (period 2 in the
    /// source, 4 in the image).
    pub f_bar: PLMap,
    /// Rescaled translation, exactly x ↦ x + 2.
    pub g_bar: PLMap,
    /// The central wandering interval J_0 (closed).
    pub j0: (f64, f64),
    /// Union of the open inserted intervals, one period of it; the minimal
    /// set is (locally) the complement of this union.
    pub m_approx: OpenSet,
}

/// Intervals shorter than this are below double resolution at the scale of
/// the model and are treated as single points.
const RESOLVABLE: f64 = 1e-14;

/// Pre-rescaling length of the interval inserted at a reduced dyadic of the
/// given level. Level 0 uses the same quarter-kappa length as level 1, so
/// the unit translation matches lengths level-by-level.
fn raw_length(level: u32, kappa: f64) -> f64 {
    let e = 1u64 << level.max(1).min(62);
    kappa * f64::exp2(-(e as f64))
}

/// Normalized length |J_{n/2^m}| = lambda * kappa / 2^(2^m).
///
/// Errors when n/2^m is not reduced (even numerator at positive level).
pub fn insertion_length(n: i64, m: u32, cfg: &BlowupConfig) -> Result<f64> {
    if m > 0 && n % 2 == 0 {
        return Err(HomeoError::Precondition(format!(
            "{n}/2^{m} is not a reduced dyadic"
        )));
    }
    let norm = normalize(cfg)?;
    Ok(norm.lambda * raw_length(m, cfg.kappa))
}

/// Compute the per-unit inserted mass S and the rescaling lambda = 2/(1+S),
/// so that one old unit (length 1 + S after insertion) becomes exactly 2.
pub fn normalize(cfg: &BlowupConfig) -> Result<Normalization> {
    if !(cfg.kappa > 0.0) {
        return Err(HomeoError::Precondition("kappa must be positive".into()));
    }
    if cfg.depth < 1 || cfg.depth > 16 {
        return Err(HomeoError::Precondition("depth must be in 1..=16".into()));
    }
    // Per unit interval: one integer point (level 0) plus 2^(m-1) reduced
    // fractions at each level m >= 1.
    let mut s = raw_length(0, cfg.kappa);
    for m in 1..=cfg.depth {
        s += f64::exp2((m - 1) as f64) * raw_length(m, cfg.kappa);
    }
    let lambda = 2.0 / (1.0 + s);
    if lambda * raw_length(0, cfg.kappa) > 0.25 {
        return Err(HomeoError::Precondition(format!(
            "kappa={} gives |J_0| > 1/4 after rescaling; lower it",
            cfg.kappa
        )));
    }
    Ok(Normalization { unit_mass: s, lambda })
}

/// Number of dyadics of level <= j in [0, x) for x = n/2^m > 0, all inputs
/// reduced. Exact integer combinatorics.
fn count_le(j: u32, n: i64, m: u32) -> i64 {
    debug_assert!(n > 0);
    if j >= m {
        n << (j - m)
    } else {
        // n/2^(m-j) is not an integer because n is odd, so the count of
        // integers in [0, n/2^(m-j)) is floor + 1.
        (n >> (m - j)) + 1
    }
}

/// Number of dyadics of level <= j in [x, 0) for x = -n/2^m < 0.
fn count_le_neg(j: u32, n: i64, m: u32) -> i64 {
    debug_assert!(n > 0);
    if j >= m {
        n << (j - m)
    } else {
        n >> (m - j)
    }
}

/// Signed inserted mass between 0 and x (positive for x > 0, negative for
/// x < 0; for negative x the interval at x itself is included, so the
/// returned position is always the left endpoint of J_x).
fn signed_mass(x: Dyadic, cfg: &BlowupConfig) -> f64 {
    if x.num == 0 {
        return 0.0;
    }
    let mut mass = 0.0;
    let mut prev = 0i64;
    for j in 0..=cfg.depth {
        let cum = if x.num > 0 {
            count_le(j, x.num, x.level)
        } else {
            count_le_neg(j, -x.num, x.level)
        };
        mass += (cum - prev) as f64 * raw_length(j, cfg.kappa);
        prev = cum;
    }
    if x.num > 0 {
        mass
    } else {
        -mass
    }
}

/// New-line coordinate of the left endpoint of J_x (or of the single image
/// point when x has level above the included depth). The new origin sits at
/// the midpoint of J_0, so position_map(0) = -lambda*kappa/8.
pub fn position_map(x: Dyadic, cfg: &BlowupConfig) -> Result<f64> {
    let norm = normalize(cfg)?;
    let half_j0 = norm.lambda * raw_length(0, cfg.kappa) / 2.0;
    Ok(norm.lambda * (x.to_f64() + signed_mass(x, cfg)) - half_j0)
}

/// Reduced dyadics of level <= depth in [k, k+1), sorted increasingly.
fn dyadics_in_unit(k: i64, depth: u32) -> Vec<Dyadic> {
    let den = 1i64 << depth;
    (0..den).map(|i| Dyadic::new(k * den + i, depth)).collect()
}

/// Build the blown-up model: inserted intervals on the configured window,
/// the extended pair (f̄, ḡ), and the inserted-union open set.
pub fn build_blowup(cfg: &BlowupConfig) -> Result<DenjoyModel> {
    let norm = normalize(cfg)?;
    let lambda = norm.lambda;
    let len = |d: Dyadic| lambda * raw_length(d.level, cfg.kappa);
    let pos = |d: Dyadic| -> Result<f64> { position_map(d, cfg) };

    // Inserted intervals over the window.
    let w = cfg.window as i64;
    let mut inserted = Vec::new();
    for k in -w..(w + 2) {
        for d in dyadics_in_unit(k, cfg.depth) {
            let lo = pos(d)?;
            inserted.push(Insertion { at: d, lo, hi: lo + len(d) });
        }
    }

    // One period of f̄: endpoints of every J_o for o in [0, 1), mapped to
    // the matching endpoints of J_{2o}. The closing breakpoint at
    // position(1) pairs with position(2), pinning the (2, 4) cell spans.
    // Insertions shorter than float resolution collapse to a single
    // breakpoint; their (longer) image intervals are then crossed by the
    // interpolating segment, displacing it by less than the image length.
    let mut bx = Vec::new();
    let mut by = Vec::new();
    for d in dyadics_in_unit(0, cfg.depth) {
        let (p, q) = (pos(d)?, pos(d.doubled())?);
        bx.push(p);
        by.push(q);
        if len(d) > RESOLVABLE {
            bx.push(p + len(d));
            by.push(q + len(d.doubled()));
        }
    }
    bx.push(pos(Dyadic::new(1, 0))?);
    by.push(pos(Dyadic::new(2, 0))?);
    let f_bar = PLMap::new(bx, by, Extension::Periodic { period: 2.0, image_period: 4.0 })?;

    let g_bar = PLMap::translation(2.0);
    let j0 = {
        let lo = pos(Dyadic::new(0, 0))?;
        (lo, lo + len(Dyadic::new(0, 0)))
    };

    // Union of the open inserted intervals on one period, with adjacency
    // ruled out (every pair of included intervals leaves a gap of omitted
    // dyadics between them).
    let mut cell: Vec<(f64, f64)> = Vec::new();
    for d in dyadics_in_unit(0, cfg.depth) {
        if len(d) > RESOLVABLE {
            let lo = pos(d)?;
            cell.push((lo, lo + len(d)));
        }
    }
    for pair in cell.windows(2) {
        if pair[1].0 - pair[0].1 <= 0.0 {
            return Err(HomeoError::Construction(format!(
                "inserted intervals touch near x={}",
                pair[0].1
            )));
        }
    }
    let m_approx = OpenSet::periodic(cell, 2.0)?;

    Ok(DenjoyModel { cfg: *cfg, norm, inserted, f_bar, g_bar, j0, m_approx })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> BlowupConfig {
        BlowupConfig::default()
    }

    /// Independent oracle for the per-unit mass: enumerate every reduced
    /// dyadic in [0, 1) and sum the raw lengths directly.
    fn unit_mass_oracle(c: &BlowupConfig) -> f64 {
        let den = 1i64 << c.depth;
        (0..den)
            .map(|i| Dyadic::new(i, c.depth))
            .map(|d| raw_length(d.level, c.kappa))
            .sum()
    }

    #[test]
    fn insertion_lengths_follow_the_level_formula() {
        let c = cfg();
        let lambda = normalize(&c).unwrap().lambda;
        let l1 = insertion_length(1, 1, &c).unwrap();
        assert!((l1 - lambda * c.kappa / 4.0).abs() < 1e-15);
        let l2 = insertion_length(1, 2, &c).unwrap();
        let l3 = insertion_length(1, 3, &c).unwrap();
        assert!((l3 / l2 - 1.0 / 16.0).abs() < 1e-15);
        // Level 0 matches level 1 so the unit translation preserves lengths.
        let l0 = insertion_length(0, 0, &c).unwrap();
        assert_eq!(l0, l1);
        assert!(insertion_length(2, 1, &c).is_err());
    }

    #[test]
    fn normalization_matches_direct_summation() {
        let c = cfg();
        let n = normalize(&c).unwrap();
        assert!((n.unit_mass - unit_mass_oracle(&c)).abs() < 1e-16);
        assert_eq!(n.lambda * (1.0 + n.unit_mass), 2.0);
        // Vanishing kappa gives the pure doubling of the line, lambda -> 2.
        let tiny = BlowupConfig { kappa: 1e-12, ..c };
        assert!((normalize(&tiny).unwrap().lambda - 2.0).abs() < 2e-12);
    }

    #[test]
    fn oversized_kappa_is_rejected() {
        let c = BlowupConfig { kappa: 0.9, ..cfg() };
        assert!(normalize(&c).is_err());
    }

    #[test]
    fn positions_match_a_brute_force_scan() {
        let c = cfg();
        let n = normalize(&c).unwrap();
        // Oracle: left endpoint of J_x = lambda * (x + sum of raw lengths of
        // every included dyadic strictly below x, relative to 0), shifted so
        // the origin is the midpoint of J_0.
        let den = 1i64 << c.depth;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=(den) {
            for num in [i, i + den] {
                let x = Dyadic::new(num, c.depth);
                let mass: f64 = (0..num)
                    .map(|k| raw_length(Dyadic::new(k, c.depth).level, c.kappa))
                    .sum();
                let expect = n.lambda * (x.to_f64() + mass) - n.lambda * c.kappa / 8.0;
                let got = position_map(x, &c).unwrap();
                assert!((got - expect).abs() < 1e-13, "x={x:?}");
            }
            let got = position_map(Dyadic::new(i, c.depth), &c).unwrap();
            assert!(got > prev);
            prev = got;
        }
    }

    #[test]
    fn origin_and_translation_conventions() {
        let c = cfg();
        let n = normalize(&c).unwrap();
        let p0 = position_map(Dyadic::new(0, 0), &c).unwrap();
        assert!((p0 + n.lambda * c.kappa / 8.0).abs() < 1e-16);
        for (num, m) in [(0i64, 0u32), (1, 2), (-3, 3), (-7, 0), (5, 1)] {
            let x = Dyadic::new(num, m);
            let shifted = Dyadic::new(num + (1 << m), m);
            let a = position_map(x, &c).unwrap();
            let b = position_map(shifted, &c).unwrap();
            assert!((b - a - 2.0).abs() < 1e-13, "x={x:?}");
        }
    }

    #[test]
    fn translated_insertions_have_equal_lengths() {
        let dj = build_blowup(&cfg()).unwrap();
        let lookup = |d: Dyadic| {
            dj.inserted
                .iter()
                .find(|ins| ins.at == d)
                .map(|ins| ins.hi - ins.lo)
                .unwrap()
        };
        let den = 1i64 << dj.cfg.depth;
        for i in 0..den {
            let d = Dyadic::new(i, dj.cfg.depth);
            let e = Dyadic::new(i + den, dj.cfg.depth);
            // Endpoints are rounded at different magnitudes, so the stored
            // widths may differ in the last bit.
            assert!((lookup(d) - lookup(e)).abs() < 1e-15);
        }
    }

    #[test]
    fn f_bar_is_the_identity_on_j0() {
        let dj = build_blowup(&cfg()).unwrap();
        let (lo, hi) = dj.j0;
        for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let x = lo + t * (hi - lo);
            assert!((dj.f_bar.eval(x) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn conjugacy_holds_on_a_dense_grid() {
        let dj = build_blowup(&cfg()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=4000 {
            let x = -16.0 + 36.0 * i as f64 / 4000.0;
            let lhs = dj.f_bar.eval(dj.f_bar.eval_inv(x) + 2.0);
            worst = worst.max((lhs - (x + 4.0)).abs());
        }
        assert!(worst < 1e-9, "worst residual {worst}");
    }

    #[test]
    fn f_bar_moves_insertions_to_their_doubles() {
        let dj = build_blowup(&cfg()).unwrap();
        let c = dj.cfg;
        for (n, m) in [(1i64, 1u32), (3, 2), (1, 3), (-5, 4), (7, 6)] {
            let d = Dyadic::new(n, m);
            let src = position_map(d, &c).unwrap();
            let dst = position_map(d.doubled(), &c).unwrap();
            assert!((dj.f_bar.eval(src) - dst).abs() < 1e-12, "o={d:?}");
        }
    }

    #[test]
    fn minimal_set_gaps_are_positive() {
        let dj = build_blowup(&cfg()).unwrap();
        let gaps = dj.m_approx.complement_gaps().unwrap();
        let comps = gaps.components_in(-1.0, 3.0);
        assert!(!comps.is_empty());
        for (a, b) in comps {
            assert!(b > a);
        }
    }
}
