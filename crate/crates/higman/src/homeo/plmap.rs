//! Increasing piecewise-linear maps of the real line.
//!
//! A [`PLMap`] stores finitely many breakpoints together with an extension
//! rule describing the map outside the stored cell.  All maps in this crate
//! are orientation-preserving homeomorphisms of the line, so breakpoints and
//! values are both strictly increasing.

use serde::{Deserialize, Serialize};

use crate::error::{HomeoError, Result};
use crate::homeo::interval::OpenSet;

/// How a [`PLMap`] continues outside its stored breakpoint range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// `f(x + period) = f(x) + image_period` for all `x`.  The stored
    /// breakpoints span exactly one period.  Maps commuting with the
    /// translation `x + p` have `image_period == period == p`.
    Periodic { period: f64, image_period: f64 },
    /// Identity outside the stored hull; the first and last breakpoints are
    /// fixed points.
    IdentityOutside,
    /// Affine continuation with the given slopes.
    AffineTails { left_slope: f64, right_slope: f64 },
}

/// An increasing piecewise-linear homeomorphism of the line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PLMap {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    extension: Extension,
}

/// Tolerance used when snapping periodic cell endpoints; data further off
/// than this is rejected rather than silently repaired.
const SNAP_TOL: f64 = 1e-9;

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl PLMap {
    /// Builds a map from raw data, validating monotonicity and the
    /// extension-specific endpoint constraints.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, extension: Extension) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.len() < 2 {
            return Err(HomeoError::InvalidMap(format!(
                "need at least two matched breakpoints, got {}/{}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(HomeoError::InvalidMap("non-finite breakpoint data".into()));
        }
        if !strictly_increasing(&breakpoints) {
            return Err(HomeoError::InvalidMap("breakpoints not strictly increasing".into()));
        }
        if !strictly_increasing(&values) {
            return Err(HomeoError::InvalidMap("values not strictly increasing".into()));
        }
        let mut map = PLMap { breakpoints, values, extension };
        match extension {
            Extension::Periodic { period, image_period } => {
                if period <= 0.0 || image_period <= 0.0 {
                    return Err(HomeoError::InvalidMap("non-positive period".into()));
                }
                let n = map.breakpoints.len() - 1;
                let span = map.breakpoints[n] - map.breakpoints[0];
                let vspan = map.values[n] - map.values[0];
                if (span - period).abs() > SNAP_TOL || (vspan - image_period).abs() > SNAP_TOL {
                    return Err(HomeoError::InvalidMap(format!(
                        "cell spans {span}/{vspan}, expected {period}/{image_period}"
                    )));
                }
                // Snap the cell endpoints so periodic reduction is exact.
                map.breakpoints[n] = map.breakpoints[0] + period;
                map.values[n] = map.values[0] + image_period;
                if map.breakpoints[n - 1] >= map.breakpoints[n]
                    || map.values[n - 1] >= map.values[n]
                {
                    return Err(HomeoError::InvalidMap("periodic snap broke monotonicity".into()));
                }
            }
            Extension::IdentityOutside => {
                let n = map.breakpoints.len() - 1;
                if (map.values[0] - map.breakpoints[0]).abs() > SNAP_TOL
                    || (map.values[n] - map.breakpoints[n]).abs() > SNAP_TOL
                {
                    return Err(HomeoError::InvalidMap(
                        "identity-outside map must fix its hull endpoints".into(),
                    ));
                }
                map.values[0] = map.breakpoints[0];
                map.values[n] = map.breakpoints[n];
                if map.values.len() > 2
                    && (map.values[1] <= map.values[0] || map.values[n - 1] >= map.values[n])
                {
                    return Err(HomeoError::InvalidMap("endpoint snap broke monotonicity".into()));
                }
            }
            Extension::AffineTails { left_slope, right_slope } => {
                if left_slope <= 0.0 || right_slope <= 0.0 {
                    return Err(HomeoError::InvalidMap("tail slopes must be positive".into()));
                }
            }
        }
        Ok(map)
    }

    /// The identity map.
    pub fn identity() -> Self {
        PLMap {
            breakpoints: vec![0.0, 1.0],
            values: vec![0.0, 1.0],
            extension: Extension::IdentityOutside,
        }
    }

    /// The translation `x + t`.
    pub fn translation(t: f64) -> Self {
        PLMap {
            breakpoints: vec![0.0, 1.0],
            values: vec![t, 1.0 + t],
            extension: Extension::AffineTails { left_slope: 1.0, right_slope: 1.0 },
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    /// The stored cell `[first, last]`.
    pub fn cell(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// The translation period `p` if this map commutes with `x + p`.
    pub fn commuting_period(&self) -> Option<f64> {
        match self.extension {
            Extension::Periodic { period, image_period } if period == image_period => Some(period),
            Extension::IdentityOutside => None,
            _ => None,
        }
    }

    fn eval_core(&self, x: f64) -> f64 {
        let xs = &self.breakpoints;
        let ys = &self.values;
        // Index of the segment [xs[i], xs[i+1]] containing x.
        let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return ys[i],
            Err(0) => 0,
            Err(i) if i >= xs.len() => xs.len() - 2,
            Err(i) => i - 1,
        };
        let (x0, x1) = (xs[i], xs[i + 1]);
        let (y0, y1) = (ys[i], ys[i + 1]);
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }

    /// Evaluates the map.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.cell();
        match self.extension {
            Extension::Periodic { period, image_period } => {
                if x >= lo && x <= hi {
                    return self.eval_core(x);
                }
                let k = ((x - lo) / period).floor();
                let xr = (x - k * period).clamp(lo, hi);
                self.eval_core(xr) + k * image_period
            }
            Extension::IdentityOutside => {
                if x <= lo || x >= hi {
                    x
                } else {
                    self.eval_core(x)
                }
            }
            Extension::AffineTails { left_slope, right_slope } => {
                if x < lo {
                    self.values[0] + left_slope * (x - lo)
                } else if x > hi {
                    *self.values.last().unwrap() + right_slope * (x - hi)
                } else {
                    self.eval_core(x)
                }
            }
        }
    }

    /// Evaluates the inverse map.
    pub fn eval_inv(&self, y: f64) -> f64 {
        // Evaluate the inverse in place: `values` is strictly increasing, so
        // the segment lookup mirrors `eval` with the roles of the coordinate
        // vectors swapped.  Materialising `inverse()` here would clone both
        // vectors on every call, which dominates grid sweeps on large maps.
        let (ylo, yhi) = (self.values[0], *self.values.last().unwrap());
        match self.extension {
            Extension::Periodic { period, image_period } => {
                let (y, k) = if y >= ylo && y <= yhi {
                    (y, 0.0)
                } else {
                    let k = ((y - ylo) / image_period).floor();
                    ((y - k * image_period).clamp(ylo, yhi), k)
                };
                self.eval_inv_core(y) + k * period
            }
            Extension::IdentityOutside => {
                if y <= ylo || y >= yhi {
                    y
                } else {
                    self.eval_inv_core(y)
                }
            }
            Extension::AffineTails { left_slope, right_slope } => {
                if y < ylo {
                    self.breakpoints[0] + (y - ylo) / left_slope
                } else if y > yhi {
                    *self.breakpoints.last().unwrap() + (y - yhi) / right_slope
                } else {
                    self.eval_inv_core(y)
                }
            }
        }
    }

    fn eval_inv_core(&self, y: f64) -> f64 {
        let xs = &self.values;
        let ys = &self.breakpoints;
        let i = match xs.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(i) => return ys[i],
            Err(0) => 0,
            Err(i) if i >= xs.len() => xs.len() - 2,
            Err(i) => i - 1,
        };
        let (x0, x1) = (xs[i], xs[i + 1]);
        let (y0, y1) = (ys[i], ys[i + 1]);
        y0 + (y - x0) * (y1 - y0) / (x1 - x0)
    }

    /// The exact inverse, obtained by swapping breakpoints and values.
    pub fn inverse(&self) -> PLMap {
        let extension = match self.extension {
            Extension::Periodic { period, image_period } => {
                Extension::Periodic { period: image_period, image_period: period }
            }
            Extension::IdentityOutside => Extension::IdentityOutside,
            Extension::AffineTails { left_slope, right_slope } => Extension::AffineTails {
                left_slope: 1.0 / left_slope,
                right_slope: 1.0 / right_slope,
            },
        };
        PLMap { breakpoints: self.values.clone(), values: self.breakpoints.clone(), extension }
    }

    /// The conjugate `x -> f(x - s) + s` by the translation `x + s`.
    pub fn shift_conjugate(&self, s: f64) -> PLMap {
        PLMap {
            breakpoints: self.breakpoints.iter().map(|x| x + s).collect(),
            values: self.values.iter().map(|y| y + s).collect(),
            extension: self.extension,
        }
    }

    /// Breakpoints of the (possibly unrolled periodic) map inside `[lo, hi]`.
    pub fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self.extension {
            Extension::Periodic { period, .. } => {
                let (clo, _) = self.cell();
                let k0 = ((lo - clo) / period).floor() as i64;
                let k1 = ((hi - clo) / period).ceil() as i64;
                let mut out = Vec::new();
                for k in k0..=k1 {
                    let s = k as f64 * period;
                    // Skip the duplicated cell endpoint.
                    for &b in &self.breakpoints[..self.breakpoints.len() - 1] {
                        let x = b + s;
                        if x >= lo && x <= hi {
                            out.push(x);
                        }
                    }
                }
                out
            }
            _ => self.breakpoints.iter().copied().filter(|&x| x >= lo && x <= hi).collect(),
        }
    }

    /// Exact composition `outer . inner` (apply `inner` first).
    ///
    /// The result is piecewise linear with breakpoints at the breakpoints of
    /// `inner` together with `inner`-preimages of the breakpoints of
    /// `outer`; on this refined partition both sides are affine, so the
    /// composition is exact up to float rounding.
    pub fn compose(outer: &PLMap, inner: &PLMap) -> Result<PLMap> {
        match (outer.extension, inner.extension) {
            (
                Extension::Periodic { period: po, image_period: qo },
                Extension::Periodic { period: pi, image_period: qi },
            ) => {
                if (qi - po).abs() > 1e-12 {
                    return Err(HomeoError::InvalidMap(format!(
                        "cannot compose: inner image period {qi} != outer period {po}"
                    )));
                }
                let (lo, hi) = inner.cell();
                let (ilo, ihi) = (inner.values[0], *inner.values.last().unwrap());
                let inner_inv = inner.inverse();
                let mut xs: Vec<f64> = inner.breakpoints.clone();
                for b in outer.breakpoints_in(ilo, ihi) {
                    xs.push(inner_inv.eval(b));
                }
                let mut data = finalize_partition(xs, lo, hi);
                let ys: Vec<f64> = data.iter().map(|&x| outer.eval(inner.eval(x))).collect();
                data.push(hi);
                let mut ys = ys;
                ys.push(ys[0] + qo);
                let (data, ys) = sanitize_monotone(data, ys, 1e-12)?;
                PLMap::new(data, ys, Extension::Periodic { period: pi, image_period: qo })
            }
            (Extension::IdentityOutside, Extension::IdentityOutside) => {
                let (alo, ahi) = outer.cell();
                let (blo, bhi) = inner.cell();
                let lo = alo.min(blo) - 1e-9;
                let hi = ahi.max(bhi) + 1e-9;
                let inner_inv = inner.inverse();
                let mut xs: Vec<f64> = inner.breakpoints.clone();
                for &b in &outer.breakpoints {
                    xs.push(inner_inv.eval(b));
                }
                let mut data = finalize_partition(xs, lo, hi);
                let mut ys: Vec<f64> = data.iter().map(|&x| outer.eval(inner.eval(x))).collect();
                data.push(hi);
                ys.push(hi);
                data.insert(0, lo);
                ys.insert(0, lo);
                let (data, ys) = sanitize_monotone(data, ys, 1e-12)?;
                PLMap::new(data, ys, Extension::IdentityOutside)
            }
            _ => Err(HomeoError::InvalidMap(
                "exact composition requires matching extension kinds".into(),
            )),
        }
    }

    /// Exact integer power via repeated composition.  `n` may be negative;
    /// `n == 0` yields the identity (as an identity-outside map).
    pub fn pow(&self, n: i64) -> Result<PLMap> {
        if n == 0 {
            return Ok(PLMap::identity());
        }
        let base = if n > 0 { self.clone() } else { self.inverse() };
        let mut acc = base.clone();
        for _ in 1..n.unsigned_abs() {
            acc = PLMap::compose(&base, &acc)?;
            acc = acc.simplify(0.0);
        }
        Ok(acc)
    }

    /// Drops breakpoints that lie on the segment between their neighbours
    /// within `tol` (absolute, in value space).  `tol == 0.0` removes only
    /// float-exact collinear points.
    pub fn simplify(&self, tol: f64) -> PLMap {
        let tol = tol.max(0.0);
        let n = self.breakpoints.len();
        let mut keep = vec![true; n];
        for i in 1..n - 1 {
            let (x0, x1, x2) = (self.breakpoints[i - 1], self.breakpoints[i], self.breakpoints[i + 1]);
            let (y0, y1, y2) = (self.values[i - 1], self.values[i], self.values[i + 1]);
            let ylin = y0 + (x1 - x0) * (y2 - y0) / (x2 - x0);
            let scale = (y2 - y0).abs().max(1.0);
            if (y1 - ylin).abs() <= tol + 1e-15 * scale {
                keep[i] = false;
            }
        }
        // Only drop runs conservatively: removing a point changes its
        // neighbour's test, so re-run until stable on a copy.
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            if keep[i] {
                xs.push(self.breakpoints[i]);
                ys.push(self.values[i]);
            }
        }
        PLMap { breakpoints: xs, values: ys, extension: self.extension }
    }

    /// Largest slope among linear pieces meeting the complement of `excluded`.
    ///
    /// A piece counts if any part of it lies outside `excluded`; for
    /// periodic maps pieces are taken over one cell.
    pub fn max_slope_outside(&self, excluded: &OpenSet) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.breakpoints.len() - 1 {
            let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if excluded.covers(x0, x1) {
                continue;
            }
            let slope = (self.values[i + 1] - self.values[i]) / (x1 - x0);
            best = best.max(slope);
        }
        best
    }

    /// Support components (maximal open intervals where the map differs from
    /// the identity).  For periodic maps the components inside one cell
    /// anchored at a fixed point are returned; for identity-outside maps the
    /// global components.
    pub fn support_components(&self) -> Result<Vec<(f64, f64)>> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = match self.extension {
            Extension::IdentityOutside => (self.breakpoints.clone(), self.values.clone()),
            Extension::Periodic { period, image_period } => {
                if period != image_period {
                    return Err(HomeoError::Precondition(
                        "support components need a translation-commuting map".into(),
                    ));
                }
                // Re-anchor the cell at a fixed breakpoint so no component
                // straddles the cell boundary.
                let n = self.breakpoints.len() - 1;
                let anchor = (0..n)
                    .find(|&i| (self.values[i] - self.breakpoints[i]).abs() <= 1e-12)
                    .ok_or_else(|| {
                        HomeoError::Precondition("periodic map has no fixed breakpoint".into())
                    })?;
                let mut xs = Vec::with_capacity(n + 1);
                let mut ys = Vec::with_capacity(n + 1);
                for j in 0..=n {
                    let i = anchor + j;
                    let (wrap, i) = if i >= n { (1.0, i - n) } else { (0.0, i) };
                    xs.push(self.breakpoints[i] + wrap * period);
                    ys.push(self.values[i] + wrap * image_period);
                }
                (xs, ys)
            }
            Extension::AffineTails { .. } => {
                return Err(HomeoError::Precondition(
                    "support components undefined for affine-tail maps".into(),
                ));
            }
        };
        let fixed: Vec<bool> =
            xs.iter().zip(ys.iter()).map(|(&x, &y)| (y - x).abs() <= 1e-12).collect();
        if !fixed[0] || !fixed[xs.len() - 1] {
            return Err(HomeoError::Precondition(
                "support does not close up at the cell boundary".into(),
            ));
        }
        // Components are the gaps between consecutive fixed breakpoints that
        // contain at least one moved breakpoint.
        let mut out = Vec::new();
        let mut last_fixed = 0usize;
        for i in 1..xs.len() {
            if fixed[i] {
                if i > last_fixed + 1 {
                    out.push((xs[last_fixed], xs[i]));
                }
                last_fixed = i;
            }
        }
        Ok(out)
    }
}

/// Sorts, clips to `(lo, hi)`, and dedupes a breakpoint candidate list, then
/// prepends `lo`.  The caller appends the final cell endpoint itself.
fn finalize_partition(mut xs: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    xs.retain(|&x| x > lo && x < hi && x.is_finite());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = vec![lo];
    for x in xs {
        if x - out.last().unwrap() > 1e-13 && hi - x > 1e-13 {
            out.push(x);
        }
    }
    out
}

/// Drops points that tie or regress within float noise; errors on genuine
/// monotonicity violations larger than `tol`.
pub(crate) fn sanitize_monotone(
    xs: Vec<f64>,
    ys: Vec<f64>,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ox: Vec<f64> = Vec::with_capacity(xs.len());
    let mut oy: Vec<f64> = Vec::with_capacity(ys.len());
    for (x, y) in xs.into_iter().zip(ys.into_iter()) {
        if let (Some(&px), Some(&py)) = (ox.last(), oy.last()) {
            if x <= px || y <= py {
                if x - px > -1e-13 && y - py > -tol {
                    continue; // float tie: drop this sample
                }
                return Err(HomeoError::NonMonotone(format!(
                    "at x={x}: previous ({px}, {py}), current ({x}, {y})"
                )));
            }
        }
        ox.push(x);
        oy.push(y);
    }
    Ok((ox, oy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_periodic() -> PLMap {
        // A (2,2)-periodic map with one interior breakpoint per cell.
        PLMap::new(
            vec![0.0, 0.5, 2.0],
            vec![0.0, 1.2, 2.0],
            Extension::Periodic { period: 2.0, image_period: 2.0 },
        )
        .unwrap()
    }

    #[test]
    fn eval_is_exact_at_breakpoints() {
        let f = sample_periodic();
        assert_eq!(f.eval(0.5), 1.2);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(2.5), 3.2);
        assert_eq!(f.eval(-1.5), -0.8);
    }

    #[test]
    fn identity_outside_extension() {
        let f = PLMap::new(
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.75, 1.0],
            Extension::IdentityOutside,
        )
        .unwrap();
        assert_eq!(f.eval(-3.0), -3.0);
        assert_eq!(f.eval(7.0), 7.0);
        assert_eq!(f.eval(0.5), 0.75);
    }

    #[test]
    fn inverse_round_trip() {
        let f = sample_periodic();
        let g = f.inverse();
        for i in 0..=100 {
            let x = -3.0 + 0.07 * i as f64;
            let y = f.eval(x);
            assert!((g.eval(y) - x).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn compose_matches_pointwise() {
        let f = sample_periodic();
        let g = PLMap::new(
            vec![-0.3, 0.9, 1.7],
            vec![-0.3, 1.4, 1.7],
            Extension::Periodic { period: 2.0, image_period: 2.0 },
        )
        .unwrap();
        let fg = PLMap::compose(&f, &g).unwrap();
        for i in 0..=200 {
            let x = -4.0 + 0.045 * i as f64;
            assert!((fg.eval(x) - f.eval(g.eval(x))).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn pow_matches_iterated_eval() {
        let f = sample_periodic();
        let f3 = f.pow(3).unwrap();
        let fm2 = f.pow(-2).unwrap();
        for i in 0..=50 {
            let x = -2.0 + 0.09 * i as f64;
            let fx3 = f.eval(f.eval(f.eval(x)));
            assert!((f3.eval(x) - fx3).abs() < 1e-11);
            let y = fm2.eval(x);
            assert!((f.eval(f.eval(y)) - x).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_non_monotone_data() {
        let err = PLMap::new(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.0, 2.0],
            Extension::Periodic { period: 2.0, image_period: 2.0 },
        );
        assert!(matches!(err, Err(HomeoError::InvalidMap(_))));
    }

    #[test]
    fn support_components_splits_at_interior_fixed_points() {
        let f = PLMap::new(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![0.0, 0.30, 0.5, 0.80, 1.0],
            Extension::IdentityOutside,
        )
        .unwrap();
        let comps = f.support_components().unwrap();
        assert_eq!(comps, vec![(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn shift_conjugate_shifts_graph() {
        let f = sample_periodic();
        let g = f.shift_conjugate(1.0);
        for i in 0..=40 {
            let x = -1.0 + 0.1 * i as f64;
            assert!((g.eval(x) - (f.eval(x - 1.0) + 1.0)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn prop_inverse_round_trip(raw in proptest::collection::vec(0.01f64..1.0, 3..8),
                                   xs in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
            // Build a random (2,2)-periodic map from positive increments.
            let total: f64 = raw.iter().sum();
            let mut bx = vec![0.0];
            let mut by = vec![0.0];
            for i in 0..raw.len() {
                bx.push(2.0 * (i as f64 + 1.0) / raw.len() as f64);
                by.push(2.0 * raw[..=i].iter().sum::<f64>() / total);
            }
            let f = PLMap::new(bx, by, Extension::Periodic { period: 2.0, image_period: 2.0 }).unwrap();
            let g = f.inverse();
            for x in xs {
                prop_assert!((g.eval(f.eval(x)) - x).abs() < 1e-10);
            }
        }
    }
}
