//! Canonical roots and dyadic fractional powers of compactly supported maps.
//!
//! On each support component `C` of `h`, pick the midpoint `x0` and spread
//! the uniform unit measure on `[x0, h(x0))` over `C` by pushing it forward
//! with `h`.  The cumulative function `F` of that measure conjugates `h|C`
//! to the unit translation, so `h^t := F^{-1} . (q -> q + t) . F` is defined
//! for every real `t` and is again piecewise linear.  Squaring `h^{1/2}`
//! recovers `h` exactly, and the family satisfies `h^s . h^t = h^{s+t}`,
//! which is what the extension operators need from their tile maps.

use crate::error::{HomeoError, Result};
use crate::homeo::plmap::{sanitize_monotone, Extension, PLMap};

/// Maximum number of push-forward steps per direction when materialising the
/// cumulative function; beyond this the remaining orbit tail is shorter than
/// the float resolution for any map whose end slopes are bounded away from 1.
const MAX_STEPS: usize = 4000;

/// The cumulative function of the invariant measure on one support component.
struct Cumulative {
    xs: Vec<f64>,
    fs: Vec<f64>,
    lo: f64,
    hi: f64,
    /// Direction of motion: `F h F^{-1}` is the translation by `s`.
    s: f64,
}

impl Cumulative {
    fn eval(&self, x: f64) -> f64 {
        interp(&self.xs, &self.fs, x)
    }

    /// Inverse evaluation, clamped into the component.
    fn eval_inv(&self, q: f64) -> f64 {
        interp(&self.fs, &self.xs, q).clamp(self.lo, self.hi)
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => return ys[i],
        Err(0) => 0,
        Err(i) if i >= n => n - 2,
        Err(i) => i - 1,
    };
    let (x0, x1) = (xs[i], xs[i + 1]);
    let (y0, y1) = (ys[i], ys[i + 1]);
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

/// Builds the cumulative function of the `h`-invariant measure on the
/// component `(cl, cr)`.
fn build_cumulative(h: &PLMap, cl: f64, cr: f64) -> Result<Cumulative> {
    let x0 = 0.5 * (cl + cr);
    let x1 = h.eval(x0);
    let width = cr - cl;
    if (x1 - x0).abs() < 1e-14 * width.max(1.0) {
        return Err(HomeoError::Precondition(format!(
            "support component ({cl}, {cr}) has a fixed midpoint"
        )));
    }
    let s = if x1 > x0 { 1.0 } else { -1.0 };
    // Seed cell with F affine from 0 to s.
    let (mut seed_x, mut seed_f) = if s > 0.0 {
        (vec![x0, x1], vec![0.0, 1.0])
    } else {
        (vec![x1, x0], vec![-1.0, 0.0])
    };
    // Insert h-breakpoints interior to the seed cell.
    let inner: Vec<f64> = h
        .breakpoints_in(seed_x[0], seed_x[1])
        .into_iter()
        .filter(|&b| b > seed_x[0] + 1e-15 && b < seed_x[1] - 1e-15)
        .collect();
    if !inner.is_empty() {
        let (a, b) = (seed_x[0], seed_x[1]);
        let (fa, fb) = (seed_f[0], seed_f[1]);
        let mut xs = vec![a];
        xs.extend(inner);
        xs.push(b);
        xs.dedup_by(|p, q| (*p - *q).abs() < 1e-15 * width.max(1.0));
        let fs: Vec<f64> = xs.iter().map(|&x| fa + (x - a) * (fb - fa) / (b - a)).collect();
        seed_x = xs;
        seed_f = fs;
    }

    let hinv = h.inverse();
    // Rightward cells increment F by 1 per step; leftward decrement.
    let right_map = if s > 0.0 { h } else { &hinv };
    let left_map = if s > 0.0 { &hinv } else { h };

    let extend = |step: &PLMap, back: &PLMap, df: f64, seed_x: &[f64], seed_f: &[f64]| {
        let mut cells: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let mut cx = seed_x.to_vec();
        let mut cf = seed_f.to_vec();
        for _ in 0..MAX_STEPS {
            let nx: Vec<f64> = cx.iter().map(|&x| step.eval(x)).collect();
            let nf: Vec<f64> = cf.iter().map(|&f| f + df).collect();
            let (a, b) = (nx[0], *nx.last().unwrap());
            if !(a < b) || b - a < 1e-16 * width {
                break;
            }
            // F on the new cell is F ∘ back + df, so its kinks sit at the
            // kinks of `back` there; they get their F value from the
            // previous cell.
            let mut mx = nx.clone();
            let mut mf = nf.clone();
            for z in back.breakpoints_in(a, b) {
                if z > a + 1e-15 * width && z < b - 1e-15 * width {
                    mx.push(z);
                    mf.push(interp(&cx, &cf, back.eval(z)) + df);
                }
            }
            let mut idx: Vec<usize> = (0..mx.len()).collect();
            idx.sort_by(|&i, &j| mx[i].partial_cmp(&mx[j]).unwrap());
            let sx: Vec<f64> = idx.iter().map(|&i| mx[i]).collect();
            let sf: Vec<f64> = idx.iter().map(|&i| mf[i]).collect();
            cells.push((sx.clone(), sf.clone()));
            cx = sx;
            cf = sf;
        }
        cells
    };

    let right_cells = extend(right_map, left_map, 1.0, &seed_x, &seed_f);
    let left_cells = extend(left_map, right_map, -1.0, &seed_x, &seed_f);

    let mut xs: Vec<f64> = Vec::new();
    let mut fs: Vec<f64> = Vec::new();
    for (cx, cf) in left_cells.iter().rev() {
        for (i, &x) in cx.iter().enumerate() {
            xs.push(x);
            fs.push(cf[i]);
        }
    }
    for (i, &x) in seed_x.iter().enumerate() {
        xs.push(x);
        fs.push(seed_f[i]);
    }
    for (cx, cf) in &right_cells {
        for (i, &x) in cx.iter().enumerate() {
            xs.push(x);
            fs.push(cf[i]);
        }
    }
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap());
    let sx: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let sf: Vec<f64> = idx.iter().map(|&i| fs[i]).collect();
    // Adjacent cells contribute duplicate samples at their shared boundary.
    // The cumulative's slope blows up toward the fixed endpoints, so the two
    // copies can disagree by slope times an ulp; keep the first copy and only
    // reject decreases at genuinely distinct abscissae.
    let mut cx: Vec<f64> = Vec::with_capacity(sx.len());
    let mut cf: Vec<f64> = Vec::with_capacity(sf.len());
    for (x, f) in sx.into_iter().zip(sf.into_iter()) {
        if let (Some(&px), Some(&pf)) = (cx.last(), cf.last()) {
            if x - px <= 1e-13 || (f - pf).abs() <= 1e-13 * pf.abs().max(1.0) {
                // Either a duplicate boundary sample or an increment too
                // small to resolve at this magnitude; skip to keep the
                // cumulative strictly increasing.
                continue;
            }
            if f <= pf {
                return Err(HomeoError::NonMonotone(format!(
                    "cumulative at x={x}: previous ({px}, {pf}), current ({x}, {f})"
                )));
            }
        }
        cx.push(x);
        cf.push(f);
    }
    let (sx, sf) = (cx, cf);
    if sx.len() < 2 {
        return Err(HomeoError::Construction("degenerate cumulative function".into()));
    }
    Ok(Cumulative { xs: sx, fs: sf, lo: cl, hi: cr, s })
}

/// Breakpoint data of `h^t` on one component.
fn component_power(h: &PLMap, cl: f64, cr: f64, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let cum = build_cumulative(h, cl, cr)?;
    let tau = t * cum.s;
    let mut xs: Vec<f64> = cum.xs.clone();
    // Preimages of the cumulative breakpoints under the translated map, so
    // the result has breakpoints wherever its graph can bend.
    for &f in &cum.fs {
        let x = cum.eval_inv(f - tau);
        if x > cl && x < cr {
            xs.push(x);
        }
    }
    xs.retain(|&x| x > cl && x < cr);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * (cr - cl).max(1.0));
    let mut bx = vec![cl];
    let mut by = vec![cl];
    for &x in &xs {
        bx.push(x);
        by.push(cum.eval_inv(cum.eval(x) + tau));
    }
    bx.push(cr);
    by.push(cr);
    nudge_strict(&mut by);
    sanitize_monotone(bx, by, 1e-12)
}

/// Resolves value ties produced by boundary clamping while keeping the
/// endpoint pins exact: ties near the right end are pushed down from the
/// pin, ties near the left end up from it.
fn nudge_strict(by: &mut [f64]) {
    let n = by.len();
    if n < 3 {
        return;
    }
    for i in (1..n - 1).rev() {
        if by[i] >= by[i + 1] {
            by[i] = by[i + 1].next_down();
        }
    }
    for i in 1..n - 1 {
        if by[i] <= by[i - 1] {
            by[i] = by[i - 1].next_up();
        }
    }
}

/// Splits a support component at interior fixed points of `h`, so each
/// returned piece is `h`-invariant with one-signed displacement.
fn split_at_fixed_points(h: &PLMap, cl: f64, cr: f64) -> Vec<(f64, f64)> {
    let tol = 1e-13 * (cr - cl).max(1.0);
    let mut nodes = vec![cl];
    nodes.extend(h.breakpoints_in(cl, cr).into_iter().filter(|&b| b > cl && b < cr));
    nodes.push(cr);
    let mut cuts = vec![cl];
    for w in nodes.windows(2) {
        let (u, v) = (w[0], w[1]);
        let du = h.eval(u) - u;
        let dv = h.eval(v) - v;
        if v < cr - tol && dv.abs() <= tol {
            cuts.push(v);
        } else if (du > tol && dv < -tol) || (du < -tol && dv > tol) {
            let x = u + du * (v - u) / (du - dv);
            if x > *cuts.last().unwrap() + tol && x < cr - tol {
                cuts.push(x);
            }
        }
    }
    cuts.push(cr);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// The canonical `t`-th power of a compactly supported or periodic map, via
/// the invariant-measure conjugation on each support component.
pub fn fractional_power(h: &PLMap, t: f64) -> Result<PLMap> {
    if t == 1.0 {
        return Ok(h.clone());
    }
    let comps: Vec<(f64, f64)> = h
        .support_components()?
        .into_iter()
        .flat_map(|(cl, cr)| split_at_fixed_points(h, cl, cr))
        .collect();
    if comps.is_empty() {
        return Ok(h.clone());
    }
    match h.extension() {
        Extension::IdentityOutside => {
            let mut bx = Vec::new();
            let mut by = Vec::new();
            for &(cl, cr) in &comps {
                let (cx, cy) = component_power(h, cl, cr, t)?;
                append_component(&mut bx, &mut by, cx, cy);
            }
            PLMap::new(bx, by, Extension::IdentityOutside)
        }
        Extension::Periodic { period, image_period } if period == image_period => {
            // `support_components` anchored its cell at a fixed breakpoint,
            // so the components fit inside [comps[0].0, comps[0].0 + period].
            let cell_lo = comps[0].0;
            let mut bx = vec![cell_lo];
            let mut by = vec![cell_lo];
            for &(cl, cr) in &comps {
                let (cx, cy) = component_power(h, cl, cr, t)?;
                append_component(&mut bx, &mut by, cx, cy);
            }
            let end = cell_lo + period;
            if end - *bx.last().unwrap() > 1e-13 {
                bx.push(end);
                by.push(end);
            }
            let (bx, by) = sanitize_monotone(bx, by, 1e-12)?;
            PLMap::new(bx, by, Extension::Periodic { period, image_period })
        }
        _ => Err(HomeoError::Precondition(
            "fractional powers need identity-outside or translation-commuting maps".into(),
        )),
    }
}

/// Appends one component's breakpoint data, merging the shared endpoint pin.
fn append_component(bx: &mut Vec<f64>, by: &mut Vec<f64>, cx: Vec<f64>, cy: Vec<f64>) {
    for (x, y) in cx.into_iter().zip(cy.into_iter()) {
        if let Some(&last) = bx.last() {
            // Adjacent components share their boundary pin exactly; drop the
            // duplicate rather than widening into a slack window, since orbit
            // cells near a fixed endpoint can be arbitrarily tightly spaced.
            if x <= last {
                continue;
            }
        }
        bx.push(x);
        by.push(y);
    }
}

/// The canonical square root: `two_root(h) . two_root(h) == h`.
pub fn two_root(h: &PLMap) -> Result<PLMap> {
    fractional_power(h, 0.5)
}

/// The canonical `2^n`-th root.
pub fn nth_two_root(h: &PLMap, n: u32) -> Result<PLMap> {
    fractional_power(h, 0.5f64.powi(n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> PLMap {
        // Supported on (0, 1) with h(1/2) = 3/4.
        PLMap::new(
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.75, 1.0],
            Extension::IdentityOutside,
        )
        .unwrap()
    }

    #[test]
    fn identity_root_is_identity() {
        let id = PLMap::identity();
        let r = two_root(&id).unwrap();
        for i in 0..=20 {
            let x = -1.0 + 0.15 * i as f64;
            assert_eq!(r.eval(x), x);
        }
    }

    #[test]
    fn canonical_half_step_of_single_bump() {
        // With the uniform seed measure on [1/2, 3/4), the half step from
        // the midpoint lands at 5/8.
        let r = two_root(&bump()).unwrap();
        assert!((r.eval(0.5) - 0.625).abs() < 1e-12);
        assert!((r.eval(r.eval(0.5)) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn root_squares_back_to_the_map() {
        let h = bump();
        let r = two_root(&h).unwrap();
        for i in 0..=2048 {
            let x = i as f64 / 2048.0;
            let rr = r.eval(r.eval(x));
            assert!((rr - h.eval(x)).abs() < 1e-9, "x={x}, err={}", (rr - h.eval(x)).abs());
        }
    }

    #[test]
    fn nth_root_composes_back() {
        let h = bump();
        let r = nth_two_root(&h, 3).unwrap();
        for i in 0..=512 {
            let x = i as f64 / 512.0;
            let mut y = x;
            for _ in 0..8 {
                y = r.eval(y);
            }
            assert!((y - h.eval(x)).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn integer_powers_match_composition() {
        let h = bump();
        let h4 = fractional_power(&h, 4.0).unwrap();
        for i in 0..=512 {
            let x = i as f64 / 512.0;
            let mut y = x;
            for _ in 0..4 {
                y = h.eval(y);
            }
            assert!((h4.eval(x) - y).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn power_group_law() {
        let h = bump();
        let a = fractional_power(&h, 0.25).unwrap();
        let b = fractional_power(&h, 0.75).unwrap();
        for i in 0..=256 {
            let x = i as f64 / 256.0;
            assert!((a.eval(b.eval(x)) - h.eval(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn huge_powers_clamp_toward_the_boundary() {
        let h = bump();
        let big = fractional_power(&h, 2f64.powi(40)).unwrap();
        // Interior points are pushed essentially to the right endpoint.
        assert!(big.eval(0.5) > 1.0 - 1e-9);
        assert!(big.eval(0.5) <= 1.0);
    }

    #[test]
    fn multi_component_supports() {
        let h = PLMap::new(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![0.0, 0.30, 0.5, 0.80, 1.0],
            Extension::IdentityOutside,
        )
        .unwrap();
        let r = two_root(&h).unwrap();
        for i in 0..=1024 {
            let x = i as f64 / 1024.0;
            assert!((r.eval(r.eval(x)) - h.eval(x)).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn reversed_bump_also_roots() {
        // A component where the midpoint moves left.
        let h = PLMap::new(
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.3, 1.0],
            Extension::IdentityOutside,
        )
        .unwrap();
        let r = two_root(&h).unwrap();
        for i in 0..=1024 {
            let x = i as f64 / 1024.0;
            assert!((r.eval(r.eval(x)) - h.eval(x)).abs() < 1e-9, "x={x}");
        }
    }
}
