//! The bi-uniform distance `sup|f - g| + sup|f^{-1} - g^{-1}|`.

use crate::error::{HomeoError, Result};
use crate::homeo::lazy::{EvalBudget, LazyHomeo};
use crate::homeo::plmap::PLMap;

/// Distance between two maps commuting with a common translation, measured
/// over one fundamental domain.  Samples a uniform grid plus both maps'
/// harvested breakpoints; since a difference of PL maps is PL, breakpoint
/// sampling makes the result exact for materialised maps.
pub fn sup_dist(f: &LazyHomeo, g: &LazyHomeo, grid: usize, budget: &EvalBudget) -> Result<f64> {
    let p = match (f.declared_period(), g.declared_period()) {
        (Some(p), Some(q)) if (p - q).abs() < 1e-12 => p,
        _ => return Err(HomeoError::NotPeriodic),
    };
    let fwd = directed(f, g, 0.0, p, grid, budget, false)?;
    let y0 = f.eval(0.0, budget)?;
    let inv = directed(f, g, y0 - p, y0 + p, grid, budget, true)?;
    Ok(fwd + inv)
}

/// Same distance restricted to a window, for maps without a common period.
pub fn sup_dist_window(
    f: &LazyHomeo,
    g: &LazyHomeo,
    lo: f64,
    hi: f64,
    grid: usize,
    budget: &EvalBudget,
) -> Result<f64> {
    let fwd = directed(f, g, lo, hi, grid, budget, false)?;
    let inv = directed(f, g, lo, hi, grid, budget, true)?;
    Ok(fwd + inv)
}

fn directed(
    f: &LazyHomeo,
    g: &LazyHomeo,
    lo: f64,
    hi: f64,
    grid: usize,
    budget: &EvalBudget,
    inv: bool,
) -> Result<f64> {
    let mut xs: Vec<f64> = (0..=grid).map(|i| lo + (hi - lo) * i as f64 / grid as f64).collect();
    let min_gap = (hi - lo) * 1e-12;
    if inv {
        f.inverse().harvest(lo, hi, min_gap, budget, &mut xs);
        g.inverse().harvest(lo, hi, min_gap, budget, &mut xs);
    } else {
        f.harvest(lo, hi, min_gap, budget, &mut xs);
        g.harvest(lo, hi, min_gap, budget, &mut xs);
    }
    let mut best = 0.0f64;
    for x in xs {
        if !(lo..=hi).contains(&x) {
            continue;
        }
        let (a, b) = if inv {
            (f.eval_inv(x, budget)?, g.eval_inv(x, budget)?)
        } else {
            (f.eval(x, budget)?, g.eval(x, budget)?)
        };
        best = best.max((a - b).abs());
    }
    Ok(best)
}

/// Convenience wrapper for materialised maps.
pub fn sup_dist_pl(f: &PLMap, g: &PLMap, grid: usize, budget: &EvalBudget) -> Result<f64> {
    sup_dist(&LazyHomeo::atom(f.clone()), &LazyHomeo::atom(g.clone()), grid, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homeo::plmap::Extension;

    #[test]
    fn identical_maps_have_zero_distance() {
        let f = PLMap::new(
            vec![0.0, 0.7, 2.0],
            vec![0.0, 1.1, 2.0],
            Extension::Periodic { period: 2.0, image_period: 2.0 },
        )
        .unwrap();
        let d = sup_dist_pl(&f, &f, 256, &EvalBudget::default()).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn translation_against_identity() {
        // |T_d - id| = d for the forward term and d for the inverse term.
        let delta = 0.125;
        let t = PLMap::new(
            vec![0.0, 2.0],
            vec![delta, 2.0 + delta],
            Extension::Periodic { period: 2.0, image_period: 2.0 },
        )
        .unwrap();
        let id = PLMap::new(
            vec![0.0, 2.0],
            vec![0.0, 2.0],
            Extension::Periodic { period: 2.0, image_period: 2.0 },
        )
        .unwrap();
        let d = sup_dist_pl(&t, &id, 128, &EvalBudget::default()).unwrap();
        assert!((d - 2.0 * delta).abs() < 1e-12);
    }

    #[test]
    fn refuses_non_periodic_maps() {
        let f = LazyHomeo::atom(PLMap::identity());
        let err = sup_dist(&f, &f, 16, &EvalBudget::default());
        assert!(matches!(err, Err(HomeoError::NotPeriodic)));
    }

    #[test]
    fn symmetric_and_triangle_on_samples() {
        let b = EvalBudget::default();
        let mk = |v: f64| {
            PLMap::new(
                vec![0.0, 1.0, 2.0],
                vec![0.0, v, 2.0],
                Extension::Periodic { period: 2.0, image_period: 2.0 },
            )
            .unwrap()
        };
        let (f, g, h) = (mk(0.9), mk(1.1), mk(1.3));
        let dfg = sup_dist_pl(&f, &g, 256, &b).unwrap();
        let dgf = sup_dist_pl(&g, &f, 256, &b).unwrap();
        let dfh = sup_dist_pl(&f, &h, 256, &b).unwrap();
        let dgh = sup_dist_pl(&g, &h, 256, &b).unwrap();
        assert!((dfg - dgf).abs() < 1e-12);
        assert!(dfh <= dfg + dgh + 1e-12);
    }
}
