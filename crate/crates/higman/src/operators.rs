//! The two extension operators.
//!
//! Given a conjugator f, a region I moved off itself by f, and a map h
//! supported on I, the first operator spreads h over the orbit tiles f^k(I)
//! as f^k ∘ h^(2^-k) ∘ f^-k; the resulting map g equals h on I, is the
//! identity off the tiles, and satisfies f g f⁻¹ = g². The second operator
//! sends a map h supported on the island union 𝓘₀ to a₀ ∘ h₁, where h₁
//! spreads h over the b-orbit tiles bⁿ(𝓘₀) with the same core map on every
//! tile; the result agrees with h on 𝓘₀, with a₀ on the pinned set 𝓜₀, and
//! conjugates b to b². Restricting inputs to the extension domain (maps
//! pinned to a₀ on 𝓜₀ that preserve 𝓘₀) makes the second operator an
//! isometry and the first a ½-Lipschitz contraction toward the fixed point
//! of the alternating iteration.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{HomeoError, Result};
use crate::homeo::interval::OpenSet;
use crate::homeo::lazy::{LazyHomeo, Locator, TileRule, TiledNode};
use crate::homeo::plmap::{Extension, PLMap};
use crate::homeo::root::fractional_power;
use crate::seed::SeedBundle;

/// Everything one side (a/b vs c/d) of the construction needs: the seed,
/// the island union it is supported off, and the two ping-pong generators
/// in their roles as tile conjugators.
#[derive(Debug, Clone)]
pub struct Side {
    /// Seed map (a₀ on the a-side, c₀ on the c-side).
    pub seed: PLMap,
    /// Conjugator for the island tiles (b resp. d).
    pub conj: PLMap,
    /// Conjugator for the complement tiles (d resp. b).
    pub ping: PLMap,
    /// Island union the seed is the identity on (𝓘₀ resp. 𝓘₁).
    pub island: OpenSet,
    /// The other island union, where the island tiles with k ≠ 0 live.
    pub other: OpenSet,
    /// Open complement of the pinned set (𝓜₀ resp. 𝓜₁).
    pub moff: OpenSet,
}

impl Side {
    pub fn a_side(s: &SeedBundle) -> Side {
        Side {
            seed: s.a0.clone(),
            conj: s.b.clone(),
            ping: s.d.clone(),
            island: s.iset0.clone(),
            other: s.iset1.clone(),
            moff: s.mset0.clone(),
        }
    }

    /// The construction with the roles of b and d exchanged.
    pub fn c_side(s: &SeedBundle) -> Side {
        Side {
            seed: s.c0.clone(),
            conj: s.d.clone(),
            ping: s.b.clone(),
            island: s.iset1.clone(),
            other: s.iset0.clone(),
            moff: s.mset1.clone(),
        }
    }
}

/// Tolerance for the pointwise pinning checks below.
const PIN_TOL: f64 = 1e-9;

/// The restriction of `f` to `keep`: agrees with `f` on `keep`, identity
/// elsewhere, extended with the shared period. Requires `f` to fix the
/// component endpoints of `keep` (within a strict tolerance), which is what
/// setwise preservation of `keep` means for an increasing map.
pub fn restrict(f: &PLMap, keep: &OpenSet) -> Result<PLMap> {
    let period = keep
        .period()
        .ok_or_else(|| HomeoError::Precondition("restriction needs a periodic region".into()))?;
    let anchor = keep.intervals()[0].0;
    let mut bx = Vec::new();
    let mut by = Vec::new();
    for (u, v) in keep.components_in(anchor, anchor + period) {
        if (f.eval(u) - u).abs() > PIN_TOL || (f.eval(v) - v).abs() > PIN_TOL {
            return Err(HomeoError::Precondition(format!(
                "map moves the component boundary ({u}, {v})"
            )));
        }
        bx.push(u);
        by.push(u);
        for x in f.breakpoints_in(u, v) {
            if x > u + 1e-13 && x < v - 1e-13 {
                bx.push(x);
                by.push(f.eval(x));
            }
        }
        bx.push(v);
        by.push(v);
    }
    bx.push(anchor + period);
    by.push(by[0] + period);
    let (bx, by) = crate::homeo::plmap::sanitize_monotone(bx, by, 1e-12)?;
    PLMap::new(bx, by, Extension::Periodic { period, image_period: period })
}

/// Check that `f` maps every component of `i` (over one period) off the
/// whole of `i`.
fn check_moves_off(f: &PLMap, i: &OpenSet) -> Result<()> {
    let period = i.period().unwrap_or(0.0);
    let anchor = i.intervals()[0].0;
    let hi = if period > 0.0 { anchor + period } else { f64::INFINITY };
    for (u, v) in i.components_in(anchor, hi.min(anchor + 64.0)) {
        let (a, b) = (f.eval(u), f.eval(v));
        if i.contains(a) || i.contains(b) || !i.endpoints_in(a, b).is_empty() {
            return Err(HomeoError::Precondition(format!(
                "conjugator does not move ({u}, {v}) off the region"
            )));
        }
    }
    Ok(())
}

/// First extension operator: spread `h` (supported on `i`, preserving each
/// component) over the orbit tiles of the conjugator `f`. On the tile
/// f^k(i) the result is f^k ∘ h^(2^-k) ∘ f^-k, so that f g f⁻¹ = g²; off
/// the orbit it is the identity. The dyadic powers are taken through one
/// shared invariant-measure conjugation per support component, which makes
/// the square-root group law exact to float precision.
pub fn r1_extend(
    f: &PLMap,
    i: &OpenSet,
    h: &PLMap,
    hull: Option<OpenSet>,
) -> Result<LazyHomeo> {
    check_moves_off(f, i)?;
    let h = restrict(h, i)?; // also certifies component preservation
    let cache: Mutex<HashMap<i64, LazyHomeo>> = Mutex::new(HashMap::new());
    let rule = TileRule::Indexed(Arc::new(move |k: i64| {
        if k.unsigned_abs() > 512 {
            return Err(HomeoError::BudgetExhausted(format!("tile index {k} out of range")));
        }
        let mut cache = cache.lock().expect("tile cache poisoned");
        if let Some(m) = cache.get(&k) {
            return Ok(m.clone());
        }
        let m = LazyHomeo::atom(fractional_power(&h, f64::exp2(-(k as f64)))?);
        cache.insert(k, m.clone());
        Ok(m)
    }));
    let node = TiledNode {
        conjugator: LazyHomeo::atom(f.clone()),
        base: i.clone(),
        rule,
        locator: Locator::Search,
        hull,
    };
    let period = i.period();
    Ok(LazyHomeo::tiled(node, period))
}

/// Second extension operator: for `h` supported on the island union, build
/// h₁ = ∏ₙ bⁿ h b⁻ⁿ (each point lies in at most one tile since the islands
/// are moved off themselves) and return a₀ ∘ h₁.
pub fn r2_extend(h: &PLMap, side: &Side) -> Result<LazyHomeo> {
    check_moves_off(&side.conj, &side.island)?;
    let h = restrict(h, &side.island)?;
    let node = TiledNode {
        conjugator: LazyHomeo::atom(side.conj.clone()),
        base: side.island.clone(),
        rule: TileRule::Constant(LazyHomeo::atom(h)),
        locator: Locator::Search,
        // Tiles with k != 0 lie inside the other island union.
        hull: Some(side.other.clone()),
    };
    let h1 = LazyHomeo::tiled(node, side.island.period());
    Ok(LazyHomeo::compose(vec![LazyHomeo::atom(side.seed.clone()), h1]))
}

/// A certified element of the extension domain: pinned to the seed on the
/// minimal set and preserving the island union.
#[derive(Debug, Clone)]
pub struct Dom0Element {
    pub map: PLMap,
    pub agrees_on_pinned_set: bool,
    pub preserves_islands: bool,
}

/// Sample points of the pinned set 𝓜: the endpoints and midpoints of the
/// complement gaps of `moff`, over one period.
fn pinned_samples(side: &Side) -> Result<Vec<f64>> {
    let gaps = side.moff.complement_gaps()?;
    let anchor = side.moff.intervals()[0].0;
    let period = side.moff.period().unwrap_or(2.0);
    let mut out = Vec::new();
    for (u, v) in gaps.components_in(anchor, anchor + period) {
        out.push(u);
        out.push(0.5 * (u + v));
        out.push(v);
    }
    Ok(out)
}

/// Certify membership of `f` in the extension domain for this side.
pub fn certify(side: &Side, f: &PLMap) -> Result<Dom0Element> {
    let mut agrees = true;
    for x in pinned_samples(side)? {
        if (f.eval(x) - side.seed.eval(x)).abs() > PIN_TOL {
            agrees = false;
            break;
        }
    }
    let anchor = side.island.intervals()[0].0;
    let period = side.island.period().unwrap_or(2.0);
    let mut preserves = true;
    for (u, v) in side.island.components_in(anchor, anchor + period) {
        if (f.eval(u) - u).abs() > PIN_TOL || (f.eval(v) - v).abs() > PIN_TOL {
            preserves = false;
            break;
        }
    }
    if !(agrees && preserves) {
        return Err(HomeoError::Precondition(format!(
            "not in the extension domain: pinned={agrees}, islands={preserves}"
        )));
    }
    Ok(Dom0Element { map: f.clone(), agrees_on_pinned_set: agrees, preserves_islands: preserves })
}

/// Restricted second operator: replace `f` by the extension of its island
/// restriction. Fixed points of the alternating iteration satisfy the
/// b-side conjugation relation.
pub fn tilde_r2(side: &Side, f: &Dom0Element) -> Result<LazyHomeo> {
    let h = restrict(&f.map, &side.island)?;
    r2_extend(&h, side)
}

/// Restricted first operator: spread the complement restriction of `f`
/// along the orbit of the other ping-pong generator. All tiles with k ≠ 0
/// land inside the island union, by the ping-pong inclusion.
pub fn tilde_r1(side: &Side, f: &Dom0Element) -> Result<LazyHomeo> {
    let comp = side.island.complement_gaps()?;
    let h = restrict(&f.map, &comp)?;
    r1_extend(&side.ping, &comp, &h, Some(side.island.clone()))
}

/// A random monotone bump supported strictly inside `(u, v)`, used to build
/// test perturbations of the extension domain.
pub fn random_bump<R: rand::Rng>(u: f64, v: f64, rng: &mut R) -> PLMap {
    let w = v - u;
    let mut bx = vec![u];
    let mut by = vec![u];
    for t in [0.25, 0.5, 0.75] {
        let x = u + t * w;
        let dy: f64 = rng.gen_range(-0.1..0.1) * w;
        bx.push(x);
        by.push(x + dy);
    }
    bx.push(v);
    by.push(v);
    PLMap::new(bx, by, Extension::IdentityOutside).expect("bump data is monotone")
}

/// Perturb the side's seed by random bumps inside `count` components of the
/// unpinned region (the complement of 𝓜 minus the island core), repeated
/// periodically so the result stays in the extension domain.
pub fn perturb_seed<R: rand::Rng>(side: &Side, count: usize, rng: &mut R) -> Result<PLMap> {
    let anchor = side.moff.intervals()[0].0;
    let period = side.moff.period().unwrap_or(2.0);
    let comps: Vec<(f64, f64)> = side
        .moff
        .components_in(anchor, anchor + period)
        .into_iter()
        .filter(|&(u, v)| v - u > 1e-4)
        .collect();
    if comps.is_empty() {
        return Err(HomeoError::Precondition("no room to perturb".into()));
    }
    let mut acc = side.seed.clone();
    for _ in 0..count {
        let &(u, v) = &comps[rng.gen_range(0..comps.len())];
        // Keep the bump strictly interior so the component endpoints
        // (which belong to the pinned set) stay fixed.
        let (bu, bv) = (u + 0.2 * (v - u), v - 0.2 * (v - u));
        let bump = random_bump(bu, bv, rng);
        let periodic = bump_periodized(&bump, anchor - 1e-3, period)?;
        acc = PLMap::compose(&acc, &periodic)?;
    }
    Ok(acc)
}

/// Repeat an identity-outside bump with the given period, anchoring the
/// cell at `anchor` (which must be outside the bump's support).
fn bump_periodized(bump: &PLMap, anchor: f64, period: f64) -> Result<PLMap> {
    let mut bx = vec![anchor];
    let mut by = vec![anchor];
    for x in bump.breakpoints_in(anchor, anchor + period) {
        if x > anchor + 1e-12 && x < anchor + period - 1e-12 {
            bx.push(x);
            by.push(bump.eval(x));
        }
    }
    bx.push(anchor + period);
    by.push(anchor + period);
    PLMap::new(bx, by, Extension::Periodic { period, image_period: period })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denjoy::{build_blowup, BlowupConfig};
    use crate::homeo::lazy::{compact, EvalBudget, Frame};
    use crate::homeo::metric::sup_dist_pl;
    use crate::seed::build_seed;
    use once_cell::sync::Lazy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    static SEED: Lazy<SeedBundle> = Lazy::new(|| {
        let dj = build_blowup(&BlowupConfig::default()).unwrap();
        build_seed(&dj).unwrap()
    });

    fn budget() -> EvalBudget {
        EvalBudget::default()
    }

    fn compact_periodic(g: &LazyHomeo, anchor: f64, eps: f64) -> PLMap {
        compact(g, eps, Frame::periodic(anchor, 2.0), &[], &budget()).unwrap()
    }

    /// sup over a grid of |w(x) - x| for w = f g f⁻¹ g⁻².
    fn conj_residual(f: &LazyHomeo, g: &LazyHomeo) -> f64 {
        let b = budget();
        let mut worst: f64 = 0.0;
        for i in 0..=4096 {
            let x = -1.0 + 2.0 * i as f64 / 4096.0;
            let lhs = f.eval(g.eval(f.eval_inv(x, &b).unwrap(), &b).unwrap(), &b).unwrap();
            let rhs = g.eval(g.eval(x, &b).unwrap(), &b).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }

    #[test]
    fn r1_of_identity_is_the_identity() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let comp = side.island.complement_gaps().unwrap();
        let g = r1_extend(&side.ping, &comp, &PLMap::identity(), Some(side.island.clone()))
            .unwrap();
        let b = budget();
        for i in 0..=257 {
            let x = -2.0 + 4.0 * i as f64 / 257.0;
            assert!((g.eval(x, &b).unwrap() - x).abs() < 1e-12);
        }
    }

    #[test]
    fn r1_matches_the_core_map_on_the_base_tile() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let comp = side.island.complement_gaps().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = perturb_seed(&side, 3, &mut rng).unwrap();
        let h = restrict(&f, &comp).unwrap();
        let g = r1_extend(&side.ping, &comp, &h, Some(side.island.clone())).unwrap();
        let b = budget();
        let (u, v) = comp.components_in(-1.0, 1.5)[0];
        for i in 1..64 {
            let x = u + (v - u) * i as f64 / 64.0;
            assert!((g.eval(x, &b).unwrap() - h.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn r1_satisfies_the_doubling_relation() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = perturb_seed(&side, 2, &mut rng).unwrap();
        let g = tilde_r1(&side, &certify(&side, &f).unwrap()).unwrap();
        let d = LazyHomeo::atom(side.ping.clone());
        assert!(conj_residual(&d, &g) < 1e-8);
    }

    #[test]
    fn r2_of_identity_is_the_seed() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let a_h = r2_extend(&PLMap::identity(), &side).unwrap();
        let b = budget();
        for i in 0..=513 {
            let x = -2.0 + 4.0 * i as f64 / 513.0;
            assert!((a_h.eval(x, &b).unwrap() - side.seed.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn r2_matches_the_core_map_on_the_islands() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // A bump inside the island keeps the islands invariant, so the
        // perturbation is itself an admissible core map there.
        let (u, v) = (s.i0.0, s.i0.1);
        let bump = random_bump(u + 0.1 * (v - u), v - 0.1 * (v - u), &mut rng);
        let h = bump_periodized(&bump, u - 1e-3, 2.0).unwrap();
        let a_h = r2_extend(&h, &side).unwrap();
        let b = budget();
        for i in 1..64 {
            let x = u + (v - u) * i as f64 / 64.0;
            // a₀ is the identity on the island, so a_h = h there.
            assert!((a_h.eval(x, &b).unwrap() - h.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn r2_satisfies_the_doubling_relation() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = perturb_seed(&side, 2, &mut rng).unwrap();
        let a_h = tilde_r2(&side, &certify(&side, &f).unwrap()).unwrap();
        let bmap = LazyHomeo::atom(side.conj.clone());
        assert!(conj_residual(&a_h, &bmap) < 1e-8);
    }

    #[test]
    fn r2_is_an_isometry() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = budget();
        for _ in 0..3 {
            let f = perturb_seed(&side, 2, &mut rng).unwrap();
            let g = perturb_seed(&side, 2, &mut rng).unwrap();
            let rf = compact_periodic(&tilde_r2(&side, &certify(&side, &f).unwrap()).unwrap(), -1.0, 1e-11);
            let rg = compact_periodic(&tilde_r2(&side, &certify(&side, &g).unwrap()).unwrap(), -1.0, 1e-11);
            let lhs = sup_dist_pl(&rf, &rg, 4096, &b).unwrap();
            let fr = restrict(&f, &side.island).unwrap();
            let gr = restrict(&g, &side.island).unwrap();
            let rhs = sup_dist_pl(&fr, &gr, 4096, &b).unwrap();
            assert!((lhs - rhs).abs() < 1e-9, "lhs={lhs} rhs={rhs}");
        }
    }

    #[test]
    fn r1_contracts_by_a_half_on_the_islands() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let comp = side.island.complement_gaps().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let b = budget();
        for _ in 0..5 {
            let f = perturb_seed(&side, 2, &mut rng).unwrap();
            let g = perturb_seed(&side, 2, &mut rng).unwrap();
            let rf = compact_periodic(&tilde_r1(&side, &certify(&side, &f).unwrap()).unwrap(), -1.0, 1e-11);
            let rg = compact_periodic(&tilde_r1(&side, &certify(&side, &g).unwrap()).unwrap(), -1.0, 1e-11);
            // Mask both sides to the relevant regions before comparing.
            let lhs = sup_dist_pl(
                &restrict(&rf, &side.island).unwrap(),
                &restrict(&rg, &side.island).unwrap(),
                4096,
                &b,
            )
            .unwrap();
            let rhs = sup_dist_pl(
                &restrict(&f, &comp).unwrap(),
                &restrict(&g, &comp).unwrap(),
                4096,
                &b,
            )
            .unwrap();
            assert!(lhs <= 0.5 * rhs + 1e-9, "lhs={lhs} rhs={rhs}");
        }
    }

    #[test]
    fn tilde_r2_is_idempotent() {
        let s = &*SEED;
        let side = Side::a_side(s);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f = perturb_seed(&side, 2, &mut rng).unwrap();
        let once = compact_periodic(&tilde_r2(&side, &certify(&side, &f).unwrap()).unwrap(), -1.0, 1e-11);
        let twice =
            compact_periodic(&tilde_r2(&side, &certify(&side, &once).unwrap()).unwrap(), -1.0, 1e-11);
        let dist = sup_dist_pl(&once, &twice, 4096, &budget()).unwrap();
        assert!(dist < 1e-9, "idempotence defect {dist}");
    }

    #[test]
    fn swapped_side_smoke() {
        let s = &*SEED;
        let side = Side::c_side(s);
        let a_h = r2_extend(&PLMap::identity(), &side).unwrap();
        let b = budget();
        for i in 0..=129 {
            let x = -2.0 + 4.0 * i as f64 / 129.0;
            assert!((a_h.eval(x, &b).unwrap() - side.seed.eval(x)).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let f = perturb_seed(&side, 2, &mut rng).unwrap();
        let g = tilde_r1(&side, &certify(&side, &f).unwrap()).unwrap();
        let c = LazyHomeo::atom(side.ping.clone());
        assert!(conj_residual(&c, &g) < 1e-8);
    }
}

