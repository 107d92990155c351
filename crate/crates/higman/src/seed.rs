//! Seed maps for the ping-pong construction.
//!
//! The compression map ψ sends the blown-up line into (-1, 1): it is the
//! piecewise-linear interpolation of ψ(n) = ±(1 - 2^{-|n|}) at the integers.
//! Conjugating the translation ḡ by ψ and extending 2-periodically gives
//! β₀, whose powers pile the complement of the odd-integer islands 𝓘₁ into
//! 𝓘₁; b = β₀^N for the first N where the pile-up and a slope bound of 1/2
//! hold on a verification horizon. β₁, d, and the islands 𝓘₀ around the
//! even integers are the unit translates of the β₀ picture.
//!
//! Conjugating the doubling map f̄ by ψ in the same way gives the seed a₀
//! (and its translate c₀), which satisfies a₀ b a₀⁻¹ = b² because f̄
//! conjugates ḡ to ḡ². Both β₀ and a₀ are exactly piecewise linear: β₀
//! collapses to four segments per period, and a₀'s breakpoint set is the
//! ψ-image of the f̄ breakpoints together with the kink pull-backs of ψ
//! itself, so the only truncation happens below float resolution near the
//! odd integers, where the quadratic tangency of a₀ damps it out.

use serde::Serialize;

use crate::denjoy::DenjoyModel;
use crate::error::{HomeoError, Result};
use crate::homeo::interval::OpenSet;
use crate::homeo::plmap::{sanitize_monotone, Extension, PLMap};

/// ψ evaluated exactly: linear on every [n, n+1] with ψ(n) = 1 - 2^{-n} for
/// n ≥ 0, extended as an odd function.
pub fn psi_val(x: f64) -> f64 {
    if x < 0.0 {
        return -psi_val(-x);
    }
    let n = x.floor();
    let scale = f64::exp2(-(n + 1.0));
    (1.0 - 2.0 * scale) + (x - n) * scale
}

/// Exact inverse of `psi_val` on (-1, 1).
pub fn psi_inv(y: f64) -> f64 {
    if y < 0.0 {
        return -psi_inv(-y);
    }
    debug_assert!(y < 1.0);
    // Find n with 1 - 2^{-n} <= y < 1 - 2^{-(n+1)}.
    let n = (-(1.0 - y).log2()).floor().max(0.0);
    let base = 1.0 - f64::exp2(-n);
    n + (y - base) * f64::exp2(n + 1.0)
}

/// ψ as a piecewise-linear map on integer breakpoints |n| ≤ 52; beyond
/// that the increments fall below float resolution and the affine tails
/// carry the (immaterial) remainder.
pub fn build_psi() -> PLMap {
    let range = 52i64;
    let bps: Vec<f64> = (-range..=range).map(|n| n as f64).collect();
    let vals: Vec<f64> = bps.iter().map(|&n| psi_val(n)).collect();
    let s = f64::exp2(-(range as f64));
    PLMap::new(bps, vals, Extension::AffineTails { left_slope: s, right_slope: s })
        .expect("psi data is monotone by construction")
}

/// Everything downstream needs from the seed stage.
#[derive(Debug, Clone, Serialize)]
pub struct SeedBundle {
    pub psi: PLMap,
    pub beta0: PLMap,
    pub beta1: PLMap,
    /// ψ-image of the wandering interval, and its unit translate.
    pub i0: (f64, f64),
    pub i1: (f64, f64),
    /// 2-periodic unions of the translates of I₀ resp. I₁.
    pub iset0: OpenSet,
    pub iset1: OpenSet,
    pub n: u32,
    pub b: PLMap,
    pub d: PLMap,
    pub a0: PLMap,
    pub c0: PLMap,
    /// Open sets whose complements are the (truncated) minimal sets 𝓜₀ and
    /// 𝓜₁ on which the extension domains are pinned.
    pub mset0: OpenSet,
    pub mset1: OpenSet,
}

/// β₀ = ψ ∘ ḡ ∘ ψ⁻¹ extended 2-periodically. On [-1, 1] the conjugation
/// collapses to four exact segments: slope 4 on [-1, -3/4], the two middle
/// integer cells, and slope 1/4 on [0, 1], with ±1 fixed.
fn build_beta0() -> PLMap {
    PLMap::new(
        vec![-1.0, -0.75, -0.5, 0.0, 1.0],
        vec![-1.0, 0.0, 0.5, 0.75, 1.0],
        Extension::Periodic { period: 2.0, image_period: 2.0 },
    )
    .expect("static data")
}

/// β₀, β₁ and the core intervals I₀ = ψ(J₀), I₁ = I₀ + 1.
pub fn build_betas(dj: &DenjoyModel) -> Result<(PLMap, PLMap, (f64, f64), (f64, f64))> {
    let beta0 = build_beta0();
    let beta1 = beta0.shift_conjugate(1.0);
    let i0 = (psi_val(dj.j0.0), psi_val(dj.j0.1));
    if i0.0 <= -1.0 || i0.1 >= 1.0 || i0.0 >= i0.1 {
        return Err(HomeoError::Construction("degenerate core interval".into()));
    }
    let i1 = (i0.0 + 1.0, i0.1 + 1.0);
    Ok((beta0, beta1, i0, i1))
}

/// Source cutoff for materializing ψ-conjugates: data points whose image
/// coordinate exceeds this are merged into the fixed-point pin, keeping all
/// stored values strictly inside (-1, 1) at float resolution.
const CONJ_CUTOFF: f64 = 48.0;

/// Conjugate a map of the blown-up line by ψ and extend 2-periodically.
/// `h` must commute with the translation by 2 and fix the ends of the line;
/// breakpoints are the ψ-images of h's breakpoints plus the kink

/// pull-backs of ψ, and the cell is pinned at the fixed points ±1.
fn psi_conjugate(h: &PLMap) -> Result<PLMap> {
    let cut = CONJ_CUTOFF;
    let mut sources: Vec<f64> = h.breakpoints_in(-cut, cut);
    // Kinks of ψ on the source side and their pull-backs from the image side.
    let mut n = -cut;
    while n <= cut {
        sources.push(n);
        let pre = h.eval_inv(n);
        if pre.abs() <= cut {
            sources.push(pre);
        }
        n += 1.0;
    }
    sources.retain(|p| h.eval(*p).abs() <= cut);
    sources.sort_by(f64::total_cmp);
    sources.dedup_by(|a, b| (*a - *b).abs() < 1e-13);

    let mut bx = vec![-1.0];
    let mut by = vec![-1.0];
    for p in sources {
        bx.push(psi_val(p));
        by.push(psi_val(h.eval(p)));
    }
    bx.push(1.0);
    by.push(1.0);
    let (bx, by) = sanitize_monotone(bx, by, 1e-13)?;
    PLMap::new(bx, by, Extension::Periodic { period: 2.0, image_period: 2.0 })
}

/// The seeds a₀ = ψ ∘ f̄ ∘ ψ⁻¹ and c₀(x) = a₀(x - 1) + 1, together with
/// the open sets complementary to 𝓜₀ = ⋃ₙ ψ(M) + 2n and its translate.
pub fn build_a0_c0(dj: &DenjoyModel) -> Result<(PLMap, PLMap, OpenSet, OpenSet)> {
    let a0 = psi_conjugate(&dj.f_bar)?;
    let c0 = a0.shift_conjugate(1.0);

    // Complement of 𝓜₀ per period: the ψ-images of the inserted intervals
    // that are still resolvable, plus the unresolved window around the odd
    // integers where M was truncated.
    let far = psi_val(CONJ_CUTOFF);
    let mut cell: Vec<(f64, f64)> = Vec::new();
    for ins in &dj.inserted {
        let (lo, hi) = (psi_val(ins.lo), psi_val(ins.hi));
        if lo >= -far && hi <= far && hi - lo > 1e-13 {
            cell.push((lo, hi));
        }
    }
    cell.push((far, 2.0 - far));
    let mset0 = OpenSet::periodic(cell, 2.0)?;
    let mset1 = mset0.translate(1.0);
    Ok((a0, c0, mset0, mset1))
}

/// Search ceiling for the exponent N.
const N_CEILING: u32 = 64;
/// Extra exponents checked beyond the candidate.
const N_HORIZON: u32 = 10;

/// Check that `p` maps every complement gap of `island` strictly inside a
/// single component of `island`.
fn maps_complement_inside(p: &PLMap, island: &OpenSet) -> Result<bool> {
    let gaps = island.complement_gaps()?;
    for (u, v) in gaps.components_in(-1.0, 1.5) {
        let (cu, cv) = (island.component_of(p.eval(u)), island.component_of(p.eval(v)));
        match (cu, cv) {
            (Some((a, k)), Some((b, m))) if a == b && k == m => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

fn passes_at(beta: &PLMap, island: &OpenSet, n: u32) -> Result<bool> {
    let p = beta.pow(n as i64)?;
    let q = beta.pow(-(n as i64))?;
    Ok(maps_complement_inside(&p, island)?
        && maps_complement_inside(&q, island)?
        && p.max_slope_outside(island) <= 0.5
        && q.max_slope_outside(island) <= 0.5)
}

/// Minimal N such that β₀^{±n}(ℝ∖𝓘₁) ⊆ 𝓘₁, β₁^{±n}(ℝ∖𝓘₀) ⊆ 𝓘₀ and
/// every linear piece of the powers outside the island has slope ≤ 1/2,
/// for all n in [N, N + horizon].
pub fn choose_n(
    beta0: &PLMap,
    beta1: &PLMap,
    iset0: &OpenSet,
    iset1: &OpenSet,
) -> Result<u32> {
    'outer: for cand in 1..=N_CEILING {
        for n in cand..=(cand + N_HORIZON) {
            if !(passes_at(beta0, iset1, n)? && passes_at(beta1, iset0, n)?) {
                continue 'outer;
            }
        }
        return Ok(cand);
    }
    Err(HomeoError::Construction(format!(
        "no exponent below {N_CEILING} satisfies the ping-pong bounds"
    )))
}

/// Build the full seed bundle from a blown-up model.
pub fn build_seed(dj: &DenjoyModel) -> Result<SeedBundle> {
    let psi = build_psi();
    let (beta0, beta1, i0, i1) = build_betas(dj)?;
    let iset0 = OpenSet::periodic(vec![i0], 2.0)?;
    let iset1 = OpenSet::periodic(vec![i1], 2.0)?;
    let n = choose_n(&beta0, &beta1, &iset0, &iset1)?;
    let b = beta0.pow(n as i64)?;
    let d = beta1.pow(n as i64)?;
    let (a0, c0, mset0, mset1) = build_a0_c0(dj)?;
    Ok(SeedBundle {
        psi,
        beta0,
        beta1,
        i0,
        i1,
        iset0,
        iset1,
        n,
        b,
        d,
        a0,
        c0,
        mset0,
        mset1,
    })
}
