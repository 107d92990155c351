//! Sign-sequence families of actions.
//!
//! The base generators act the same way on every translate of the base
//! tile. Replacing the action on tile n by the inverse map whenever a sign
//! sequence says so yields a family of actions indexed by two sequences in
//! {−1,+1}^ℤ; the resulting generators commute with a translation T^p
//! exactly when the sequences share a period p, which governs whether the
//! action descends to a circle.

use serde::{Deserialize, Serialize};

use crate::error::{HomeoError, Result};
use crate::homeo::interval::OpenSet;
use crate::homeo::plmap::{Extension, PLMap};
use crate::iterate::run_side;
use crate::operators::Side;
use crate::seed::SeedBundle;
use crate::verify::ActionBundle;

/// A two-sided sequence of signs with ε(0) = +1 by convention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignSequence {
    /// Repeats the given word over ℤ; the word must start with +1.
    Periodic(Vec<i8>),
    /// +1 everywhere except at the listed positions (0 excluded).
    Flips(Vec<i64>),
}

impl SignSequence {
    pub fn all_plus() -> SignSequence {
        SignSequence::Periodic(vec![1])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SignSequence::Periodic(w) => {
                if w.is_empty() {
                    return Err(HomeoError::Precondition("empty periodic word".into()));
                }
                if w[0] != 1 {
                    return Err(HomeoError::Precondition("sign at 0 must be +1".into()));
                }
                if w.iter().any(|&s| s != 1 && s != -1) {
                    return Err(HomeoError::Precondition("signs must be ±1".into()));
                }
            }
            SignSequence::Flips(f) => {
                if f.contains(&0) {
                    return Err(HomeoError::Precondition("sign at 0 must be +1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eps(&self, n: i64) -> i8 {
        match self {
            SignSequence::Periodic(w) => {
                let p = w.len() as i64;
                w[(((n % p) + p) % p) as usize]
            }
            SignSequence::Flips(f) => {
                if f.contains(&n) {
                    -1
                } else {
                    1
                }
            }
        }
    }

    /// Least period of the sequence, when one exists.
    pub fn minimal_period(&self) -> Option<usize> {
        match self {
            SignSequence::Periodic(w) => {
                let n = w.len();
                (1..=n).find(|&d| (0..n).all(|i| w[i] == w[(i + d) % n]))
            }
            SignSequence::Flips(f) => {
                if f.is_empty() {
                    Some(1)
                } else {
                    None
                }
            }
        }
    }

    /// Parses "all", "periodic:1,-1,..." or "flips:n1,n2,...".
    pub fn parse(s: &str) -> Result<SignSequence> {
        let s = s.trim();
        if s == "all" || s.is_empty() {
            return Ok(SignSequence::all_plus());
        }
        let bad = || HomeoError::Precondition(format!("cannot parse sign sequence '{s}'"));
        let seq = if let Some(rest) = s.strip_prefix("periodic:") {
            let w: std::result::Result<Vec<i8>, _> =
                rest.split(',').map(|t| t.trim().parse::<i8>()).collect();
            SignSequence::Periodic(w.map_err(|_| bad())?)
        } else if let Some(rest) = s.strip_prefix("flips:") {
            let f: std::result::Result<Vec<i64>, _> =
                rest.split(',').map(|t| t.trim().parse::<i64>()).collect();
            SignSequence::Flips(f.map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        seq.validate()?;
        Ok(seq)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Least common period of the two sequences, up to `max_p`.
pub fn detect_common_period(
    eps: &SignSequence,
    delta: &SignSequence,
    max_p: usize,
) -> Option<usize> {
    let p = lcm(eps.minimal_period()?, delta.minimal_period()?);
    (p <= max_p).then_some(p)
}

/// Number of tiles materialized per period cell: the exact common period
/// when both sequences are periodic, otherwise a window-covering count.
fn tile_count(eps: &SignSequence, delta: &SignSequence, window: usize) -> usize {
    let base = lcm(
        eps.minimal_period().unwrap_or(1),
        delta.minimal_period().unwrap_or(1),
    );
    let windowed = matches!(eps, SignSequence::Flips(f) if !f.is_empty())
        || matches!(delta, SignSequence::Flips(f) if !f.is_empty());
    if windowed {
        let need = 2 * window.max(1);
        base * need.div_ceil(base)
    } else {
        base
    }
}

/// Representative of tile n in the materialized cell, centred so the
/// windowed truncation of a non-periodic sequence is faithful on
/// [−window, window].
fn tile_rep(n: i64, m: usize) -> i64 {
    let m = m as i64;
    let r = ((n % m) + m) % m;
    if r >= m.div_euclid(2) + 1 { r - m } else { r }
}

/// A tile anchor for `f`: a fixed point at which the period cell can be cut
/// so tiles can be reassembled independently.
fn fixed_anchor(f: &PLMap) -> Result<f64> {
    for cand in [-1.0, 0.0, 1.0] {
        if (f.eval(cand) - cand).abs() < 1e-12 {
            return Ok(cand);
        }
    }
    Err(HomeoError::Precondition("no integer fixed point to anchor the tiles".into()))
}

/// Builds the sign-twisted extension of a 2-periodic map: on tile n (the
/// translate of the base tile by 2n) it acts as Tⁿ ∘ β^{ε(n)} ∘ T⁻ⁿ. Tiles
/// are cut at fixed points of β, so the pieces reassemble into a monotone
/// map; the result is exactly (2m)-periodic, tile signs repeating with
/// period m.
pub fn materialize_twisted(beta: &PLMap, seq: &SignSequence, m: usize) -> Result<PLMap> {
    seq.validate()?;
    let lo0 = fixed_anchor(beta)?;
    let inv = beta.inverse();
    let mut bx = Vec::new();
    let mut by = Vec::new();
    for n in 0..m as i64 {
        let g = if seq.eps(tile_rep(n, m)) > 0 { beta } else { &inv };
        let off = 2.0 * n as f64;
        bx.push(lo0 + off);
        by.push(lo0 + off);
        for x in g.breakpoints_in(lo0, lo0 + 2.0) {
            if x > lo0 + 1e-13 && x < lo0 + 2.0 - 1e-13 {
                bx.push(x + off);
                by.push(g.eval(x) + off);
            }
        }
    }
    let period = 2.0 * m as f64;
    bx.push(lo0 + period);
    by.push(lo0 + period);
    let (bx, by) = crate::homeo::plmap::sanitize_monotone(bx, by, 1e-12)?;
    PLMap::new(bx, by, Extension::Periodic { period, image_period: period })
}

/// Re-expresses a 2-periodic map with period 2m (exact tile copies).
pub fn reperiodize(f: &PLMap, m: usize) -> Result<PLMap> {
    materialize_twisted(f, &SignSequence::all_plus(), m)
}

/// Re-expresses a 2-periodic open set with period 2m.
fn reperiodize_set(s: &OpenSet, m: usize) -> Result<OpenSet> {
    let anchor = s.intervals()[0].0;
    let period = 2.0 * m as f64;
    OpenSet::periodic(s.components_in(anchor, anchor + period), period)
}

pub struct FamilyGenerators {
    pub beta0e: PLMap,
    pub beta1d: PLMap,
    pub b: PLMap,
    pub d: PLMap,
    /// Tiles per materialized period cell; the maps have period 2m.
    pub m: usize,
}

/// Materializes the twisted ping-pong generators for the two sequences.
pub fn build_family_generators(
    seed: &SeedBundle,
    eps: &SignSequence,
    delta: &SignSequence,
    window: usize,
) -> Result<FamilyGenerators> {
    let m = tile_count(eps, delta, window);
    let beta0e = materialize_twisted(&seed.beta0, eps, m)?;
    let beta1d = materialize_twisted(&seed.beta1, delta, m)?;
    let b = beta0e.pow(seed.n as i64)?;
    let d = beta1d.pow(seed.n as i64)?;
    Ok(FamilyGenerators { beta0e, beta1d, b, d, m })
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyRun {
    pub m: usize,
    pub common_period: Option<usize>,
    /// Word-form residuals sup |w(x) - x| for the four relators. These pass
    /// through neighbourhoods of hyperbolic fixed points, where the closing
    /// inverse powers expand pointwise float-level errors by many orders of
    /// magnitude; use `conjugacy_residuals` for a slope-free measurement.
    pub relator_residuals: Vec<f64>,
    /// Two-sided residuals sup |f(g(f⁻¹(x))) - g(g(x))| for the relation
    /// pairs (a,b), (b,c), (c,d), (d,a).
    pub conjugacy_residuals: Vec<f64>,
    /// Commutation residual with T^p for the detected period p, if any.
    pub period_commutation: Option<f64>,
    pub a_diag_steps: usize,
    pub c_diag_steps: usize,
    pub converged: bool,
}

/// Assembles the iteration inputs for one side of a family run, with the
/// seed map and all certificate sets reperiodized to the tiling period.
pub fn family_side(seed: &SeedBundle, gens: &FamilyGenerators, a_side: bool) -> Result<Side> {
    let m = gens.m;
    Ok(if a_side {
        Side {
            seed: reperiodize(&seed.a0, m)?,
            conj: gens.b.clone(),
            ping: gens.d.clone(),
            island: reperiodize_set(&seed.iset0, m)?,
            other: reperiodize_set(&seed.iset1, m)?,
            moff: reperiodize_set(&seed.mset0, m)?,
        }
    } else {
        Side {
            seed: reperiodize(&seed.c0, m)?,
            conj: gens.d.clone(),
            ping: gens.b.clone(),
            island: reperiodize_set(&seed.iset1, m)?,
            other: reperiodize_set(&seed.iset0, m)?,
            moff: reperiodize_set(&seed.mset1, m)?,
        }
    })
}

/// Sup residual of commutation with x ↦ x + p over one period cell.
pub fn translation_commutation(f: &PLMap, p: f64, grid: usize, lo: f64, hi: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=grid {
        let x = lo + (hi - lo) * i as f64 / grid as f64;
        worst = worst.max((f.eval(x + p) - f.eval(x) - p).abs());
    }
    worst
}

/// Reruns the full operator pipeline on the twisted generators and reports
/// the relator residuals over the materialized cell.
pub fn run_family(
    seed: &SeedBundle,
    eps: &SignSequence,
    delta: &SignSequence,
    window: usize,
    max_iter: usize,
    tol: f64,
    grid: usize,
) -> Result<(ActionBundle, FamilyRun)> {
    let gens = build_family_generators(seed, eps, delta, window)?;
    let sa = family_side(seed, &gens, true)?;
    let sc = family_side(seed, &gens, false)?;
    let ra = run_side(&sa, &sa.seed, max_iter, tol, grid)?;
    let rc = run_side(&sc, &sc.seed, max_iter, tol, grid)?;
    let bundle =
        ActionBundle { a: ra.limit, b: gens.b.clone(), c: rc.limit, d: gens.d.clone() };
    let period = 2.0 * gens.m as f64;
    let cell_grid = grid * gens.m;
    let relator_residuals: Vec<f64> = crate::verify::higman_relators()
        .iter()
        .map(|w| {
            crate::verify::relation_residual_over(&bundle, w, cell_grid, -1.0, -1.0 + period)
        })
        .collect();
    let pairs = [
        (&bundle.a, &bundle.b),
        (&bundle.b, &bundle.c),
        (&bundle.c, &bundle.d),
        (&bundle.d, &bundle.a),
    ];
    let conjugacy_residuals: Vec<f64> = pairs
        .iter()
        .map(|(f, g)| {
            crate::iterate::conjugation_residual_over(f, g, cell_grid, -1.0, -1.0 + period)
        })
        .collect();
    let common_period = detect_common_period(eps, delta, 64);
    let period_commutation = common_period.map(|p| {
        [&bundle.a, &bundle.b, &bundle.c, &bundle.d]
            .iter()
            .map(|f| {
                translation_commutation(f, 2.0 * p as f64, cell_grid, -1.0, -1.0 + period)
            })
            .fold(0.0f64, f64::max)
    });
    let report = FamilyRun {
        m: gens.m,
        common_period,
        relator_residuals,
        conjugacy_residuals,
        period_commutation,
        a_diag_steps: ra.diag.iterations,
        c_diag_steps: rc.diag.iterations,
        converged: ra.diag.converged && rc.diag.converged,
    };
    Ok((bundle, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denjoy::{build_blowup, BlowupConfig};
    use crate::homeo::lazy::EvalBudget;
    use crate::homeo::metric::sup_dist_pl;
    use crate::seed::build_seed;
    use once_cell::sync::Lazy;

    static SEED: Lazy<SeedBundle> = Lazy::new(|| {
        let dj = build_blowup(&BlowupConfig::default()).unwrap();
        build_seed(&dj).unwrap()
    });

    #[test]
    fn accessor_honours_the_conventions() {
        let p = SignSequence::Periodic(vec![1, -1]);
        assert_eq!(p.eps(0), 1);
        assert_eq!(p.eps(1), -1);
        assert_eq!(p.eps(-1), -1);
        assert_eq!(p.eps(4), 1);
        let f = SignSequence::Flips(vec![3]);
        assert_eq!(f.eps(3), -1);
        assert_eq!(f.eps(0), 1);
        assert!(SignSequence::Periodic(vec![-1, 1]).validate().is_err());
        assert!(SignSequence::Flips(vec![0]).validate().is_err());
    }

    #[test]
    fn parsing_accepts_the_three_forms() {
        assert_eq!(SignSequence::parse("all").unwrap(), SignSequence::all_plus());
        assert_eq!(
            SignSequence::parse("periodic:1,-1").unwrap(),
            SignSequence::Periodic(vec![1, -1])
        );
        assert_eq!(SignSequence::parse("flips:2,5").unwrap(), SignSequence::Flips(vec![2, 5]));
        assert!(SignSequence::parse("nope").is_err());
    }

    #[test]
    fn common_period_is_the_lcm() {
        let p2 = SignSequence::Periodic(vec![1, -1]);
        let p3 = SignSequence::Periodic(vec![1, -1, -1]);
        assert_eq!(detect_common_period(&p2, &p3, 64), Some(6));
        let all = SignSequence::all_plus();
        assert_eq!(detect_common_period(&all, &all, 64), Some(1));
        let flip = SignSequence::Flips(vec![1]);
        assert_eq!(detect_common_period(&flip, &all, 64), None);
    }

    #[test]
    fn trivial_sequences_reproduce_the_base_generators() {
        let s = &*SEED;
        let gens =
            build_family_generators(s, &SignSequence::all_plus(), &SignSequence::all_plus(), 4)
                .unwrap();
        assert_eq!(gens.m, 1);
        let budget = EvalBudget::default();
        assert!(sup_dist_pl(&gens.b, &s.b, 512, &budget).unwrap() < 1e-12);
        assert!(sup_dist_pl(&gens.d, &s.d, 512, &budget).unwrap() < 1e-12);
    }

    #[test]
    fn one_flip_inverts_exactly_one_tile() {
        let s = &*SEED;
        let eps = SignSequence::Flips(vec![1]);
        let gens = build_family_generators(s, &eps, &SignSequence::all_plus(), 2).unwrap();
        let inv = s.beta0.inverse();
        for i in 0..=64 {
            let x = -1.0 + 2.0 * i as f64 / 64.0;
            // Tile 1: the twisted map is T ∘ β₀⁻¹ ∘ T⁻¹.
            assert!((gens.beta0e.eval(x + 2.0) - (inv.eval(x) + 2.0)).abs() < 1e-12);
            // Tile 0 is untouched.
            assert!((gens.beta0e.eval(x) - s.beta0.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn period_two_member_commutes_with_the_doubled_translation() {
        let s = &*SEED;
        let eps = SignSequence::Periodic(vec![1, -1]);
        let gens = build_family_generators(s, &eps, &SignSequence::all_plus(), 4).unwrap();
        assert_eq!(gens.m, 2);
        let good = translation_commutation(&gens.b, 4.0, 512, -1.0, 3.0);
        assert!(good < 1e-12);
        let bad = translation_commutation(&gens.b, 2.0, 512, -1.0, 3.0);
        assert!(bad > 1e-3, "a twisted member must not commute with T, got {bad}");
    }

    #[test]
    fn one_flip_family_pipeline_smoke() {
        let s = &*SEED;
        let eps = SignSequence::Flips(vec![1]);
        let (_, rep) =
            run_family(s, &eps, &SignSequence::all_plus(), 1, 60, 1e-6, 256).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.common_period, None);
        for r in &rep.conjugacy_residuals {
            assert!(*r < 1e-6, "conjugacy residual {r}");
        }
        // The word forms pass near hyperbolic fixed points and can only be
        // bounded after slope amplification.
        for r in &rep.relator_residuals {
            assert!(*r < 1e-2, "relator residual {r}");
        }
    }
}
