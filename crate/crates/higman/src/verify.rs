//! Verification harness: word evaluation, relator residuals, fixed-point
//! scanning, rotation numbers, the ping-pong freeness certificate, and the
//! circle projection report.

use serde::{Deserialize, Serialize};

use crate::error::{HomeoError, Result};
use crate::homeo::interval::OpenSet;
use crate::homeo::plmap::PLMap;

/// The four generators of the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gen {
    A,
    B,
    C,
    D,
}

impl Gen {
    fn from_char(ch: char) -> Option<Gen> {
        match ch {
            'a' => Some(Gen::A),
            'b' => Some(Gen::B),
            'c' => Some(Gen::C),
            'd' => Some(Gen::D),
            _ => None,
        }
    }
}

/// A word in the generators: a sequence of (generator, nonzero exponent)
/// syllables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Word(pub Vec<(Gen, i32)>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    /// Parses strings like `"a b a^-1 b^-2"` or the compact `"aba^-1b^-2"`.
    pub fn parse(s: &str) -> Result<Word> {
        let mut letters = Vec::new();
        let mut it = s.chars().peekable();
        while let Some(ch) = it.next() {
            if ch.is_whitespace() || ch == '*' || ch == '.' {
                continue;
            }
            let g = Gen::from_char(ch)
                .ok_or_else(|| HomeoError::Precondition(format!("unknown generator '{ch}'")))?;
            let mut exp: i32 = 1;
            if it.peek() == Some(&'^') {
                it.next();
                let mut tok = String::new();
                if it.peek() == Some(&'-') || it.peek() == Some(&'+') {
                    tok.push(it.next().unwrap());
                }
                while it.peek().is_some_and(|c| c.is_ascii_digit()) {
                    tok.push(it.next().unwrap());
                }
                exp = tok
                    .parse()
                    .map_err(|_| HomeoError::Precondition(format!("bad exponent in '{s}'")))?;
            }
            if exp != 0 {
                letters.push((g, exp));
            }
        }
        Ok(Word(letters).reduced())
    }

    /// Merges adjacent syllables with the same generator and drops zeros.
    pub fn reduced(&self) -> Word {
        let mut out: Vec<(Gen, i32)> = Vec::new();
        for &(g, e) in &self.0 {
            match out.last_mut() {
                Some((lg, le)) if *lg == g => {
                    *le += e;
                    if *le == 0 {
                        out.pop();
                    }
                }
                _ => out.push((g, e)),
            }
        }
        Word(out)
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[0].0 != w[1].0) && self.0.iter().all(|&(_, e)| e != 0)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v).reduced()
    }

    /// Total letter count, exponents counted with multiplicity.
    pub fn len(&self) -> usize {
        self.0.iter().map(|&(_, e)| e.unsigned_abs() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The four maps of a realized action, all commuting with x ↦ x+2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionBundle {
    pub a: PLMap,
    pub b: PLMap,
    pub c: PLMap,
    pub d: PLMap,
}

impl ActionBundle {
    pub fn map(&self, g: Gen) -> &PLMap {
        match g {
            Gen::A => &self.a,
            Gen::B => &self.b,
            Gen::C => &self.c,
            Gen::D => &self.d,
        }
    }

    pub fn identity_bundle() -> ActionBundle {
        let id = PLMap::identity();
        ActionBundle { a: id.clone(), b: id.clone(), c: id.clone(), d: id }
    }
}

/// Applies the word right to left; exponents by repeated (inverse) evaluation.
pub fn evaluate_word(bundle: &ActionBundle, w: &Word, x: f64) -> f64 {
    let mut y = x;
    for &(g, e) in w.0.iter().rev() {
        let m = bundle.map(g);
        for _ in 0..e.unsigned_abs() {
            y = if e > 0 { m.eval(y) } else { m.eval_inv(y) };
        }
    }
    y
}

/// Sup over the grid of |w(x) − x| on `[lo, hi]`.
pub fn relation_residual_over(
    bundle: &ActionBundle,
    relator: &Word,
    grid: usize,
    lo: f64,
    hi: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=grid {
        let x = lo + (hi - lo) * i as f64 / grid as f64;
        worst = worst.max((evaluate_word(bundle, relator, x) - x).abs());
    }
    worst
}

/// Sup over the grid of |w(x) − x| on one period-2 cell.
pub fn relation_residual(bundle: &ActionBundle, relator: &Word, grid: usize) -> f64 {
    relation_residual_over(bundle, relator, grid, -1.0, 1.0)
}

/// The four defining relators, as words that should act as the identity.
pub fn higman_relators() -> [Word; 4] {
    [
        Word::parse("a b a^-1 b^-2").unwrap(),
        Word::parse("b c b^-1 c^-2").unwrap(),
        Word::parse("c d c^-1 d^-2").unwrap(),
        Word::parse("d a d^-1 a^-2").unwrap(),
    ]
}

/// Maximal intervals of one period where |h(x) − x| ≤ tol, with bisection
/// refinement of the boundaries between adjacent grid points.
pub fn fixed_points(h: &PLMap, grid: usize, tol: f64) -> Vec<(f64, f64)> {
    let disp = |x: f64| (h.eval(x) - x).abs() - tol;
    let xs: Vec<f64> = (0..=grid).map(|i| -1.0 + 2.0 * i as f64 / grid as f64).collect();
    let inside: Vec<bool> = xs.iter().map(|&x| disp(x) <= 0.0).collect();
    let refine = |mut lo: f64, mut hi: f64| {
        // disp changes sign on (lo, hi); return the crossing.
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (disp(lo) <= 0.0) == (disp(mid) <= 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..=grid {
        if inside[i] && start.is_none() {
            let lo = if i == 0 { xs[0] } else { refine(xs[i - 1], xs[i]) };
            start = Some(lo);
        }
        if !inside[i] {
            if let Some(lo) = start.take() {
                out.push((lo, refine(xs[i - 1], xs[i])));
            }
        }
    }
    if let Some(lo) = start {
        out.push((lo, xs[grid]));
    }
    out
}

/// Birkhoff estimate of the rotation number of the projection to ℝ/2ℤ:
/// (hⁿ(x₀) − x₀)/(2n) mod 1, accurate to O(1/n).
pub fn rotation_number(h: &PLMap, iterations: usize, x0: f64) -> f64 {
    let mut x = x0;
    for _ in 0..iterations {
        x = h.eval(x);
    }
    (((x - x0) / (2.0 * iterations as f64)) % 1.0 + 1.0) % 1.0
}

/// Checks the ping-pong hypotheses on component endpoints: b^{±1} sends the
/// complement of `i1` into `i1`, and d^{±1} sends the complement of `i0`
/// into `i0`.
pub fn ping_pong_certificate(b: &PLMap, d: &PLMap, i0: &OpenSet, i1: &OpenSet) -> Result<bool> {
    let sends_in = |f: &PLMap, target: &OpenSet| -> Result<bool> {
        let gaps = target.complement_gaps()?;
        let anchor = target.intervals()[0].0;
        for (u, v) in gaps.components_in(anchor, anchor + 2.0) {
            for x in [u, v] {
                for y in [f.eval(x), f.eval_inv(x)] {
                    if target.component_of(y).is_none() {
                        return Ok(false);
                    }
                }
                // Both endpoint images must land in one component, so the
                // whole gap does.
                let (cu, cv) = (f.eval(u), f.eval(v));
                let same = match (target.component_of(cu), target.component_of(cv)) {
                    (Some((_, ku)), Some((_, kv))) => {
                        target.component_of(cu).map(|(c, _)| c)
                            == target.component_of(cv).map(|(c, _)| c)
                            && ku == kv
                    }
                    _ => false,
                };
                if !same {
                    return Ok(false);
                }
                let (iu, iv) = (f.eval_inv(u), f.eval_inv(v));
                let same_inv = match (target.component_of(iu), target.component_of(iv)) {
                    (Some((ci, ki)), Some((cj, kj))) => ci == cj && ki == kj,
                    _ => false,
                };
                if !same_inv {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    Ok(sends_in(b, i1)? && sends_in(d, i0)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Residuals of the four defining relators, in cyclic order.
    pub relator_residuals: Vec<f64>,
    /// Fixed-point intervals of each generator on one period.
    pub fixed_intervals: Vec<Vec<(f64, f64)>>,
    /// Rotation numbers of the four generators on ℝ/2ℤ.
    pub rotation_numbers: Vec<f64>,
    /// Residuals of commutation with the translation x ↦ x+2.
    pub commutation_residuals: Vec<f64>,
    /// Whether the freeness certificate for ⟨b, d⟩ held (when sets given).
    pub ping_pong: Option<bool>,
    /// min over x of max over generators |g(x) − x|.
    pub min_max_displacement: f64,
}

/// Residual of commutation with the period-2 translation.
pub fn commutation_residual(h: &PLMap, grid: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=grid {
        let x = -1.0 + 2.0 * i as f64 / grid as f64;
        worst = worst.max((h.eval(x + 2.0) - h.eval(x) - 2.0).abs());
    }
    worst
}

/// Builds the circle-action report: commutation with T, rotation numbers,
/// relator residuals, fixed-point data, and the global displacement bound.
pub fn circle_report(
    bundle: &ActionBundle,
    grid: usize,
    rot_iterations: usize,
    sets: Option<(&OpenSet, &OpenSet)>,
) -> Result<VerificationReport> {
    let gens = [&bundle.a, &bundle.b, &bundle.c, &bundle.d];
    let commutation_residuals: Vec<f64> =
        gens.iter().map(|g| commutation_residual(g, grid)).collect();
    let relator_residuals: Vec<f64> =
        higman_relators().iter().map(|w| relation_residual(bundle, w, grid)).collect();
    let fixed_intervals: Vec<Vec<(f64, f64)>> =
        gens.iter().map(|g| fixed_points(g, grid, 1e-9)).collect();
    let rotation_numbers: Vec<f64> =
        gens.iter().map(|g| rotation_number(g, rot_iterations, 0.1)).collect();
    let mut min_max: f64 = f64::INFINITY;
    for i in 0..=grid {
        let x = -1.0 + 2.0 * i as f64 / grid as f64;
        let m = gens.iter().map(|g| (g.eval(x) - x).abs()).fold(0.0f64, f64::max);
        min_max = min_max.min(m);
    }
    let ping_pong = match sets {
        Some((i0, i1)) => Some(ping_pong_certificate(&bundle.b, &bundle.d, i0, i1)?),
        None => None,
    };
    Ok(VerificationReport {
        relator_residuals,
        fixed_intervals,
        rotation_numbers,
        commutation_residuals,
        ping_pong,
        min_max_displacement: min_max,
    })
}

/// Draws a random reduced word in b and d with at most `max_len` letters.
pub fn random_bd_word<R: rand::Rng>(rng: &mut R, max_len: usize) -> Word {
    use rand::seq::SliceRandom;
    let syllables = rng.gen_range(1..=max_len.max(1));
    let mut letters = Vec::new();
    let mut g = *[Gen::B, Gen::D].choose(rng).unwrap();
    let mut remaining = max_len as i32;
    for _ in 0..syllables {
        if remaining <= 0 {
            break;
        }
        let mag = rng.gen_range(1..=2.min(remaining)) as i32;
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        letters.push((g, sign * mag));
        remaining -= mag;
        g = if g == Gen::B { Gen::D } else { Gen::B };
    }
    Word(letters)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub words: usize,
    pub min_displacement: f64,
    pub all_nontrivial: bool,
}

/// Evaluates random reduced words in b, d on a grid and reports the smallest
/// maximal displacement seen; with the certificate true, none may vanish.
pub fn freeness_sweep<R: rand::Rng>(
    bundle: &ActionBundle,
    count: usize,
    max_len: usize,
    grid: usize,
    rng: &mut R,
) -> SweepReport {
    let mut min_disp = f64::INFINITY;
    for _ in 0..count {
        let w = random_bd_word(rng, max_len);
        let mut max_disp: f64 = 0.0;
        for i in 0..=grid {
            let x = -1.0 + 2.0 * i as f64 / grid as f64;
            max_disp = max_disp.max((evaluate_word(bundle, &w, x) - x).abs());
        }
        min_disp = min_disp.min(max_disp);
    }
    SweepReport { words: count, min_displacement: min_disp, all_nontrivial: min_disp > 1e-7 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denjoy::{build_blowup, BlowupConfig};
    use crate::seed::{build_seed, SeedBundle};
    use once_cell::sync::Lazy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    static SEED: Lazy<SeedBundle> = Lazy::new(|| {
        let dj = build_blowup(&BlowupConfig::default()).unwrap();
        build_seed(&dj).unwrap()
    });

    fn seed_bundle() -> ActionBundle {
        let s = &*SEED;
        ActionBundle { a: s.a0.clone(), b: s.b.clone(), c: s.c0.clone(), d: s.d.clone() }
    }

    #[test]
    fn word_parsing_round_trips() {
        let w = Word::parse("a b^-2 c^3 d").unwrap();
        assert_eq!(w.0, vec![(Gen::A, 1), (Gen::B, -2), (Gen::C, 3), (Gen::D, 1)]);
        assert_eq!(Word::parse("aba^-1b^-2").unwrap().0.len(), 4);
        assert!(Word::parse("x").is_err());
    }

    #[test]
    fn reduction_cancels_adjacent_syllables() {
        let w = Word::parse("b b^-1").unwrap();
        assert!(w.is_empty());
        let w = Word::parse("b^2 b^-1 d").unwrap();
        assert_eq!(w.0, vec![(Gen::B, 1), (Gen::D, 1)]);
        assert!(w.is_reduced());
    }

    #[test]
    fn empty_word_has_zero_residual() {
        let bundle = seed_bundle();
        assert_eq!(relation_residual(&bundle, &Word::empty(), 64), 0.0);
    }

    #[test]
    fn inverse_pair_is_identity_pointwise() {
        let bundle = seed_bundle();
        let w = Word::parse("b b^-1").unwrap();
        for i in 0..=32 {
            let x = -1.0 + 2.0 * i as f64 / 32.0;
            assert!((evaluate_word(&bundle, &w, x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn b_fixes_the_odd_integers() {
        let bundle = seed_bundle();
        let w = Word::parse("b").unwrap();
        assert!((evaluate_word(&bundle, &w, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seed_relator_residual_is_tiny() {
        let bundle = seed_bundle();
        let w = Word::parse("a b a^-1 b^-2").unwrap();
        // The pointwise word form is amplified by the slopes of b^2, so its
        // bound is looser than the two-sided comparison of the identity.
        assert!(relation_residual(&bundle, &w, 4096) < 1e-7);
    }

    #[test]
    fn homomorphism_property_of_word_evaluation() {
        let bundle = seed_bundle();
        let w1 = Word::parse("b d^-1").unwrap();
        let w2 = Word::parse("d b^2").unwrap();
        let w = w1.concat(&w2);
        for i in 0..=16 {
            let x = -1.0 + 2.0 * i as f64 / 16.0;
            let via_concat = evaluate_word(&bundle, &w, x);
            let via_steps = evaluate_word(&bundle, &w1, evaluate_word(&bundle, &w2, x));
            assert!((via_concat - via_steps).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_points_of_identity_cover_the_period() {
        let ivs = fixed_points(&PLMap::identity(), 128, 1e-9);
        assert_eq!(ivs.len(), 1);
        assert!((ivs[0].0 - -1.0).abs() < 1e-9 && (ivs[0].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_points_of_b_sit_at_odd_integers() {
        let s = &*SEED;
        let ivs = fixed_points(&s.b, 4096, 1e-9);
        assert!(!ivs.is_empty());
        for (u, v) in ivs {
            // Each interval must hug an odd integer.
            let mid = 0.5 * (u + v);
            let nearest = 2.0 * ((mid + 1.0) / 2.0).round() - 1.0;
            assert!(
                (mid - nearest).abs() < 0.2,
                "fixed interval ({u}, {v}) far from odd integers"
            );
        }
    }

    #[test]
    fn translation_has_rotation_number_zero_mod_one() {
        let t = PLMap::translation(2.0);
        assert!(rotation_number(&t, 128, 0.3) < 1e-12);
    }

    #[test]
    fn b_and_d_have_zero_rotation_number() {
        let s = &*SEED;
        assert!(rotation_number(&s.b, 2048, 0.1) < 1e-3);
        assert!(rotation_number(&s.d, 2048, 0.1) < 1e-3);
    }

    #[test]
    fn certificate_holds_for_the_seed_and_fails_for_identity_powers() {
        let s = &*SEED;
        assert!(ping_pong_certificate(&s.b, &s.d, &s.iset0, &s.iset1).unwrap());
        let id = PLMap::identity();
        assert!(!ping_pong_certificate(&id, &id, &s.iset0, &s.iset1).unwrap());
    }

    #[test]
    fn random_words_never_act_trivially() {
        let bundle = seed_bundle();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rep = freeness_sweep(&bundle, 50, 8, 64, &mut rng);
        assert!(rep.all_nontrivial, "minimum displacement {}", rep.min_displacement);
    }

    #[test]
    fn identity_bundle_is_the_negative_control() {
        let report =
            circle_report(&ActionBundle::identity_bundle(), 256, 32, None).unwrap();
        assert_eq!(report.min_max_displacement, 0.0);
    }

    #[test]
    fn seed_bundle_commutes_with_the_translation() {
        let report = circle_report(&seed_bundle(), 512, 64, None).unwrap();
        for r in report.commutation_residuals {
            assert!(r < 1e-10);
        }
    }
}
