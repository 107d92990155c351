//! Open subsets of the line given by finitely many disjoint open intervals,
//! optionally repeated with a fixed period.

use serde::{Deserialize, Serialize};

use crate::error::{HomeoError, Result};

/// A finite or periodic union of disjoint open intervals.
///
/// For a periodic set the stored intervals are one representative per orbit
/// under `x + period`; together they must fit inside a window of length
/// `period` starting at the first interval's left endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenSet {
    intervals: Vec<(f64, f64)>,
    period: Option<f64>,
}

impl OpenSet {
    pub fn bounded(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        validate(&intervals, None)?;
        Ok(OpenSet { intervals, period: None })
    }

    pub fn periodic(mut intervals: Vec<(f64, f64)>, period: f64) -> Result<Self> {
        if period <= 0.0 {
            return Err(HomeoError::InvalidMap("open set period must be positive".into()));
        }
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        validate(&intervals, Some(period))?;
        Ok(OpenSet { intervals, period: Some(period) })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    /// Translate the whole set by `s`.
    pub fn translate(&self, s: f64) -> OpenSet {
        OpenSet {
            intervals: self.intervals.iter().map(|&(a, b)| (a + s, b + s)).collect(),
            period: self.period,
        }
    }

    fn reduce(&self, x: f64) -> (f64, i64) {
        match self.period {
            Some(p) => {
                let base = self.intervals[0].0;
                let k = ((x - base) / p).floor() as i64;
                (x - k as f64 * p, k)
            }
            None => (x, 0),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.component_of(x).is_some()
    }

    /// The component containing `x`, in absolute (un-reduced) coordinates,
    /// together with the translate index of the representative interval.
    pub fn component_of(&self, x: f64) -> Option<((f64, f64), i64)> {
        let (xr, k) = self.reduce(x);
        let shift = k as f64 * self.period.unwrap_or(0.0);
        let i = self.intervals.partition_point(|&(a, _)| a < xr);
        // xr may lie in the interval starting before it.
        if i > 0 {
            let (a, b) = self.intervals[i - 1];
            if xr > a && xr < b {
                return Some(((a + shift, b + shift), k));
            }
        }
        None
    }

    /// Representative intervals unrolled over `[lo, hi]`, clipped.
    pub fn components_in(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        match self.period {
            Some(p) => {
                let base = self.intervals[0].0;
                let k0 = ((lo - base) / p).floor() as i64 - 1;
                let k1 = ((hi - base) / p).ceil() as i64 + 1;
                for k in k0..=k1 {
                    let s = k as f64 * p;
                    for &(a, b) in &self.intervals {
                        if a + s < hi && b + s > lo {
                            out.push((a + s, b + s));
                        }
                    }
                }
            }
            None => {
                for &(a, b) in &self.intervals {
                    if a < hi && b > lo {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }

    /// Whether `[x0, x1]` lies inside a single component (endpoints may touch
    /// the component boundary).
    pub fn covers(&self, x0: f64, x1: f64) -> bool {
        let m = 0.5 * (x0 + x1);
        match self.component_of(m) {
            Some(((a, b), _)) => x0 >= a - 1e-15 && x1 <= b + 1e-15,
            None => false,
        }
    }

    /// The interior of the complement, for a periodic set: the gaps between
    /// consecutive intervals (including the wrap-around gap).
    pub fn complement_gaps(&self) -> Result<OpenSet> {
        let p = self.period.ok_or_else(|| {
            HomeoError::Precondition("complement gaps require a periodic set".into())
        })?;
        let mut gaps = Vec::new();
        for w in self.intervals.windows(2) {
            if w[1].0 > w[0].1 {
                gaps.push((w[0].1, w[1].0));
            }
        }
        let last = *self.intervals.last().unwrap();
        let first = self.intervals[0];
        if first.0 + p > last.1 {
            gaps.push((last.1, first.0 + p));
        }
        OpenSet::periodic(gaps, p)
    }

    /// All interval endpoints unrolled over `[lo, hi]`.
    pub fn endpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for (a, b) in self.components_in(lo, hi) {
            if a >= lo && a <= hi {
                out.push(a);
            }
            if b >= lo && b <= hi {
                out.push(b);
            }
        }
        out
    }
}

fn validate(intervals: &[(f64, f64)], period: Option<f64>) -> Result<()> {
    if intervals.is_empty() {
        return Err(HomeoError::InvalidMap("open set needs at least one interval".into()));
    }
    for &(a, b) in intervals {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(HomeoError::InvalidMap(format!("degenerate interval ({a}, {b})")));
        }
    }
    for w in intervals.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(HomeoError::InvalidMap("intervals overlap".into()));
        }
    }
    if let Some(p) = period {
        let span = intervals.last().unwrap().1 - intervals[0].0;
        if span > p {
            return Err(HomeoError::InvalidMap(format!(
                "interval span {span} exceeds period {p}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_membership() {
        let s = OpenSet::periodic(vec![(-0.1, 0.1)], 2.0).unwrap();
        assert!(s.contains(0.05));
        assert!(s.contains(4.05));
        assert!(s.contains(-2.05));
        assert!(!s.contains(0.1));
        assert!(!s.contains(1.0));
    }

    #[test]
    fn straddling_representative() {
        // A representative interval that crosses what would naively be the
        // cell boundary of [-1, 1).
        let s = OpenSet::periodic(vec![(0.2, 1.8)], 2.0).unwrap();
        assert!(s.contains(1.5));
        assert!(s.contains(-0.5)); // = 1.5 - 2
        assert!(!s.contains(0.0));
        assert!(!s.contains(2.0));
    }

    #[test]
    fn complement_gaps_round_trip() {
        let s = OpenSet::periodic(vec![(-0.1, 0.1)], 2.0).unwrap();
        let c = s.complement_gaps().unwrap();
        assert_eq!(c.intervals(), &[(0.1, 1.9)]);
        assert!(c.contains(1.0));
        assert!(!c.contains(0.0));
        assert!(!c.contains(2.05));
    }

    #[test]
    fn components_in_window() {
        let s = OpenSet::periodic(vec![(-0.1, 0.1)], 2.0).unwrap();
        let comps = s.components_in(-1.0, 5.0);
        assert!(comps.contains(&(-0.1, 0.1)));
        assert!(comps.contains(&(1.9, 2.1)));
        assert!(comps.contains(&(3.9, 4.1)));
    }

    #[test]
    fn covers_requires_single_component() {
        let s = OpenSet::periodic(vec![(-0.1, 0.1)], 2.0).unwrap();
        assert!(s.covers(-0.05, 0.05));
        assert!(!s.covers(-0.05, 1.95));
    }
}
