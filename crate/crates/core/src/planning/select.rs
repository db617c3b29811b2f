use serde::{Deserialize, Serialize};

use super::CandidateTrajectory;
use crate::entities::Mode;
use crate::world::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityWeights {
    /// Exploration weight in search mode.
    pub w_search: f64,
    /// Exploration weight in track mode.
    pub w_track: f64,
    /// Minimum distance between teammates' terminal poses, meters.
    pub d_thre: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self { w_search: 0.3, w_track: 0.2, d_thre: 3.5 }
    }
}

impl UtilityWeights {
    pub fn for_mode(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Search => self.w_search,
            Mode::Track => self.w_track,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub score: f64,
    pub j_explore: f64,
    pub j_exploit: f64,
    /// The spacing constraint removed every candidate and was ignored.
    pub relaxed: bool,
}

/// Scores divided by their per-set maxima; an all-zero column stays zero.
pub fn normalize_scores(cands: &[CandidateTrajectory]) -> Vec<(f64, f64)> {
    let me = cands.iter().map(|c| c.j_explore).fold(0.0, f64::max);
    let mx = cands.iter().map(|c| c.j_exploit).fold(0.0, f64::max);
    let n = |v: f64, m: f64| if m > 0.0 { v / m } else { 0.0 };
    cands.iter().map(|c| (n(c.j_explore, me), n(c.j_exploit, mx))).collect()
}

/// Best candidate by `w·Ĵ_explore + (1-w)·Ĵ_exploit` among those whose
/// terminal keeps `d_thre` from every teammate terminal; falls back to all
/// candidates when none qualifies. Ties go to the lowest index.
pub fn select_best(
    cands: &[CandidateTrajectory],
    mode: Mode,
    weights: &UtilityWeights,
    teammate_terminals: &[Pose],
) -> Option<Selection> {
    let norm = normalize_scores(cands);
    let w = weights.for_mode(mode);
    let spaced = |c: &CandidateTrajectory| teammate_terminals.iter().all(|t| t.distance(&c.terminal) >= weights.d_thre);
    let pick = |constrained: bool| {
        let mut best: Option<Selection> = None;
        for (i, (c, (je, jx))) in cands.iter().zip(&norm).enumerate() {
            if !c.feasible || (constrained && !spaced(c)) {
                continue;
            }
            let score = w * je + (1.0 - w) * jx;
            if best.is_none_or(|b| score > b.score) {
                best = Some(Selection { index: i, score, j_explore: *je, j_exploit: *jx, relaxed: !constrained });
            }
        }
        best
    };
    pick(true).or_else(|| pick(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planning::{CandidateKind, TimedPose};

    fn cand(je: f64, jx: f64, terminal: Pose) -> CandidateTrajectory {
        let mut c = CandidateTrajectory::new(CandidateKind::Stay, vec![TimedPose { t: 0.0, pose: terminal }], 0.0);
        c.j_explore = je;
        c.j_exploit = jx;
        c
    }

    #[test]
    fn weighted_choice() {
        let c = [cand(1.0, 0.0, Pose::new(0.0, 0.0)), cand(0.0, 1.0, Pose::new(10.0, 0.0))];
        let s = select_best(&c, Mode::Search, &UtilityWeights::default(), &[]).unwrap();
        assert_eq!(s.index, 1);
        assert!((s.score - 0.7).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_always_selected() {
        let c = [cand(0.0, 0.0, Pose::new(0.0, 0.0))];
        assert_eq!(select_best(&c, Mode::Track, &UtilityWeights::default(), &[]).unwrap().index, 0);
        assert!(select_best(&[], Mode::Track, &UtilityWeights::default(), &[]).is_none());
    }

    #[test]
    fn spacing_constraint_and_relaxation() {
        let c = [cand(1.0, 0.0, Pose::new(0.0, 0.0)), cand(0.0, 1.0, Pose::new(10.0, 0.0))];
        let w = UtilityWeights::default();
        let s = select_best(&c, Mode::Search, &w, &[Pose::new(11.0, 0.0)]).unwrap();
        assert_eq!((s.index, s.relaxed), (0, false));
        let s = select_best(&c, Mode::Search, &w, &[Pose::new(11.0, 0.0), Pose::new(1.0, 0.0)]).unwrap();
        assert_eq!((s.index, s.relaxed), (1, true));
    }
}
