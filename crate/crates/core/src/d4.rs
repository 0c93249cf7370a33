//! Data-driven depth discretization: partition a depth multiset into N
//! levels of equal summed importance.
//!
//! The importance of a point at depth `z` is `z^gamma`. `gamma = 0` weights
//! every point equally, so levels receive equal pixel counts; `gamma = 2`
//! weights points by the frontal surface area a pixel covers at that depth,
//! so levels receive equal 3D surface area.
//!
//! Boundaries are weighted quantiles of the sorted multiset. The cut for
//! target `k·W/N` lands after the last point whose cumulative weight does
//! not exceed the target: a point whose cumulative weight equals the target
//! exactly stays in the lower level, while a point whose weight straddles
//! the target moves to the upper level. A run of equal depths can never be
//! split (boundaries sit at midpoints of adjacent distinct depths), so a
//! straddling run joins whichever side leaves the smaller deviation, lower
//! side on a tie. For multisets without straddling runs each level's summed
//! importance is within the largest single-point weight of `W/N`; a heavy
//! run weakens that slack to half the run's weight.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum D4Error {
    #[error("empty depth input")]
    EmptyInput,
    #[error("depth must be positive and finite, got {0}")]
    NonPositiveDepth(f64),
    #[error("importance index must be finite, got {0}")]
    InvalidGamma(f64),
    #[error("level count must be at least 1")]
    InvalidLevelCount,
    #[error("need at least {needed} distinct depths for {needed} levels, got {distinct}")]
    TooFewDistinctDepths { distinct: usize, needed: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("histogram needs at least one bin")]
    InvalidBinCount,
    #[error("histogram range must satisfy lo < hi, got [{0}, {1}]")]
    InvalidRange(f64, f64),
}

/// A fitted depth partition: `n_levels` half-open depth ranges
/// `[b_{n-1}, b_n)` (the last range closed above) plus one representative
/// depth per level.
///
/// Boundaries are strictly increasing except in the single-level constant
/// case, where the observed min and max coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct LevelPartition {
    gamma: f64,
    boundaries: Vec<f64>,
    rep_depths: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPartition {
    gamma: f64,
    boundaries: Vec<f64>,
    rep_depths: Vec<f64>,
}

impl TryFrom<RawPartition> for LevelPartition {
    type Error = D4Error;

    fn try_from(raw: RawPartition) -> Result<Self, D4Error> {
        LevelPartition::new(raw.gamma, raw.boundaries, raw.rep_depths)
    }
}

impl LevelPartition {
    pub fn new(gamma: f64, boundaries: Vec<f64>, rep_depths: Vec<f64>) -> Result<Self, D4Error> {
        if !gamma.is_finite() {
            return Err(D4Error::InvalidGamma(gamma));
        }
        if rep_depths.is_empty() {
            return Err(D4Error::InvalidLevelCount);
        }
        if boundaries.len() != rep_depths.len() + 1 {
            return Err(D4Error::InvalidPartition(format!(
                "{} boundaries for {} levels",
                boundaries.len(),
                rep_depths.len()
            )));
        }
        if boundaries.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(D4Error::InvalidPartition(
                "boundaries must be finite and non-negative".into(),
            ));
        }
        let single = rep_depths.len() == 1;
        for w in boundaries.windows(2) {
            if w[0] > w[1] || (w[0] == w[1] && !single) {
                return Err(D4Error::InvalidPartition(format!(
                    "boundaries not strictly increasing at {} >= {}",
                    w[0], w[1]
                )));
            }
        }
        for (n, &z) in rep_depths.iter().enumerate() {
            if !(z > 0.0 && z.is_finite()) {
                return Err(D4Error::NonPositiveDepth(z));
            }
            if z < boundaries[n] || z > boundaries[n + 1] {
                return Err(D4Error::InvalidPartition(format!(
                    "representative depth {z} outside level {} range [{}, {}]",
                    n + 1,
                    boundaries[n],
                    boundaries[n + 1]
                )));
            }
        }
        Ok(Self {
            gamma,
            boundaries,
            rep_depths,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_levels(&self) -> usize {
        self.rep_depths.len()
    }

    /// `n_levels + 1` values: observed min, the inner cuts, observed max.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// One importance-weighted median depth per level.
    pub fn rep_depths(&self) -> &[f64] {
        &self.rep_depths
    }
}

/// Importance weight of a point at depth `z`: `z^gamma`.
pub fn importance(z: f64, gamma: f64) -> Result<f64, D4Error> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(D4Error::NonPositiveDepth(z));
    }
    if !gamma.is_finite() {
        return Err(D4Error::InvalidGamma(gamma));
    }
    Ok(z.powf(gamma))
}

struct Run {
    z: f64,
    weight: f64,
    count: usize,
}

/// Fits equal-importance level boundaries over a depth multiset.
///
/// Needs at least `n_levels` distinct depth values so that every level is
/// non-empty and separated by a boundary between distinct depths.
pub fn fit_partition(
    depths: &[f64],
    gamma: f64,
    n_levels: usize,
) -> Result<LevelPartition, D4Error> {
    if depths.is_empty() {
        return Err(D4Error::EmptyInput);
    }
    if n_levels == 0 {
        return Err(D4Error::InvalidLevelCount);
    }
    for &d in depths {
        if !(d > 0.0 && d.is_finite()) {
            return Err(D4Error::NonPositiveDepth(d));
        }
    }

    let mut sorted = depths.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut runs: Vec<Run> = Vec::new();
    for &z in &sorted {
        match runs.last_mut() {
            Some(run) if run.z == z => run.count += 1,
            _ => runs.push(Run {
                z,
                weight: 0.0,
                count: 1,
            }),
        }
    }
    for run in &mut runs {
        run.weight = run.count as f64 * importance(run.z, gamma)?;
    }
    let r_count = runs.len();
    if r_count < n_levels {
        return Err(D4Error::TooFewDistinctDepths {
            distinct: r_count,
            needed: n_levels,
        });
    }

    let mut cum = Vec::with_capacity(r_count);
    let mut acc = 0.0;
    for run in &runs {
        acc += run.weight;
        cum.push(acc);
    }
    let total = acc;

    // cuts[k-1] = number of runs contained in levels 1..=k; clamping keeps
    // the cuts strictly increasing so that no level is empty.
    let mut cuts = Vec::with_capacity(n_levels - 1);
    let mut prev = 0usize;
    for k in 1..n_levels {
        let target = total * k as f64 / n_levels as f64;
        let r = cum.partition_point(|&c| c < target).min(r_count - 1);
        let cut = if cum[r] <= target {
            r + 1
        } else if runs[r].count == 1 {
            r
        } else {
            let before = if r == 0 { 0.0 } else { cum[r - 1] };
            if cum[r] - target <= target - before {
                r + 1
            } else {
                r
            }
        };
        let cut = cut.clamp(prev + 1, r_count - (n_levels - k));
        cuts.push(cut);
        prev = cut;
    }

    let mut boundaries = Vec::with_capacity(n_levels + 1);
    boundaries.push(runs[0].z);
    for &cut in &cuts {
        boundaries.push((runs[cut - 1].z + runs[cut].z) / 2.0);
    }
    boundaries.push(runs[r_count - 1].z);

    let mut rep_depths = Vec::with_capacity(n_levels);
    let mut start = 0usize;
    for &end in cuts.iter().chain(std::iter::once(&r_count)) {
        let level_total: f64 = runs[start..end].iter().map(|r| r.weight).sum();
        let mut acc = 0.0;
        let mut rep = runs[end - 1].z;
        for run in &runs[start..end] {
            acc += run.weight;
            if acc >= level_total / 2.0 {
                rep = run.z;
                break;
            }
        }
        rep_depths.push(rep);
        start = end;
    }

    LevelPartition::new(gamma, boundaries, rep_depths)
}

/// The 1-based level owning depth `z`: `z ∈ [b_{n-1}, b_n)` with the last
/// level closed above; out-of-range depths clamp to the nearest level.
pub fn assign_level(part: &LevelPartition, z: f64) -> Result<usize, D4Error> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(D4Error::NonPositiveDepth(z));
    }
    let inner = &part.boundaries[1..part.boundaries.len() - 1];
    Ok(inner.partition_point(|&b| b <= z) + 1)
}

/// Fixed-width histogram of depths over `[range.0, range.1]`; out-of-range
/// values are skipped, the upper endpoint falls in the last bin.
pub fn depth_histogram(
    depths: &[f64],
    n_bins: usize,
    range: (f64, f64),
) -> Result<Vec<usize>, D4Error> {
    if depths.is_empty() {
        return Err(D4Error::EmptyInput);
    }
    if n_bins == 0 {
        return Err(D4Error::InvalidBinCount);
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(D4Error::InvalidRange(lo, hi));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &z in depths {
        if !z.is_finite() || z < lo || z > hi {
            continue;
        }
        let bin = (((z - lo) / width) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn importance_examples() {
        assert_eq!(importance(3.0, 2.0).unwrap(), 9.0);
        assert_eq!(importance(5.0, 0.0).unwrap(), 1.0);
        assert_eq!(importance(2.0, 1.0).unwrap(), 2.0);
        assert!(matches!(
            importance(0.0, 1.0),
            Err(D4Error::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn fit_equal_weights_splits_counts() {
        let part = fit_partition(&[1.0, 2.0, 3.0, 4.0], 0.0, 2).unwrap();
        assert_eq!(part.boundaries(), &[1.0, 2.5, 4.0]);
        assert_eq!(assign_level(&part, 1.0).unwrap(), 1);
        assert_eq!(assign_level(&part, 2.0).unwrap(), 1);
        assert_eq!(assign_level(&part, 3.0).unwrap(), 2);
        assert_eq!(assign_level(&part, 4.0).unwrap(), 2);
    }

    #[test]
    fn fit_two_point_quadratic() {
        // Weights are {1, 4}; the second point straddles the target 2.5 and
        // moves up, leaving level sums 1 and 4, both within 4 of 2.5.
        let part = fit_partition(&[1.0, 2.0], 2.0, 2).unwrap();
        assert_eq!(part.boundaries(), &[1.0, 1.5, 2.0]);
        assert!((1.0f64 - 2.5).abs() <= 4.0);
        assert!((4.0f64 - 2.5).abs() <= 4.0);
        assert_eq!(assign_level(&part, 1.0).unwrap(), 1);
        assert_eq!(assign_level(&part, 2.0).unwrap(), 2);
    }

    #[test]
    fn fit_balances_importance_against_cumulative_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let depths: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.5..9.5)).collect();
        for gamma in [0.0, 0.5, 1.0, 2.0] {
            for n in [2usize, 3, 4] {
                let part = fit_partition(&depths, gamma, n).unwrap();
                let mut sums = vec![0.0f64; n];
                let mut counts = vec![0usize; n];
                let mut w_max = 0.0f64;
                for &z in &depths {
                    let level = assign_level(&part, z).unwrap();
                    let w = importance(z, gamma).unwrap();
                    sums[level - 1] += w;
                    counts[level - 1] += 1;
                    w_max = w_max.max(w);
                }
                let total: f64 = sums.iter().sum();
                for &s in &sums {
                    assert!(
                        (s - total / n as f64).abs() <= w_max,
                        "gamma={gamma} n={n}: level sum {s} vs target {}",
                        total / n as f64
                    );
                }
                if gamma == 0.0 {
                    let per = depths.len() as f64 / n as f64;
                    for &c in &counts {
                        assert!((c as f64 - per).abs() <= 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn fit_rejects_degenerate_inputs() {
        assert!(matches!(
            fit_partition(&[], 1.0, 2),
            Err(D4Error::EmptyInput)
        ));
        assert!(matches!(
            fit_partition(&[2.0, 2.0], 1.0, 2),
            Err(D4Error::TooFewDistinctDepths {
                distinct: 1,
                needed: 2
            })
        ));
        assert!(matches!(
            fit_partition(&[1.0, -1.0], 1.0, 1),
            Err(D4Error::NonPositiveDepth(_))
        ));
        assert!(matches!(
            fit_partition(&[1.0, 2.0], 1.0, 0),
            Err(D4Error::InvalidLevelCount)
        ));
    }

    #[test]
    fn fit_single_level_constant_depths() {
        let part = fit_partition(&[2.0, 2.0, 2.0], 1.0, 1).unwrap();
        assert_eq!(part.boundaries(), &[2.0, 2.0]);
        assert_eq!(part.rep_depths(), &[2.0]);
        assert_eq!(assign_level(&part, 0.5).unwrap(), 1);
        assert_eq!(assign_level(&part, 9.0).unwrap(), 1);
    }

    #[test]
    fn assign_level_half_open_with_clamp() {
        let part = LevelPartition::new(1.0, vec![0.0, 2.0, 5.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(assign_level(&part, 1.99).unwrap(), 1);
        assert_eq!(assign_level(&part, 2.0).unwrap(), 2);
        assert_eq!(assign_level(&part, 7.0).unwrap(), 2);
        assert!(assign_level(&part, 0.0).is_err());
    }

    #[test]
    fn partition_constructor_rejects_bad_shapes() {
        assert!(LevelPartition::new(1.0, vec![0.0, 5.0, 2.0], vec![1.0, 3.0]).is_err());
        assert!(LevelPartition::new(1.0, vec![0.0, 2.0], vec![1.0, 3.0]).is_err());
        assert!(LevelPartition::new(1.0, vec![0.0, 2.0, 5.0], vec![1.0, 7.0]).is_err());
        assert!(LevelPartition::new(f64::NAN, vec![0.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(
            depth_histogram(&[1.0, 1.0, 3.0], 2, (0.0, 4.0)).unwrap(),
            vec![2, 1]
        );
        // The upper endpoint belongs to the last bin.
        assert_eq!(depth_histogram(&[4.0], 2, (0.0, 4.0)).unwrap(), vec![0, 1]);
        assert!(matches!(
            depth_histogram(&[], 2, (0.0, 4.0)),
            Err(D4Error::EmptyInput)
        ));
        assert!(depth_histogram(&[1.0], 0, (0.0, 4.0)).is_err());
        assert!(depth_histogram(&[1.0], 2, (4.0, 0.0)).is_err());
    }

    #[test]
    fn histogram_skews_near_for_occluded_scene() {
        // A near plane hiding most of a far plane: 3/4 of pixels at 1 m.
        let mut depths = vec![1.0; 300];
        depths.extend(vec![6.0; 100]);
        let counts = depth_histogram(&depths, 4, (0.0, 8.0)).unwrap();
        assert_eq!(counts, vec![300, 0, 0, 100]);
        assert!(counts[0] > counts[3]);
    }

    #[test]
    fn partition_json_roundtrip() {
        let part = fit_partition(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.5, 3).unwrap();
        let text = serde_json::to_string(&part).unwrap();
        let back: LevelPartition = serde_json::from_str(&text).unwrap();
        assert_eq!(back, part);

        let bad = r#"{"gamma":1.0,"boundaries":[3.0,1.0],"rep_depths":[2.0]}"#;
        assert!(serde_json::from_str::<LevelPartition>(bad).is_err());
    }

    fn depths_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.1f64..50.0, 20..200)
    }

    proptest! {
        #[test]
        fn fitted_boundaries_bracket_observations(
            depths in depths_strategy(),
            n in 1usize..5,
            gamma_idx in 0usize..4,
        ) {
            let gamma = [0.0, 0.5, 1.0, 2.0][gamma_idx];
            let part = match fit_partition(&depths, gamma, n) {
                Ok(p) => p,
                Err(D4Error::TooFewDistinctDepths { .. }) => return Ok(()),
                Err(e) => panic!("unexpected error: {e}"),
            };
            let min = depths.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = depths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let b = part.boundaries();
            prop_assert_eq!(b[0], min);
            prop_assert_eq!(b[b.len() - 1], max);
            for w in b.windows(2) {
                prop_assert!(w[0] < w[1] || (n == 1 && w[0] == w[1]));
            }
            for (k, &z) in part.rep_depths().iter().enumerate() {
                prop_assert!(b[k] <= z && z <= b[k + 1]);
            }
        }

        #[test]
        fn fitted_levels_balance_within_max_weight(
            depths in depths_strategy(),
            n in 2usize..5,
            gamma_idx in 0usize..4,
        ) {
            let gamma = [0.0, 0.5, 1.0, 2.0][gamma_idx];
            let part = match fit_partition(&depths, gamma, n) {
                Ok(p) => p,
                Err(D4Error::TooFewDistinctDepths { .. }) => return Ok(()),
                Err(e) => panic!("unexpected error: {e}"),
            };
            let mut sums = vec![0.0f64; n];
            let mut w_max = 0.0f64;
            for &z in &depths {
                let w = importance(z, gamma).unwrap();
                sums[assign_level(&part, z).unwrap() - 1] += w;
                w_max = w_max.max(w);
            }
            let total: f64 = sums.iter().sum();
            for &s in &sums {
                prop_assert!((s - total / n as f64).abs() <= w_max + 1e-9);
            }
        }

        #[test]
        fn boundaries_never_drop_as_gamma_rises(
            depths in depths_strategy(),
            n in 2usize..5,
        ) {
            let gammas = [0.0, 0.5, 1.0, 2.0];
            let mut prev: Option<Vec<f64>> = None;
            for gamma in gammas {
                let part = match fit_partition(&depths, gamma, n) {
                    Ok(p) => p,
                    Err(D4Error::TooFewDistinctDepths { .. }) => return Ok(()),
                    Err(e) => panic!("unexpected error: {e}"),
                };
                let b = part.boundaries().to_vec();
                if let Some(p) = &prev {
                    for (lo, hi) in p.iter().zip(&b) {
                        prop_assert!(hi >= lo, "boundary dropped from {lo} to {hi}");
                    }
                }
                prev = Some(b);
            }
        }

        #[test]
        fn assign_matches_item_cut_oracle(
            depths in depths_strategy(),
            n in 2usize..5,
            gamma_idx in 0usize..4,
        ) {
            let gamma = [0.0, 0.5, 1.0, 2.0][gamma_idx];
            let mut sorted = depths.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
            prop_assume!(distinct && sorted.len() >= n);

            // Independent single-pass oracle: cut after the last item whose
            // cumulative weight stays at or below each target.
            let weights: Vec<f64> =
                sorted.iter().map(|&z| importance(z, gamma).unwrap()).collect();
            let total: f64 = weights.iter().sum();
            let mut oracle_cuts = Vec::new();
            for k in 1..n {
                let target = total * k as f64 / n as f64;
                let mut acc = 0.0;
                let mut cut = 0;
                for (m, &w) in weights.iter().enumerate() {
                    acc += w;
                    if acc <= target {
                        cut = m + 1;
                    } else {
                        break;
                    }
                }
                oracle_cuts.push(cut);
            }
            let strictly_increasing = oracle_cuts.windows(2).all(|w| w[0] < w[1])
                && oracle_cuts.first().is_none_or(|&c| c >= 1)
                && oracle_cuts.last().is_none_or(|&c| c < sorted.len());
            prop_assume!(strictly_increasing);

            let part = fit_partition(&depths, gamma, n).unwrap();
            let mut counts = vec![0usize; n];
            for &z in &sorted {
                counts[assign_level(&part, z).unwrap() - 1] += 1;
            }
            let mut expected = Vec::new();
            let mut prev = 0;
            for &c in &oracle_cuts {
                expected.push(c - prev);
                prev = c;
            }
            expected.push(sorted.len() - prev);
            prop_assert_eq!(counts, expected);
        }
    }
}
