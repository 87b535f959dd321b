//! A contrario segment test on per-message flags.
//!
//! A message is flagged when its score falls below the `p`-quantile of its
//! cell. Under the background hypothesis flags are independent Bernoulli(p),
//! so a contiguous segment of `n` messages holding `k` flags has tail
//! probability `B(n, k, p)`. Weighting by the number of segments
//! `N_s = T(T+1)/2` gives the number of false alarms `NFA = N_s B(n, k, p)`,
//! and a track is abnormal when some segment has `NFA < epsilon`. All
//! comparisons run on natural logarithms so tiny tails never underflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::cellmap::{track_cells, CellMap};
use crate::compute::log_sum_exp;
use crate::fourhot::EncodedTrack;
use crate::vrnn::{track_seed, ModelError, VrnnModel};

pub const DEFAULT_P: f64 = 0.1;
/// Segment lengths covered by the table built in [`Detector::new`].
const DEFAULT_TABLE_LEN: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum ContrarioError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid detector configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Per-message quantile.
    pub p: f64,
    /// NFA threshold.
    pub epsilon: f64,
    /// Monte Carlo samples per step when scoring.
    pub samples: usize,
    pub seed: u64,
}

impl DetectorConfig {
    pub fn new(epsilon: f64) -> Self {
        DetectorConfig { p: DEFAULT_P, epsilon, samples: 16, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), ContrarioError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(ContrarioError::Config(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.epsilon > 0.0) {
            return Err(ContrarioError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.samples == 0 {
            return Err(ContrarioError::Config("samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of contiguous segments of a track of length `t`.
pub fn n_segments(t: usize) -> u64 {
    let t = t as u64;
    t * (t + 1) / 2
}

fn check_p(p: f64) -> Result<(), ContrarioError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(ContrarioError::Domain(format!("p must lie in (0, 1), got {p}")))
    }
}

fn log_choose(n: usize, i: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(i as f64 + 1.0) - ln_gamma((n - i) as f64 + 1.0)
}

fn log_pmf(n: usize, i: usize, lp: f64, lq: f64) -> f64 {
    log_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq
}

/// `ln P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn log_binomial_tail(n: usize, k: usize, p: f64) -> Result<f64, ContrarioError> {
    check_p(p)?;
    if k > n {
        return Err(ContrarioError::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms: Vec<f64> = (k..=n).map(|i| log_pmf(n, i, lp, lq)).collect();
    Ok(log_sum_exp(&terms).min(0.0))
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_tail(n: usize, k: usize, p: f64) -> Result<f64, ContrarioError> {
    Ok(log_binomial_tail(n, k, p)?.exp())
}

/// Binomial probability mass `P(X = i)`.
pub fn binomial_pmf(n: usize, i: usize, p: f64) -> Result<f64, ContrarioError> {
    check_p(p)?;
    if i > n {
        return Err(ContrarioError::Domain(format!("i = {i} exceeds n = {n}")));
    }
    Ok(log_pmf(n, i, p.ln(), (-p).ln_1p()).exp())
}

/// `ln B(n, k, p)` for every `k <= n <= n_max`.
#[derive(Debug, Clone)]
pub struct TailTable {
    p: f64,
    rows: Vec<Vec<f64>>,
}

impl TailTable {
    pub fn new(p: f64, n_max: usize) -> Result<Self, ContrarioError> {
        check_p(p)?;
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let mut rows = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let mut row = vec![0.0; n + 1];
            // suffix log-sum-exp from k = n down to k = 1
            let mut acc = f64::NEG_INFINITY;
            for k in (1..=n).rev() {
                let t = log_pmf(n, k, lp, lq);
                let (hi, lo) = if acc > t { (acc, t) } else { (t, acc) };
                acc = hi + (lo - hi).exp().ln_1p();
                row[k] = acc.min(0.0);
            }
            rows.push(row);
        }
        Ok(TailTable { p, rows })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn log_tail(&self, n: usize, k: usize) -> f64 {
        self.rows[n][k]
    }
}

/// The most significant segment of a track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentFinding {
    pub start: usize,
    pub n: usize,
    pub k: usize,
    /// `ln NFA`.
    pub log_nfa: f64,
}

impl SegmentFinding {
    pub fn nfa(&self) -> f64 {
        self.log_nfa.exp()
    }
}

/// Result of testing one track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackVerdict {
    pub track_id: String,
    pub mmsi: u64,
    pub t0: i64,
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
    /// Messages whose cell is inactive or off the grid.
    pub uncovered: usize,
    pub segment: SegmentFinding,
    pub abnormal: bool,
    pub p: f64,
    pub epsilon: f64,
}

impl TrackVerdict {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Whether score `l` is below the `p`-quantile of cell `cell`. Messages
/// outside the grid or in inactive cells are never flagged.
pub fn flag_message(l: f64, cell: Option<usize>, map: &CellMap, p: f64) -> bool {
    cell.and_then(|c| map.cdf(c, l)).is_some_and(|cdf| cdf < p)
}

/// Segment search with a precomputed tail table.
#[derive(Debug, Clone)]
pub struct Detector {
    pub config: DetectorConfig,
    table: TailTable,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self, ContrarioError> {
        config.validate()?;
        Ok(Detector { config, table: TailTable::new(config.p, DEFAULT_TABLE_LEN)? })
    }

    /// Minimum-NFA segment over all contiguous segments of `flags`. Ties go
    /// to the earlier start, then to the longer segment.
    pub fn min_nfa(&self, flags: &[bool]) -> Result<SegmentFinding, ContrarioError> {
        let t = flags.len();
        if t == 0 {
            return Err(ContrarioError::Shape("empty track".into()));
        }
        let extended;
        let table = if t > self.table.n_max() {
            extended = TailTable::new(self.config.p, t)?;
            &extended
        } else {
            &self.table
        };
        let log_ns = (n_segments(t) as f64).ln();
        let mut prefix = vec![0usize; t + 1];
        for (i, &f) in flags.iter().enumerate() {
            prefix[i + 1] = prefix[i] + f as usize;
        }
        let mut best = SegmentFinding { start: 0, n: 1, k: prefix[1], log_nfa: f64::INFINITY };
        for start in 0..t {
            for n in 1..=t - start {
                let k = prefix[start + n] - prefix[start];
                let v = log_ns + table.log_tail(n, k);
                if v < best.log_nfa || (v == best.log_nfa && start == best.start && n > best.n) {
                    best = SegmentFinding { start, n, k, log_nfa: v };
                }
            }
        }
        Ok(best)
    }

    /// Flags, segment search and verdict for one scored track.
    pub fn detect_track(
        &self,
        track: &EncodedTrack,
        scores: Vec<f64>,
        cells: &[Option<usize>],
        map: &CellMap,
    ) -> Result<TrackVerdict, ContrarioError> {
        if scores.len() != cells.len() || scores.len() != track.len() {
            return Err(ContrarioError::Shape(format!(
                "{} scores, {} cells, {} messages",
                scores.len(),
                cells.len(),
                track.len()
            )));
        }
        let p = self.config.p;
        let flags: Vec<bool> = scores.iter().zip(cells).map(|(&l, &c)| flag_message(l, c, map, p)).collect();
        let uncovered = cells.iter().filter(|c| c.is_none_or(|i| !map.cell(i).is_active())).count();
        let segment = self.min_nfa(&flags)?;
        Ok(TrackVerdict {
            track_id: track.track_id.clone(),
            mmsi: track.mmsi,
            t0: track.t0,
            scores,
            flags,
            uncovered,
            abnormal: segment.log_nfa < self.config.epsilon.ln(),
            segment,
            p,
            epsilon: self.config.epsilon,
        })
    }
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Contrario(#[from] ContrarioError),
}

/// Scores every track with `model` and tests it against `map`. Track noise
/// comes from `track_seed(cfg.seed, track_id)`, so verdicts do not depend on
/// the order or grouping of `tracks`.
pub fn detect_tracks(
    model: &VrnnModel,
    map: &CellMap,
    tracks: &[EncodedTrack],
    cfg: DetectorConfig,
) -> Result<Vec<TrackVerdict>, DetectError> {
    let detector = Detector::new(cfg)?;
    tracks
        .par_iter()
        .map(|t| {
            let scores = model.score_track(t, cfg.samples, track_seed(cfg.seed, &t.track_id))?;
            let cells = track_cells(t, &map.grid);
            Ok(detector.detect_track(t, scores, &cells, map)?)
        })
        .collect()
}

/// Baseline: abnormal iff the summed score is below `threshold`.
pub fn global_threshold_detect(scores: &[f64], threshold: f64) -> bool {
    scores.iter().sum::<f64>() < threshold
}

/// Number of tracks with `min NFA < epsilon` for each epsilon in `grid`,
/// from cached `ln(min NFA)` values.
pub fn sweep_epsilon(log_min_nfas: &[f64], grid: &[f64]) -> Result<Vec<(f64, usize)>, ContrarioError> {
    if grid.is_empty() {
        return Err(ContrarioError::Config("epsilon grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|e| !(**e > 0.0)) {
        return Err(ContrarioError::Config(format!("epsilon must be positive, got {bad}")));
    }
    Ok(grid.iter().map(|&e| (e, log_min_nfas.iter().filter(|&&v| v < e.ln()).count())).collect())
}
