//! Geographic normalcy reference: per-cell distributions of message scores.
//!
//! The region of interest is cut into square cells. Every validation message
//! contributes its score to the cell of its decoded position, and each cell
//! with enough samples gets a Gaussian or kernel density fit whose CDF later
//! decides whether a test message is unusually unlikely for that place.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ais::Roi;
use crate::fourhot::EncodedTrack;
use crate::vrnn::{track_seed, ModelError, VrnnModel};

/// Offsets `floor` against landing just below an integer.
const CELL_NUDGE: f64 = 1e-9;
/// Lower bound of a fitted Gaussian standard deviation.
pub const GAUSSIAN_STD_FLOOR: f64 = 1e-6;
/// Lower bound of a KDE bandwidth.
pub const KDE_BANDWIDTH_FLOOR: f64 = 1e-3;
pub const DEFAULT_CELL_SIZE: f64 = 0.1;
pub const DEFAULT_M_MIN: usize = 50;

pub const CELLMAP_MAGIC: &[u8; 8] = b"GTNCMAP1";
pub const CELLMAP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CellMapError {
    #[error("point ({lat}, {lon}) lies outside the region of interest")]
    OutOfRoi { lat: f64, lon: f64 },
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("cell {0} is inactive")]
    InactiveCell(usize),
    #[error("invalid cell map configuration: {0}")]
    Config(String),
    #[error("kde needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("cell map file: {0}")]
    Format(String),
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Square cells over the region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub roi: Roi,
    /// Degrees, applied to both latitude and longitude.
    pub cell_size: f64,
}

impl Grid {
    pub fn new(roi: Roi, cell_size: f64) -> Result<Self, CellMapError> {
        if !roi.is_valid() {
            return Err(CellMapError::Config("roi bounds are not ordered".into()));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(CellMapError::Config(format!("cell_size must be positive, got {cell_size}")));
        }
        Ok(Grid { roi, cell_size })
    }

    fn count(extent: f64, size: f64) -> usize {
        ((extent / size) - CELL_NUDGE).ceil().max(1.0) as usize
    }

    pub fn n_rows(&self) -> usize {
        Self::count(self.roi.lat_max - self.roi.lat_min, self.cell_size)
    }

    pub fn n_cols(&self) -> usize {
        Self::count(self.roi.lon_max - self.roi.lon_min, self.cell_size)
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows() * self.n_cols()
    }

    /// `(row, col)` of a cell index.
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.n_cols(), index % self.n_cols())
    }

    /// Geometric center of a cell.
    pub fn center(&self, index: usize) -> (f64, f64) {
        let (r, c) = self.row_col(index);
        (
            self.roi.lat_min + (r as f64 + 0.5) * self.cell_size,
            self.roi.lon_min + (c as f64 + 0.5) * self.cell_size,
        )
    }
}

fn axis_index(offset: f64, size: f64, n: usize) -> usize {
    let i = (offset / size + CELL_NUDGE).floor();
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(n - 1)
    }
}

/// Row-major cell index of a point; points on the upper edges go to the last row/column.
pub fn cell_of(lat: f64, lon: f64, grid: &Grid) -> Result<usize, CellMapError> {
    if !grid.roi.contains(lat, lon) {
        return Err(CellMapError::OutOfRoi { lat, lon });
    }
    let row = axis_index(lat - grid.roi.lat_min, grid.cell_size, grid.n_rows());
    let col = axis_index(lon - grid.roi.lon_min, grid.cell_size, grid.n_cols());
    Ok(row * grid.n_cols() + col)
}

/// Which distribution family to fit in active cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Gaussian,
    Kde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellForm {
    Gaussian { mean: f64, std: f64 },
    Kde { samples: Vec<f64>, bandwidth: f64 },
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellModel {
    pub index: usize,
    /// Number of validation messages that fell in the cell.
    pub count: usize,
    pub form: CellForm,
}

impl CellModel {
    pub fn is_active(&self) -> bool {
        !matches!(self.form, CellForm::Inactive)
    }

    /// Mean and standard deviation of the fitted distribution's samples, for
    /// reporting. `None` for inactive cells.
    pub fn summary(&self) -> Option<(f64, f64)> {
        match &self.form {
            CellForm::Gaussian { mean, std } => Some((*mean, *std)),
            CellForm::Kde { samples, .. } => Some(mean_std(samples)),
            CellForm::Inactive => None,
        }
    }
}

/// Sample mean and (n - 1) standard deviation; the std of one sample is 0.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Gaussian fit with the standard deviation floored at [`GAUSSIAN_STD_FLOOR`].
pub fn fit_gaussian(samples: &[f64]) -> Result<CellForm, CellMapError> {
    if samples.is_empty() {
        return Err(CellMapError::TooFewSamples(0));
    }
    let (mean, std) = mean_std(samples);
    Ok(CellForm::Gaussian { mean, std: std.max(GAUSSIAN_STD_FLOOR) })
}

/// Silverman bandwidth `0.9 min(std, IQR / 1.34) m^(-1/5)`, floored at [`KDE_BANDWIDTH_FLOOR`].
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64, CellMapError> {
    let m = samples.len();
    if m < 2 {
        return Err(CellMapError::TooFewSamples(m));
    }
    let (_, std) = mean_std(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = std.min(iqr / 1.34);
    Ok((0.9 * spread * (m as f64).powf(-0.2)).max(KDE_BANDWIDTH_FLOOR))
}

/// Gaussian-kernel density keeping every sample.
pub fn fit_kde(samples: &[f64]) -> Result<CellForm, CellMapError> {
    let bandwidth = silverman_bandwidth(samples)?;
    Ok(CellForm::Kde { samples: samples.to_vec(), bandwidth })
}

/// `P(L < l)` under the cell's fitted distribution.
pub fn cell_cdf(cell: &CellModel, l: f64) -> Result<f64, CellMapError> {
    form_cdf(&cell.form, l).ok_or(CellMapError::InactiveCell(cell.index))
}

fn form_cdf(form: &CellForm, l: f64) -> Option<f64> {
    match form {
        CellForm::Gaussian { mean, std } => Some(std_normal_cdf((l - mean) / std)),
        CellForm::Kde { samples, bandwidth } => {
            let s: f64 = samples.iter().map(|s| std_normal_cdf((l - s) / bandwidth)).sum();
            Some(s / samples.len() as f64)
        }
        CellForm::Inactive => None,
    }
}

/// Where a cell map came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the model checkpoint bytes.
    pub model_hash: String,
    /// SHA-256 of the validation tracks (see [`tracks_hash`]).
    pub validation_hash: String,
    /// Per-message quantile the map is meant to be used with.
    pub p: f64,
    pub m_min: usize,
    /// Monte Carlo samples per step used for scoring.
    pub samples: usize,
    pub seed: u64,
}

/// Settings of [`build_cell_map`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub cell_size: f64,
    pub m_min: usize,
    pub form: FormKind,
    pub samples: usize,
    pub seed: u64,
    pub p: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig { cell_size: DEFAULT_CELL_SIZE, m_min: DEFAULT_M_MIN, form: FormKind::Kde, samples: 16, seed: 0, p: 0.1 }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<(), CellMapError> {
        if self.m_min == 0 || (self.form == FormKind::Kde && self.m_min < 2) {
            return Err(CellMapError::Config(format!("m_min {} too small for {:?} cells", self.m_min, self.form)));
        }
        if self.samples == 0 {
            return Err(CellMapError::Config("samples must be at least 1".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(CellMapError::Config(format!("p must lie in (0, 1), got {}", self.p)));
        }
        Ok(())
    }
}

/// Dense array of fitted cells over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMap {
    pub grid: Grid,
    pub form: FormKind,
    pub cells: Vec<CellModel>,
    pub provenance: Provenance,
}

/// SHA-256 over track ids and their active bins.
pub fn tracks_hash(tracks: &[EncodedTrack]) -> String {
    let mut h = Sha256::new();
    for t in tracks {
        h.update(t.track_id.as_bytes());
        h.update([0u8]);
        for s in &t.steps {
            for b in s.bins {
                h.update((b as u64).to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

/// Fits every cell from its collected samples. `samples[i]` belongs to cell `i`.
pub fn fit_cells(samples: Vec<Vec<f64>>, m_min: usize, form: FormKind) -> Result<Vec<CellModel>, CellMapError> {
    samples
        .into_iter()
        .enumerate()
        .map(|(index, s)| {
            let count = s.len();
            let form = if count < m_min || count == 0 {
                CellForm::Inactive
            } else {
                match form {
                    FormKind::Gaussian => fit_gaussian(&s)?,
                    FormKind::Kde => fit_kde(&s)?,
                }
            };
            Ok(CellModel { index, count, form })
        })
        .collect()
}

/// Cell of every message of `track`, from its decoded positions.
pub fn track_cells(track: &EncodedTrack, grid: &Grid) -> Vec<Option<usize>> {
    track.decoded().iter().map(|s| cell_of(s.lat, s.lon, grid).ok()).collect()
}

/// Scores every validation track and fits the per-cell distributions.
pub fn build_cell_map(model: &VrnnModel, tracks: &[EncodedTrack], cfg: &MapConfig) -> Result<CellMap, CellMapError> {
    cfg.validate()?;
    if tracks.is_empty() {
        return Err(CellMapError::EmptyValidation);
    }
    let grid = Grid::new(model.spec.roi, cfg.cell_size)?;
    let scored: Vec<Result<Vec<f64>, ModelError>> = tracks
        .par_iter()
        .map(|t| model.score_track(t, cfg.samples, track_seed(cfg.seed, &t.track_id)))
        .collect();
    let mut samples = vec![Vec::new(); grid.n_cells()];
    for (track, scores) in tracks.iter().zip(scored) {
        let scores = scores?;
        for (cell, l) in track_cells(track, &grid).into_iter().zip(scores) {
            if let Some(c) = cell {
                samples[c].push(l);
            }
        }
    }
    let cells = fit_cells(samples, cfg.m_min, cfg.form)?;
    Ok(CellMap {
        grid,
        form: cfg.form,
        cells,
        provenance: Provenance {
            model_hash: model.content_hash(),
            validation_hash: tracks_hash(tracks),
            p: cfg.p,
            m_min: cfg.m_min,
            samples: cfg.samples,
            seed: cfg.seed,
        },
    })
}

impl CellMap {
    pub fn cell(&self, index: usize) -> &CellModel {
        &self.cells[index]
    }

    /// CDF of `l` in cell `index`; `None` for inactive cells.
    pub fn cdf(&self, index: usize, l: f64) -> Option<f64> {
        form_cdf(&self.cells[index].form, l)
    }

    pub fn active_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_active()).count()
    }

    pub fn total_samples(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }
}

/// Writes `cell_row, cell_col, lat_center, lon_center, count, mean, std`
/// for every cell; inactive cells leave mean and std empty.
pub fn write_performance_map<W: Write>(map: &CellMap, out: W) -> Result<(), CellMapError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_row", "cell_col", "lat_center", "lon_center", "count", "mean", "std"])?;
    for cell in &map.cells {
        let (r, c) = map.grid.row_col(cell.index);
        let (lat, lon) = map.grid.center(cell.index);
        let (mean, std) = match cell.summary() {
            Some((m, s)) => (m.to_string(), s.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([r.to_string(), c.to_string(), lat.to_string(), lon.to_string(), cell.count.to_string(), mean, std])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_performance_map(map: &CellMap, path: impl AsRef<Path>) -> Result<(), CellMapError> {
    write_performance_map(map, fs::File::create(path)?)
}

// Container: magic, u64 LE header length, JSON header, then KDE samples as
// f64 LE. Each KDE cell header records its sample offset (in values) and count.

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum CellEntry {
    Gaussian { count: usize, mean: f64, std: f64 },
    Kde { count: usize, bandwidth: f64, offset: usize },
    Inactive { count: usize },
}

#[derive(Serialize, Deserialize)]
struct MapHeader {
    format_version: u32,
    grid: Grid,
    provenance: Provenance,
    form: FormKind,
    m_min: usize,
    cells: Vec<CellEntry>,
}

fn bad(msg: impl Into<String>) -> CellMapError {
    CellMapError::Format(msg.into())
}

impl CellMap {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload: Vec<f64> = Vec::new();
        let cells = self
            .cells
            .iter()
            .map(|c| match &c.form {
                CellForm::Gaussian { mean, std } => CellEntry::Gaussian { count: c.count, mean: *mean, std: *std },
                CellForm::Kde { samples, bandwidth } => {
                    let offset = payload.len();
                    payload.extend_from_slice(samples);
                    CellEntry::Kde { count: c.count, bandwidth: *bandwidth, offset }
                }
                CellForm::Inactive => CellEntry::Inactive { count: c.count },
            })
            .collect();
        let header = MapHeader {
            format_version: CELLMAP_FORMAT_VERSION,
            grid: self.grid,
            provenance: self.provenance.clone(),
            form: self.form,
            m_min: self.provenance.m_min,
            cells,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * payload.len());
        out.extend_from_slice(CELLMAP_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CellMapError> {
        if bytes.len() < 16 || &bytes[..8] != CELLMAP_MAGIC {
            return Err(bad("missing magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let end = 16usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: MapHeader = serde_json::from_slice(&bytes[16..end]).map_err(|e| bad(format!("header: {e}")))?;
        if header.format_version != CELLMAP_FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", header.format_version)));
        }
        let grid = Grid::new(header.grid.roi, header.grid.cell_size)?;
        if header.cells.len() != grid.n_cells() {
            return Err(bad(format!("{} cells for a grid of {}", header.cells.len(), grid.n_cells())));
        }
        let payload = &bytes[end..];
        if !payload.len().is_multiple_of(8) {
            return Err(bad("payload is not a whole number of f64 values"));
        }
        let values: Vec<f64> =
            payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let cells = header
            .cells
            .into_iter()
            .enumerate()
            .map(|(index, e)| {
                let (count, form) = match e {
                    CellEntry::Gaussian { count, mean, std } => (count, CellForm::Gaussian { mean, std }),
                    CellEntry::Kde { count, bandwidth, offset } => {
                        let s = values
                            .get(offset..offset + count)
                            .ok_or_else(|| bad(format!("cell {index} samples out of range")))?;
                        (count, CellForm::Kde { samples: s.to_vec(), bandwidth })
                    }
                    CellEntry::Inactive { count } => (count, CellForm::Inactive),
                };
                Ok(CellModel { index, count, form })
            })
            .collect::<Result<Vec<_>, CellMapError>>()?;
        Ok(CellMap { grid, form: header.form, cells, provenance: header.provenance })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CellMapError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CellMapError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ushant() -> Grid {
        Grid::new(Roi::USHANT, 0.1).unwrap()
    }

    fn provenance() -> Provenance {
        Provenance { model_hash: "m".into(), validation_hash: "v".into(), p: 0.1, m_min: 3, samples: 1, seed: 0 }
    }

    #[test]
    fn cell_indices() {
        let g = ushant();
        assert_eq!((g.n_rows(), g.n_cols()), (20, 30));
        assert_eq!(cell_of(47.55, -6.95, &g).unwrap(), 0);
        assert_eq!(g.row_col(cell_of(48.34, -5.01, &g).unwrap()), (8, 19));
        assert_eq!(g.row_col(cell_of(49.5, -4.0, &g).unwrap()), (19, 29));
        assert!(matches!(cell_of(50.0, -5.0, &g), Err(CellMapError::OutOfRoi { .. })));
    }

    #[test]
    fn degenerate_gaussian_and_inactive() {
        let cells = fit_cells(vec![vec![-5.0; 3], vec![1.0; 2]], 3, FormKind::Gaussian).unwrap();
        assert_eq!(cells[0].form, CellForm::Gaussian { mean: -5.0, std: 1e-6 });
        assert_eq!(cells[1].form, CellForm::Inactive);
        let cells = fit_cells(vec![vec![0.0; 10]], 50, FormKind::Kde).unwrap();
        assert!(!cells[0].is_active());
        assert!(matches!(cell_cdf(&cells[0], 0.0), Err(CellMapError::InactiveCell(0))));
    }

    #[test]
    fn kde_bandwidth() {
        assert_eq!(silverman_bandwidth(&[0.0; 4]).unwrap(), 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        let bw = silverman_bandwidth(&s).unwrap();
        assert!((bw - 0.226).abs() < 0.02, "{bw}");
        let scaled: Vec<f64> = s.iter().map(|x| 3.0 * x).collect();
        assert!((silverman_bandwidth(&scaled).unwrap() - 3.0 * bw).abs() < 1e-12);
        assert!(matches!(silverman_bandwidth(&[1.0]), Err(CellMapError::TooFewSamples(1))));
    }

    #[test]
    fn cdf_examples() {
        let g = CellModel { index: 0, count: 100, form: CellForm::Gaussian { mean: -5.0, std: 1.0 } };
        assert_eq!(cell_cdf(&g, -5.0).unwrap(), 0.5);
        let k = CellModel { index: 0, count: 2, form: CellForm::Kde { samples: vec![-1.0, 1.0], bandwidth: 0.7 } };
        assert!((cell_cdf(&k, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let k = CellModel { index: 0, count: 3, form: CellForm::Kde { samples: vec![-10.0, -8.0, -6.0], bandwidth: 0.5 } };
        let expected = (std_normal_cdf(2.0) + std_normal_cdf(-2.0) + std_normal_cdf(-6.0)) / 3.0;
        assert!((cell_cdf(&k, -9.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.3333).abs() < 1e-4);
    }

    #[test]
    fn gaussian_self_calibration_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<f64> = (0..400).map(|_| -6.0 + 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let cell = CellModel { index: 0, count: s.len(), form: fit_gaussian(&s).unwrap() };
        let frac = s.iter().filter(|&&l| cell_cdf(&cell, l).unwrap() < 0.1).count() as f64 / s.len() as f64;
        assert!((0.02..=0.25).contains(&frac), "{frac}");
    }

    #[test]
    fn narrow_kde_matches_empirical_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let cell = CellModel { index: 0, count: s.len(), form: CellForm::Kde { samples: s.clone(), bandwidth: 1e-6 } };
        for l in [-1.5, -0.3, 0.01, 0.8] {
            let empirical = s.iter().filter(|&&x| x < l).count() as f64 / s.len() as f64;
            assert!((cell_cdf(&cell, l).unwrap() - empirical).abs() <= 1.0 / s.len() as f64);
        }
    }

    fn sample_map(form: FormKind) -> CellMap {
        let g = Grid::new(Roi { lat_min: 48.0, lat_max: 48.3, lon_min: -5.0, lon_max: -4.8 }, 0.1).unwrap();
        let mut samples = vec![Vec::new(); g.n_cells()];
        samples[1] = vec![-3.25, -4.5, -5.125, -2.0];
        samples[4] = vec![-1.0, -1.5];
        CellMap { grid: g, form, cells: fit_cells(samples, 3, form).unwrap(), provenance: provenance() }
    }

    #[test]
    fn performance_map_is_dense_and_exact() {
        for form in [FormKind::Gaussian, FormKind::Kde] {
            let map = sample_map(form);
            let mut buf = Vec::new();
            write_performance_map(&map, &mut buf).unwrap();
            let mut rdr = csv::Reader::from_reader(buf.as_slice());
            let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
            assert_eq!(rows.len(), map.grid.n_cells());
            let (mean, std) = map.cells[1].summary().unwrap();
            assert!((rows[1][5].parse::<f64>().unwrap() - mean).abs() < 1e-9);
            assert!((rows[1][6].parse::<f64>().unwrap() - std).abs() < 1e-9);
            assert_eq!(&rows[4][4], "2");
            assert_eq!(&rows[4][5], "");
        }
    }

    #[test]
    fn file_round_trip() {
        for form in [FormKind::Gaussian, FormKind::Kde] {
            let map = sample_map(form);
            let back = CellMap::from_bytes(&map.to_bytes()).unwrap();
            assert_eq!(back, map);
        }
        let bytes = sample_map(FormKind::Kde).to_bytes();
        assert!(CellMap::from_bytes(&bytes[..bytes.len() - 8]).is_err());
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_with_limits(
            samples in prop::collection::vec(-50.0f64..0.0, 2..40),
            a in -60.0f64..10.0,
            b in -60.0f64..10.0,
        ) {
            let forms = [fit_gaussian(&samples).unwrap(), fit_kde(&samples).unwrap()];
            for form in forms {
                let cell = CellModel { index: 0, count: samples.len(), form };
                let (lo, hi) = (a.min(b), a.max(b));
                prop_assert!(cell_cdf(&cell, lo).unwrap() <= cell_cdf(&cell, hi).unwrap());
                prop_assert!(cell_cdf(&cell, -1e6).unwrap() < 1e-12);
                prop_assert!(cell_cdf(&cell, 1e6).unwrap() > 1.0 - 1e-12);
            }
        }

        #[test]
        fn every_roi_point_has_one_cell(lat in 47.5f64..=49.5, lon in -7.0f64..=-4.0) {
            let g = ushant();
            let idx = cell_of(lat, lon, &g).unwrap();
            prop_assert!(idx < g.n_cells());
        }
    }
}
