//! Seeded synthetic AIS traffic with labeled anomalies.
//!
//! Geometry is planar: one degree of latitude or longitude is taken as 60
//! nautical miles. Vessels follow polyline route templates with a smooth
//! lateral offset, report at irregular 60 to 300 s intervals, and only test
//! tracks receive anomalies.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{normalize_cog, AisMessage, Roi};

/// Nautical miles per degree, on both axes.
pub const NM_PER_DEG: f64 = 60.0;
/// Simulation step in seconds. Report times are multiples of it.
const SIM_STEP: i64 = 10;
/// Wavelength range of the lateral wander, in degrees along the route.
const WANDER_WAVELENGTH: (f64, f64) = (0.3, 1.0);
/// Points used to discretize a curved off-route path.
const CURVE_POINTS: usize = 200;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A shipping lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTemplate {
    /// `(lat, lon)` polyline, traversed from first to last point.
    pub waypoints: Vec<(f64, f64)>,
    /// Knots.
    pub speed: f64,
    /// Std of the per-voyage speed, knots.
    pub speed_jitter: f64,
    /// Std of the lateral offset from the polyline, degrees.
    pub cross_track_std: f64,
    /// Relative traffic share.
    pub weight: f64,
    /// Std of the reported SOG around the true speed, knots.
    #[serde(default)]
    pub sog_noise: f64,
    /// Std of the reported COG around the true heading, degrees.
    #[serde(default)]
    pub cog_noise: f64,
}

impl RouteTemplate {
    /// A lane with report noise proportional to its lateral spread.
    pub fn new(waypoints: Vec<(f64, f64)>, speed: f64, cross_track_std: f64, weight: f64) -> Self {
        let noisy = cross_track_std > 0.0;
        RouteTemplate {
            waypoints,
            speed,
            speed_jitter: if noisy { 0.5 } else { 0.0 },
            cross_track_std,
            weight,
            sog_noise: if noisy { 0.2 } else { 0.0 },
            cog_noise: if noisy { 1.0 } else { 0.0 },
        }
    }

    fn validate(&self, roi: &Roi) -> Result<(), SynthError> {
        if self.waypoints.len() < 2 {
            return Err(SynthError::Config("a template needs at least 2 waypoints".into()));
        }
        if let Some(p) = self.waypoints.iter().find(|(la, lo)| !roi.contains(*la, *lo)) {
            return Err(SynthError::Config(format!("waypoint {p:?} lies outside the region of interest")));
        }
        if !(self.speed > 0.0) {
            return Err(SynthError::Config("template speed must be positive".into()));
        }
        if !(self.weight > 0.0) {
            return Err(SynthError::Config("template weight must be positive".into()));
        }
        for v in [self.speed_jitter, self.cross_track_std, self.sog_noise, self.cog_noise] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::Config("noise levels must be non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Lateral excursion of `magnitude` degrees held over the window.
    RouteDeviation,
    /// Heading reversed at the window start and again at its end; the
    /// return leg runs `magnitude` degrees to the side of the outbound one.
    UTurn,
    /// Speed multiplied by `magnitude` (in (0, 1)) over the window.
    SpeedDrop,
    /// The lane is replaced by a random curve between two points of the
    /// region, bulging up to `magnitude` degrees off the straight chord.
    OffRoutePath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub magnitude: f64,
    /// Window start as a fraction of the nominal voyage duration.
    pub onset: f64,
    /// Window length as a fraction of the nominal voyage duration.
    pub span: f64,
}

impl AnomalySpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.magnitude > 0.0 && self.magnitude.is_finite()) {
            return Err(SynthError::Config(format!("{:?} magnitude must be positive", self.kind)));
        }
        if self.kind == AnomalyKind::SpeedDrop && self.magnitude >= 1.0 {
            return Err(SynthError::Config("speed_drop factor must lie in (0, 1)".into()));
        }
        if !(self.onset > 0.0 && self.onset < 1.0) {
            return Err(SynthError::Config(format!("onset must lie in (0, 1), got {}", self.onset)));
        }
        if !(self.span > 0.0 && self.onset + self.span < 1.0) {
            return Err(SynthError::Config("window must end before the nominal voyage does".into()));
        }
        Ok(())
    }
}

/// Track counts per partition; `test` counts normal test tracks only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub roi: Roi,
    pub templates: Vec<RouteTemplate>,
    pub counts: Counts,
    /// One anomalous test track per entry.
    pub anomalies: Vec<AnomalySpec>,
    pub seed: u64,
    /// Earliest voyage start, unix seconds.
    pub t_start: i64,
    /// Voyage starts are spread uniformly over this many seconds.
    pub start_spread: i64,
    /// Bounds of the interval between reports, seconds.
    pub report_interval: (i64, i64),
}

impl Scenario {
    pub fn new(roi: Roi, templates: Vec<RouteTemplate>, counts: Counts, seed: u64) -> Self {
        Scenario {
            roi,
            templates,
            counts,
            anomalies: Vec::new(),
            seed,
            t_start: 1_500_000_000,
            start_spread: 30 * 86_400,
            report_interval: (60, 300),
        }
    }

    /// Two crossing one-way lanes in the Ushant rectangle.
    pub fn crossing_routes(counts: Counts, seed: u64) -> Self {
        let templates = vec![
            RouteTemplate::new(vec![(47.7, -6.8), (49.3, -4.2)], 12.0, 0.005, 0.5),
            RouteTemplate::new(vec![(49.3, -6.5), (47.7, -4.5)], 14.0, 0.005, 0.5),
        ];
        Scenario::new(Roi::USHANT, templates, counts, seed)
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !self.roi.is_valid() {
            return Err(SynthError::Config("roi bounds are not ordered".into()));
        }
        if self.templates.is_empty() {
            return Err(SynthError::Config("no route templates".into()));
        }
        for t in &self.templates {
            t.validate(&self.roi)?;
        }
        for a in &self.anomalies {
            a.validate()?;
        }
        let (lo, hi) = self.report_interval;
        if lo < SIM_STEP || hi < lo {
            return Err(SynthError::Config(format!("report interval {lo}..{hi} s is invalid")));
        }
        if self.start_spread < 0 {
            return Err(SynthError::Config("start_spread must be non-negative".into()));
        }
        Ok(())
    }
}

/// Polyline with cumulative arc length, in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<(f64, f64)>,
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        let mut cum = vec![0.0];
        for w in points.windows(2) {
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            cum.push(cum.last().copied().unwrap_or(0.0) + d);
        }
        Polyline { points, cum }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().expect("non-empty polyline")
    }

    /// Point at arc length `s` (clamped to the ends) and the unit tangent there.
    pub fn at(&self, s: f64) -> ((f64, f64), (f64, f64)) {
        let s = s.clamp(0.0, self.length());
        let mut i = self.cum.partition_point(|&c| c <= s).saturating_sub(1);
        i = i.min(self.points.len() - 2);
        while i > 0 && self.cum[i + 1] - self.cum[i] == 0.0 {
            i -= 1;
        }
        let (a, b) = (self.points[i], self.points[i + 1]);
        let seg = self.cum[i + 1] - self.cum[i];
        let tangent = if seg > 0.0 { ((b.0 - a.0) / seg, (b.1 - a.1) / seg) } else { (1.0, 0.0) };
        let w = s - self.cum[i];
        ((a.0 + w * tangent.0, a.1 + w * tangent.1), tangent)
    }

    /// Planar distance from a point to the polyline.
    pub fn distance(&self, p: (f64, f64)) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len2 = dx * dx + dy * dy;
                let u = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
                ((a.0 + u * dx - p.0).powi(2) + (a.1 + u * dy - p.1).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Smooth lateral offset `c0 + sum_j a_j sin(2 pi s / L_j + phi_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Wander {
    c0: f64,
    waves: [(f64, f64, f64); 2],
}

impl Wander {
    fn draw(std: f64, rng: &mut ChaCha8Rng) -> Self {
        if std == 0.0 {
            return Wander { c0: 0.0, waves: [(0.0, 1.0, 0.0); 2] };
        }
        let c = Normal::new(0.0, 0.6 * std).expect("finite std");
        let a = Normal::new(0.0, 0.4 * std).expect("finite std");
        let c0 = c.sample(rng);
        let mut wave = || {
            (
                a.sample(rng),
                rng.random_range(WANDER_WAVELENGTH.0..WANDER_WAVELENGTH.1),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        };
        Wander { c0, waves: [wave(), wave()] }
    }

    fn at(&self, s: f64) -> f64 {
        self.c0 + self.waves.iter().map(|(a, l, phi)| a * (std::f64::consts::TAU * s / l + phi).sin()).sum::<f64>()
    }
}

/// Generative description of one voyage.
#[derive(Debug, Clone, PartialEq)]
pub struct Voyage {
    pub mmsi: u64,
    pub t0: i64,
    pub path: Polyline,
    /// Knots.
    pub speed: f64,
    wander: Wander,
    jitter_std: f64,
    sog_noise: f64,
    cog_noise: f64,
    pub anomaly: Option<AnomalySpec>,
    /// Side of lateral anomalies, +1 or -1.
    side: f64,
    template: Option<usize>,
}

impl Voyage {
    /// Nominal duration in seconds at constant speed.
    pub fn nominal_duration(&self) -> f64 {
        self.path.length() * NM_PER_DEG / self.speed * 3600.0
    }

    /// Anomaly window `[start, end]` in seconds from the voyage start.
    fn window(&self) -> Option<(f64, f64)> {
        self.anomaly.map(|a| {
            let d = self.nominal_duration();
            if a.kind == AnomalyKind::OffRoutePath {
                (0.0, f64::INFINITY)
            } else {
                (a.onset * d, (a.onset + a.span) * d)
            }
        })
    }
}

/// Trapezoid in [0, 1] over `[a, b]` with ramps of `ramp` of the window on each side.
fn plateau(t: f64, a: f64, b: f64, ramp: f64) -> f64 {
    if t <= a || t >= b {
        return 0.0;
    }
    let r = ramp * (b - a);
    ((t - a) / r).min((b - t) / r).min(1.0)
}

fn draw_voyage(
    template: &RouteTemplate,
    index: usize,
    mmsi: u64,
    t0: i64,
    rng: &mut ChaCha8Rng,
) -> Voyage {
    let speed = if template.speed_jitter > 0.0 {
        let n = Normal::new(template.speed, template.speed_jitter).expect("finite std");
        n.sample(rng).max(0.3 * template.speed)
    } else {
        template.speed
    };
    Voyage {
        mmsi,
        t0,
        path: Polyline::new(template.waypoints.clone()),
        speed,
        wander: Wander::draw(template.cross_track_std, rng),
        jitter_std: 0.1 * template.cross_track_std,
        sog_noise: template.sog_noise,
        cog_noise: template.cog_noise,
        anomaly: None,
        side: if rng.random::<bool>() { 1.0 } else { -1.0 },
        template: Some(index),
    }
}

/// Attaches an anomaly to a normal voyage. `off_route_path` swaps the lane
/// for a random curve between two points of `roi` drawn from `seed`.
pub fn inject_anomaly(voyage: &Voyage, spec: &AnomalySpec, roi: &Roi, seed: u64) -> Result<Voyage, SynthError> {
    spec.validate()?;
    if voyage.anomaly.is_some() {
        return Err(SynthError::Config("voyage already carries an anomaly".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = voyage.clone();
    out.anomaly = Some(*spec);
    if spec.kind == AnomalyKind::OffRoutePath {
        let margin = 0.1 * (roi.lat_max - roi.lat_min).min(roi.lon_max - roi.lon_min);
        let point = |rng: &mut ChaCha8Rng| {
            (
                rng.random_range(roi.lat_min + margin..roi.lat_max - margin),
                rng.random_range(roi.lon_min + margin..roi.lon_max - margin),
            )
        };
        // endpoints at least a third of the region apart so the voyage is long enough
        let min_len = (roi.lat_max - roi.lat_min).max(roi.lon_max - roi.lon_min) / 3.0;
        let (a, b) = loop {
            let (a, b) = (point(&mut rng), point(&mut rng));
            if ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() >= min_len {
                break (a, b);
            }
        };
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = (dx * dx + dy * dy).sqrt();
        let bulge = spec.magnitude * rng.random_range(-1.0..1.0);
        let mid = ((a.0 + b.0) / 2.0 - bulge * 2.0 * dy / len, (a.1 + b.1) / 2.0 + bulge * 2.0 * dx / len);
        let curve = (0..=CURVE_POINTS)
            .map(|i| {
                let u = i as f64 / CURVE_POINTS as f64;
                let (w0, w1, w2) = ((1.0 - u).powi(2), 2.0 * u * (1.0 - u), u * u);
                (w0 * a.0 + w1 * mid.0 + w2 * b.0, w0 * a.1 + w1 * mid.1 + w2 * b.1)
            })
            .collect();
        out.path = Polyline::new(curve);
        out.template = None;
    }
    Ok(out)
}

/// Generated messages of one voyage.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrack {
    /// `"{mmsi}_{t0}"`, matching the id given to the first encoded chunk.
    pub track_id: String,
    pub mmsi: u64,
    /// Template followed, `None` for off-route voyages.
    pub template: Option<usize>,
    pub messages: Vec<AisMessage>,
}

/// Anomaly window in unix seconds, clipped to the voyage.
pub type Window = [i64; 2];

/// Renders a voyage into reports, clamping positions into `roi`.
pub fn render_voyage(
    voyage: &Voyage,
    roi: &Roi,
    report_interval: (i64, i64),
    seed: u64,
) -> (SynthTrack, Option<Window>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v_deg = voyage.speed / NM_PER_DEG / 3600.0;
    let window = voyage.window();
    let len = voyage.path.length();
    let kind = voyage.anomaly.map(|a| a.kind);
    let mag = voyage.anomaly.map_or(0.0, |a| a.magnitude);

    // forward simulation on a SIM_STEP grid
    let mut s = 0.0;
    let mut sims: Vec<(f64, f64, f64)> = Vec::new(); // (s, lateral extra, speed knots)
    let mut t = 0.0;
    let cap = 3.0 * voyage.nominal_duration() + 3600.0;
    loop {
        let in_window = window.is_some_and(|(a, b)| t >= a && t < b);
        let (mut dir, mut factor, mut extra) = (1.0, 1.0, 0.0);
        if let Some((a, b)) = window {
            match kind {
                Some(AnomalyKind::RouteDeviation) => extra = voyage.side * mag * plateau(t, a, b, 0.25),
                Some(AnomalyKind::UTurn) => {
                    extra = voyage.side * mag * plateau(t, a, b, 0.1);
                    if in_window {
                        dir = -1.0;
                    }
                }
                Some(AnomalyKind::SpeedDrop) if in_window => factor = mag,
                _ => {}
            }
        }
        sims.push((s, extra, voyage.speed * factor));
        if s >= len || t > cap {
            break;
        }
        s = (s + dir * factor * v_deg * SIM_STEP as f64).max(0.0);
        t += SIM_STEP as f64;
    }

    let position = |i: usize| {
        let (s, extra, _) = sims[i];
        let ((lat, lon), (tl, tn)) = voyage.path.at(s);
        let off = voyage.wander.at(s) + extra;
        (lat - tn * off, lon + tl * off)
    };
    let jitter = (voyage.jitter_std > 0.0).then(|| Normal::new(0.0, voyage.jitter_std).expect("finite std"));
    let sog_n = (voyage.sog_noise > 0.0).then(|| Normal::new(0.0, voyage.sog_noise).expect("finite std"));
    let cog_n = (voyage.cog_noise > 0.0).then(|| Normal::new(0.0, voyage.cog_noise).expect("finite std"));

    let last = sims.len() - 1;
    let (lo, hi) = report_interval;
    let mut messages = Vec::new();
    let mut i = 0usize;
    loop {
        let (mut lat, mut lon) = position(i);
        let (p0, p1) = (position(i.saturating_sub(3)), position((i + 3).min(last)));
        let heading = (p1.1 - p0.1).atan2(p1.0 - p0.0).to_degrees();
        let mut sog = sims[i].2;
        let mut cog = heading;
        if let Some(n) = &jitter {
            lat += n.sample(&mut rng);
            lon += n.sample(&mut rng);
        }
        if let Some(n) = &sog_n {
            sog += n.sample(&mut rng);
        }
        if let Some(n) = &cog_n {
            cog += n.sample(&mut rng);
        }
        messages.push(AisMessage {
            mmsi: voyage.mmsi,
            t: voyage.t0 + i as i64 * SIM_STEP,
            lat: lat.clamp(roi.lat_min, roi.lat_max),
            lon: lon.clamp(roi.lon_min, roi.lon_max),
            sog: sog.max(0.0),
            cog: normalize_cog(cog),
        });
        if i == last {
            break;
        }
        let step = rng.random_range(lo / SIM_STEP..=hi / SIM_STEP) as usize;
        i = (i + step).min(last);
    }
    let t_last = messages.last().expect("at least one report").t;
    let window = window.map(|(a, b)| {
        let b = if b.is_finite() { voyage.t0 + b.round() as i64 } else { t_last };
        [voyage.t0 + a.round() as i64, b.min(t_last)]
    });
    let track = SynthTrack {
        track_id: format!("{}_{}", voyage.mmsi, voyage.t0),
        mmsi: voyage.mmsi,
        template: voyage.template,
        messages,
    };
    (track, window)
}

/// Ground truth of one test track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLabel {
    pub track_id: String,
    pub mmsi: u64,
    pub anomalous: bool,
    pub kind: Option<AnomalyKind>,
    pub window: Option<Window>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub train: Vec<SynthTrack>,
    pub validation: Vec<SynthTrack>,
    pub test: Vec<SynthTrack>,
    /// One label per test track, in test order.
    pub labels: Vec<TrackLabel>,
}

/// First MMSI handed out; tracks get consecutive identifiers.
const MMSI_BASE: u64 = 200_000_000;

/// Generates all partitions from one seeded stream.
pub fn generate_scenario(scenario: &Scenario) -> Result<LabeledDataset, SynthError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let weights = WeightedIndex::new(scenario.templates.iter().map(|t| t.weight))
        .map_err(|e| SynthError::Config(format!("template weights: {e}")))?;
    let mut next_mmsi = MMSI_BASE;
    let mut normal = |rng: &mut ChaCha8Rng| {
        let k = weights.sample(rng);
        let t0 = scenario.t_start + rng.random_range(0..=scenario.start_spread);
        next_mmsi += 1;
        draw_voyage(&scenario.templates[k], k, next_mmsi, t0, rng)
    };
    let render = |v: &Voyage, rng: &mut ChaCha8Rng| {
        let seed = rng.random();
        render_voyage(v, &scenario.roi, scenario.report_interval, seed)
    };

    let c = scenario.counts;
    let mut train = Vec::with_capacity(c.train);
    for _ in 0..c.train {
        let v = normal(&mut rng);
        train.push(render(&v, &mut rng).0);
    }
    let mut validation = Vec::with_capacity(c.validation);
    for _ in 0..c.validation {
        let v = normal(&mut rng);
        validation.push(render(&v, &mut rng).0);
    }
    let mut test: Vec<(SynthTrack, TrackLabel)> = Vec::new();
    for _ in 0..c.test {
        let v = normal(&mut rng);
        let (t, _) = render(&v, &mut rng);
        let label = TrackLabel { track_id: t.track_id.clone(), mmsi: t.mmsi, anomalous: false, kind: None, window: None };
        test.push((t, label));
    }
    for spec in &scenario.anomalies {
        let base = normal(&mut rng);
        let v = inject_anomaly(&base, spec, &scenario.roi, rng.random())?;
        let (t, window) = render(&v, &mut rng);
        let label =
            TrackLabel { track_id: t.track_id.clone(), mmsi: t.mmsi, anomalous: true, kind: Some(spec.kind), window };
        test.push((t, label));
    }
    test.shuffle(&mut rng);
    let (test, labels) = test.into_iter().unzip();
    Ok(LabeledDataset { train, validation, test, labels })
}

/// Writes tracks in the default ingest CSV schema.
pub fn write_csv<W: Write>(tracks: &[SynthTrack], out: W) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mmsi", "timestamp", "lat", "lon", "sog", "cog"])?;
    for t in tracks {
        for m in &t.messages {
            w.write_record([
                m.mmsi.to_string(),
                m.t.to_string(),
                m.lat.to_string(),
                m.lon.to_string(),
                m.sog.to_string(),
                m.cog.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels<W: Write>(labels: &[TrackLabel], mut out: W) -> Result<(), SynthError> {
    for l in labels {
        serde_json::to_writer(&mut out, l)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_labels(text: &str) -> Result<Vec<TrackLabel>, SynthError> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

impl LabeledDataset {
    /// Writes `train.csv`, `validation.csv`, `test.csv` and `labels.jsonl` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_csv(&self.train, fs::File::create(dir.join("train.csv"))?)?;
        write_csv(&self.validation, fs::File::create(dir.join("validation.csv"))?)?;
        write_csv(&self.test, fs::File::create(dir.join("test.csv"))?)?;
        write_labels(&self.labels, fs::File::create(dir.join("labels.jsonl"))?)?;
        Ok(())
    }
}
