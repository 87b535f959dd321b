//! Verdict reports (JSON Lines and GeoJSON), their schema checks, and
//! evaluation against ground-truth labels.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::contrario::TrackVerdict;
use crate::fourhot::EncodedTrack;
use crate::synth::{AnomalyKind, TrackLabel};

/// One verdict as a JSON object.
pub fn verdict_json(v: &TrackVerdict) -> Value {
    json!({
        "track_id": v.track_id,
        "mmsi": v.mmsi,
        "t0": v.t0,
        "T": v.flags.len(),
        "abnormal": v.abnormal,
        "min_nfa": v.segment.nfa(),
        "log_min_nfa": v.segment.log_nfa,
        "segment": { "start": v.segment.start, "n": v.segment.n, "k": v.segment.k },
        "uncovered": v.uncovered,
        "scores": v.scores,
        "flags": v.flags,
        "p": v.p,
        "epsilon": v.epsilon,
    })
}

pub fn write_verdicts_jsonl<W: Write>(verdicts: &[TrackVerdict], mut out: W) -> std::io::Result<()> {
    for v in verdicts {
        serde_json::to_writer(&mut out, &verdict_json(v))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Fields of a verdict line needed downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub track_id: String,
    pub mmsi: u64,
    pub t0: i64,
    pub abnormal: bool,
    pub min_nfa: f64,
    pub log_min_nfa: f64,
}

pub fn read_verdicts(text: &str) -> Result<Vec<VerdictRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Value = serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1))?;
            validate_verdict_line(&v).map_err(|e| format!("line {}: {e}", i + 1))?;
            serde_json::from_value(v).map_err(|e| format!("line {}: {e}", i + 1))
        })
        .collect()
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value, String> {
    obj.get(name).ok_or_else(|| format!("missing field `{name}`"))
}

fn uint(obj: &Map<String, Value>, name: &str) -> Result<u64, String> {
    field(obj, name)?.as_u64().ok_or_else(|| format!("`{name}` must be a non-negative integer"))
}

/// Checks one verdict object against the documented schema:
/// `{track_id, mmsi, t0, T, abnormal, min_nfa, segment:{start,n,k}, uncovered, scores, flags}`
/// with `|scores| = |flags| = T`, `1 <= n`, `start + n <= T`, `k <= n`, `min_nfa > 0`.
pub fn validate_verdict_line(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("verdict must be an object")?;
    field(obj, "track_id")?.as_str().ok_or("`track_id` must be a string")?;
    uint(obj, "mmsi")?;
    field(obj, "t0")?.as_i64().ok_or("`t0` must be an integer")?;
    let t = uint(obj, "T")? as usize;
    let abnormal = field(obj, "abnormal")?.as_bool().ok_or("`abnormal` must be a boolean")?;
    let nfa = field(obj, "min_nfa")?.as_f64().ok_or("`min_nfa` must be a number")?;
    if !(nfa >= 0.0) {
        return Err("`min_nfa` must be non-negative".into());
    }
    let seg = field(obj, "segment")?.as_object().ok_or("`segment` must be an object")?;
    let (start, n, k) = (uint(seg, "start")? as usize, uint(seg, "n")? as usize, uint(seg, "k")? as usize);
    if n == 0 || start + n > t || k > n {
        return Err(format!("segment start {start} n {n} k {k} inconsistent with T = {t}"));
    }
    let uncovered = uint(obj, "uncovered")? as usize;
    if uncovered > t {
        return Err("`uncovered` exceeds T".into());
    }
    let scores = field(obj, "scores")?.as_array().ok_or("`scores` must be an array")?;
    if scores.len() != t || !scores.iter().all(Value::is_number) {
        return Err("`scores` must hold T numbers".into());
    }
    let flags = field(obj, "flags")?.as_array().ok_or("`flags` must be an array")?;
    if flags.len() != t || !flags.iter().all(Value::is_boolean) {
        return Err("`flags` must hold T booleans".into());
    }
    let counted = flags[start..start + n].iter().filter(|f| f.as_bool() == Some(true)).count();
    if counted != k {
        return Err(format!("segment claims k = {k} but holds {counted} flags"));
    }
    if let Some(eps) = obj.get("epsilon").and_then(Value::as_f64) {
        if let Some(log_nfa) = obj.get("log_min_nfa").and_then(Value::as_f64) {
            if abnormal != (log_nfa < eps.ln()) {
                return Err("`abnormal` disagrees with min_nfa < epsilon".into());
            }
        }
    }
    Ok(())
}

fn line_coords(track: &EncodedTrack, range: std::ops::Range<usize>) -> Vec<[f64; 2]> {
    let decoded = track.decoded();
    let mut coords: Vec<[f64; 2]> = decoded[range].iter().map(|s| [s.lon, s.lat]).collect();
    if coords.len() == 1 {
        // a LineString needs two positions
        coords.push(coords[0]);
    }
    coords
}

/// FeatureCollection with one LineString per track (`[lon, lat]` bin
/// centers) and one extra LineString per abnormal track covering its
/// minimum-NFA segment, tagged `role: "abnormal_segment"`.
pub fn verdicts_geojson(pairs: &[(&EncodedTrack, &TrackVerdict)]) -> Value {
    let mut features = Vec::new();
    for (track, v) in pairs {
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "LineString", "coordinates": line_coords(track, 0..track.len()) },
            "properties": {
                "track_id": v.track_id,
                "mmsi": v.mmsi,
                "role": "track",
                "abnormal": v.abnormal,
                "min_nfa": v.segment.nfa(),
            },
        }));
        if v.abnormal {
            let s = v.segment;
            features.push(json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": line_coords(track, s.start..s.start + s.n) },
                "properties": {
                    "track_id": v.track_id,
                    "mmsi": v.mmsi,
                    "role": "abnormal_segment",
                    "abnormal": true,
                    "min_nfa": s.nfa(),
                    "start": s.start,
                    "n": s.n,
                    "k": s.k,
                },
            }));
        }
    }
    json!({ "type": "FeatureCollection", "features": features })
}

/// Structural check of a FeatureCollection of LineString features carrying
/// `abnormal` and `min_nfa` properties.
pub fn validate_geojson(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("root must be an object")?;
    if obj.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err("root type must be FeatureCollection".into());
    }
    let features = field(obj, "features")?.as_array().ok_or("`features` must be an array")?;
    for (i, f) in features.iter().enumerate() {
        let err = |m: &str| format!("feature {i}: {m}");
        let f = f.as_object().ok_or_else(|| err("must be an object"))?;
        if f.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(err("type must be Feature"));
        }
        let g = f.get("geometry").and_then(Value::as_object).ok_or_else(|| err("missing geometry"))?;
        if g.get("type").and_then(Value::as_str) != Some("LineString") {
            return Err(err("geometry must be a LineString"));
        }
        let coords = g.get("coordinates").and_then(Value::as_array).ok_or_else(|| err("missing coordinates"))?;
        if coords.len() < 2 {
            return Err(err("a LineString needs at least two positions"));
        }
        for c in coords {
            let pos = c.as_array().ok_or_else(|| err("position must be an array"))?;
            let (lon, lat) = match pos.as_slice() {
                [a, b] => (a.as_f64(), b.as_f64()),
                _ => return Err(err("position must be [lon, lat]")),
            };
            match (lon, lat) {
                (Some(lon), Some(lat)) if (-180.0..=180.0).contains(&lon) && (-90.0..=90.0).contains(&lat) => {}
                _ => return Err(err("position out of range")),
            }
        }
        let p = f.get("properties").and_then(Value::as_object).ok_or_else(|| err("missing properties"))?;
        p.get("abnormal").and_then(Value::as_bool).ok_or_else(|| err("`abnormal` must be a boolean"))?;
        p.get("min_nfa").and_then(Value::as_f64).ok_or_else(|| err("`min_nfa` must be a number"))?;
        if let Some(role) = p.get("role") {
            match role.as_str() {
                Some("track") | Some("abnormal_segment") => {}
                _ => return Err(err("unknown role")),
            }
        }
    }
    Ok(())
}

/// Detection counts for one anomaly kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindCounts {
    pub detected: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub anomalies: usize,
    pub detected: usize,
    pub detection_rate: f64,
    pub normals: usize,
    pub false_positives: usize,
    pub false_positive_rate: f64,
    pub per_kind: BTreeMap<String, KindCounts>,
    /// Labeled vessels without any verdict.
    pub missing_verdicts: usize,
    /// Verdicts whose vessel has no label.
    pub unlabeled_verdicts: usize,
}

fn kind_name(k: AnomalyKind) -> String {
    serde_json::to_value(k).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Joins verdicts to labels by MMSI (a voyage may be split into several
/// encoded chunks); a vessel counts as detected when any of its chunks is
/// abnormal. Labels and verdicts without a partner are counted and skipped.
pub fn evaluate(verdicts: &[VerdictRecord], labels: &[TrackLabel]) -> EvalReport {
    let mut by_mmsi: HashMap<u64, bool> = HashMap::new();
    for v in verdicts {
        *by_mmsi.entry(v.mmsi).or_default() |= v.abnormal;
    }
    let labeled: std::collections::HashSet<u64> = labels.iter().map(|l| l.mmsi).collect();
    let unlabeled_verdicts = by_mmsi.keys().filter(|m| !labeled.contains(m)).count();
    let mut r = EvalReport {
        anomalies: 0,
        detected: 0,
        detection_rate: 0.0,
        normals: 0,
        false_positives: 0,
        false_positive_rate: 0.0,
        per_kind: BTreeMap::new(),
        missing_verdicts: 0,
        unlabeled_verdicts,
    };
    for l in labels {
        let Some(&flagged) = by_mmsi.get(&l.mmsi) else {
            r.missing_verdicts += 1;
            continue;
        };
        if l.anomalous {
            r.anomalies += 1;
            r.detected += flagged as usize;
            let e = r.per_kind.entry(l.kind.map(kind_name).unwrap_or_else(|| "unknown".into())).or_default();
            e.total += 1;
            e.detected += flagged as usize;
        } else {
            r.normals += 1;
            r.false_positives += flagged as usize;
        }
    }
    r.detection_rate = if r.anomalies > 0 { r.detected as f64 / r.anomalies as f64 } else { 0.0 };
    r.false_positive_rate = if r.normals > 0 { r.false_positives as f64 / r.normals as f64 } else { 0.0 };
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::Roi;
    use crate::contrario::SegmentFinding;
    use crate::fourhot::{FourHotSpec, FourHotVector};

    fn sample() -> (EncodedTrack, TrackVerdict) {
        let track = EncodedTrack {
            track_id: "7_0".into(),
            mmsi: 7,
            t0: 0,
            dt: 600,
            spec: FourHotSpec::with_default_resolution(Roi::USHANT),
            steps: (0..4).map(|i| FourHotVector { bins: [10 + i, 20, 5, 3] }).collect(),
        };
        let verdict = TrackVerdict {
            track_id: "7_0".into(),
            mmsi: 7,
            t0: 0,
            scores: vec![-1.0, -9.0, -1.5, -2.0],
            flags: vec![false, true, false, false],
            uncovered: 0,
            segment: SegmentFinding { start: 1, n: 1, k: 1, log_nfa: (10.0f64 * 0.1).ln() },
            abnormal: true,
            p: 0.1,
            epsilon: 2.0,
        };
        (track, verdict)
    }

    #[test]
    fn verdict_lines_validate_and_parse() {
        let (_, v) = sample();
        let mut buf = Vec::new();
        write_verdicts_jsonl(std::slice::from_ref(&v), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let value: Value = serde_json::from_str(text.trim()).unwrap();
        validate_verdict_line(&value).unwrap();
        let recs = read_verdicts(&text).unwrap();
        assert_eq!(recs[0].mmsi, 7);
        assert!(recs[0].abnormal);

        let mut bad = value.clone();
        bad["flags"] = json!([false, false, false, false]);
        assert!(validate_verdict_line(&bad).is_err());
        let mut bad = value;
        bad["T"] = json!(5);
        assert!(validate_verdict_line(&bad).is_err());
    }

    #[test]
    fn geojson_has_track_and_segment() {
        let (t, v) = sample();
        let g = verdicts_geojson(&[(&t, &v)]);
        validate_geojson(&g).unwrap();
        let features = g["features"].as_array().unwrap();
        assert_eq!(features.len(), 2);
        assert_eq!(features[1]["properties"]["role"], "abnormal_segment");
        // single-message segment is padded to two positions
        assert_eq!(features[1]["geometry"]["coordinates"].as_array().unwrap().len(), 2);
        let c = &features[0]["geometry"]["coordinates"][0];
        assert!((c[0].as_f64().unwrap() + 6.795).abs() < 1e-9 && (c[1].as_f64().unwrap() - 47.605).abs() < 1e-9);
        let mut bad = g.clone();
        bad["type"] = json!("Feature");
        assert!(validate_geojson(&bad).is_err());
    }

    fn label(mmsi: u64, anomalous: bool) -> TrackLabel {
        TrackLabel {
            track_id: format!("{mmsi}_0"),
            mmsi,
            anomalous,
            kind: anomalous.then_some(AnomalyKind::SpeedDrop),
            window: None,
        }
    }

    fn rec(mmsi: u64, abnormal: bool) -> VerdictRecord {
        VerdictRecord { track_id: format!("{mmsi}_0"), mmsi, t0: 0, abnormal, min_nfa: 1.0, log_min_nfa: 0.0 }
    }

    #[test]
    fn evaluation_rates() {
        let labels = vec![label(1, true), label(2, false), label(3, false)];
        let perfect = evaluate(&[rec(1, true), rec(2, false), rec(3, false)], &labels);
        assert_eq!((perfect.detection_rate, perfect.false_positive_rate), (1.0, 0.0));
        assert_eq!(perfect.per_kind["speed_drop"], KindCounts { detected: 1, total: 1 });
        let quiet = evaluate(&[rec(1, false), rec(2, false), rec(3, false)], &labels);
        assert_eq!(quiet.detection_rate, 0.0);
        let partial = evaluate(&[rec(1, true), rec(9, true)], &labels);
        assert_eq!((partial.missing_verdicts, partial.unlabeled_verdicts, partial.normals), (2, 1, 0));
    }
}
