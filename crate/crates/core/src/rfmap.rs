//! Fingerprint radio map.
//!
//! A [`FingerprintMap`] is a set of surveyed landmarks, each carrying the RSS
//! vector (dBm, one entry per access point) measured at its position. The
//! particle filter uses it as a measurement predictor: a hypothesis position
//! "observes" whatever its nearest landmark recorded.
//!
//! Coordinates are in a local frame with the origin at the area corner and
//! axes aligned with the area edges.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest RSS accepted at ingestion, dBm.
pub const RSS_MIN_DBM: f64 = -100.0;
/// Highest RSS accepted at ingestion, dBm.
pub const RSS_MAX_DBM: f64 = 0.0;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("failed to access map file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed map JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid map at `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl MapError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        MapError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// A position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance_squared(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        self.distance_squared(other).sqrt()
    }
}

/// Ordered RSS readings in dBm, one per access point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RssVector(Vec<f64>);

impl RssVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for RssVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// A surveyed position with its recorded fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: usize,
    pub position: Point2,
    pub rss: RssVector,
}

/// Immutable radio map. Construct through [`FingerprintMap::new`] or
/// [`load_map`], both of which enforce the map invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintMap {
    area_length: f64,
    area_width: f64,
    ap_ids: Vec<String>,
    landmarks: Vec<Landmark>,
}

impl FingerprintMap {
    /// Validates and builds a map.
    ///
    /// Landmark ids must be exactly `0..L` in order, every RSS vector must
    /// have one finite entry per access point inside `[-100, 0]` dBm, and
    /// every landmark must lie inside the area.
    pub fn new(
        area_length: f64,
        area_width: f64,
        ap_ids: Vec<String>,
        landmarks: Vec<Landmark>,
    ) -> Result<Self, MapError> {
        if !(area_length.is_finite() && area_length > 0.0) {
            return Err(MapError::invalid(
                "area.length_m",
                format!("must be positive and finite, got {area_length}"),
            ));
        }
        if !(area_width.is_finite() && area_width > 0.0) {
            return Err(MapError::invalid(
                "area.width_m",
                format!("must be positive and finite, got {area_width}"),
            ));
        }
        if ap_ids.is_empty() {
            return Err(MapError::invalid("ap_ids", "at least one access point is required"));
        }
        if landmarks.is_empty() {
            return Err(MapError::invalid("landmarks", "at least one landmark is required"));
        }
        let k = ap_ids.len();
        for (index, lm) in landmarks.iter().enumerate() {
            let field = |name: &str| format!("landmarks[{index}].{name}");
            if lm.id != index {
                return Err(MapError::invalid(
                    field("id"),
                    format!("ids must be dense and ordered 0..L-1; expected {index}, got {}", lm.id),
                ));
            }
            if !lm.position.is_finite() {
                return Err(MapError::invalid(field("x_m/y_m"), "coordinates must be finite"));
            }
            let p = lm.position;
            if p.x < 0.0 || p.x > area_length || p.y < 0.0 || p.y > area_width {
                return Err(MapError::invalid(
                    field("x_m/y_m"),
                    format!("landmark {index} at ({}, {}) lies outside the area", p.x, p.y),
                ));
            }
            if lm.rss.len() != k {
                return Err(MapError::invalid(
                    field("rss_dbm"),
                    format!("landmark {index} has {} RSS entries but the map has {k} access points", lm.rss.len()),
                ));
            }
            for (j, &v) in lm.rss.values().iter().enumerate() {
                if !v.is_finite() || !(RSS_MIN_DBM..=RSS_MAX_DBM).contains(&v) {
                    return Err(MapError::invalid(
                        format!("landmarks[{index}].rss_dbm[{j}]"),
                        format!("landmark {index} RSS {v} outside [{RSS_MIN_DBM}, {RSS_MAX_DBM}] dBm"),
                    ));
                }
            }
        }
        Ok(Self {
            area_length,
            area_width,
            ap_ids,
            landmarks,
        })
    }

    pub fn area_length(&self) -> f64 {
        self.area_length
    }

    pub fn area_width(&self) -> f64 {
        self.area_width
    }

    pub fn ap_ids(&self) -> &[String] {
        &self.ap_ids
    }

    /// Number of access points, K.
    pub fn ap_count(&self) -> usize {
        self.ap_ids.len()
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn landmark(&self, id: usize) -> Option<&Landmark> {
        self.landmarks.get(id)
    }

    /// Id of the landmark closest to `p` in Euclidean distance. Equal
    /// distances resolve to the lowest id.
    pub fn nearest_landmark(&self, p: Point2) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for lm in &self.landmarks {
            let d = lm.position.distance_squared(&p);
            // strict comparison keeps the earliest (lowest id) on ties
            if d < best_d {
                best_d = d;
                best = lm.id;
            }
        }
        best
    }

    /// Fingerprint of the nearest landmark, returned unmodified.
    pub fn predicted_rss(&self, p: Point2) -> &RssVector {
        &self.landmarks[self.nearest_landmark(p)].rss
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AreaFile {
    length_m: f64,
    width_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkFile {
    id: usize,
    x_m: f64,
    y_m: f64,
    rss_dbm: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    area: AreaFile,
    ap_ids: Vec<String>,
    landmarks: Vec<LandmarkFile>,
}

impl From<&FingerprintMap> for MapFile {
    fn from(map: &FingerprintMap) -> Self {
        MapFile {
            area: AreaFile {
                length_m: map.area_length,
                width_m: map.area_width,
            },
            ap_ids: map.ap_ids.clone(),
            landmarks: map
                .landmarks
                .iter()
                .map(|lm| LandmarkFile {
                    id: lm.id,
                    x_m: lm.position.x,
                    y_m: lm.position.y,
                    rss_dbm: lm.rss.values().to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MapFile> for FingerprintMap {
    type Error = MapError;

    fn try_from(file: MapFile) -> Result<Self, MapError> {
        let landmarks = file
            .landmarks
            .into_iter()
            .map(|lm| Landmark {
                id: lm.id,
                position: Point2::new(lm.x_m, lm.y_m),
                rss: RssVector::new(lm.rss_dbm),
            })
            .collect();
        FingerprintMap::new(file.area.length_m, file.area.width_m, file.ap_ids, landmarks)
    }
}

/// Parses a map from its JSON text.
pub fn map_from_json(text: &str) -> Result<FingerprintMap, MapError> {
    let file: MapFile = serde_json::from_str(text)?;
    file.try_into()
}

/// Serializes a map to pretty-printed JSON. Floats use the shortest
/// representation that round-trips exactly.
pub fn map_to_json(map: &FingerprintMap) -> String {
    // a MapFile holds only strings, integers and f64s, so this cannot fail
    serde_json::to_string_pretty(&MapFile::from(map)).expect("map serialization")
}

pub fn load_map(path: impl AsRef<Path>) -> Result<FingerprintMap, MapError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    map_from_json(&text)
}

pub fn save_map(map: &FingerprintMap, path: impl AsRef<Path>) -> Result<(), MapError> {
    let path = path.as_ref();
    let mut text = map_to_json(map);
    text.push('\n');
    fs::write(path, text).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })
}
