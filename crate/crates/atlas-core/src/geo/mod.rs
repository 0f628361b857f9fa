//! Geodesic math and country distribution tables.

mod flowmap;

pub use flowmap::{
    flow_map, ClusterPolicy, Feature, FeatureKind, FlowDiagnostics, FlowMapDocument, GroupKey,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{display_hundredths, percent_hundredths};

/// Mean Earth radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    BadLatitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    BadLongitude(f64),
    #[error("no points to average")]
    NoPoints,
    #[error("weights must be positive and match the point count")]
    BadWeights,
    #[error("points balance out; the spherical mean is undefined")]
    DegenerateCentroid,
}

/// A validated coordinate pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(GeoError::BadLatitude(latitude));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(GeoError::BadLongitude(longitude));
        }
        Ok(GeoPoint {
            latitude,
            longitude,
        })
    }

    fn to_unit_vector(self) -> [f64; 3] {
        let lat = self.latitude.to_radians();
        let lon = self.longitude.to_radians();
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }
}

/// Great-circle distance in kilometers over the mean Earth radius.
/// Symmetric, zero on equal points, bounded by half the circumference.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat_a = a.latitude.to_radians();
    let lat_b = b.latitude.to_radians();
    let d_lat = (b.latitude - a.latitude).to_radians();
    let d_lon = (b.longitude - a.longitude).to_radians();
    let h = (d_lat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (d_lon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Weighted spherical mean: unit vectors averaged and renormalized.
/// Permutation-invariant. Antipodal balance (zero resultant) is an error.
pub fn spherical_centroid(points: &[GeoPoint], weights: &[f64]) -> Result<GeoPoint, GeoError> {
    if points.is_empty() {
        return Err(GeoError::NoPoints);
    }
    if weights.len() != points.len() || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(GeoError::BadWeights);
    }
    let mut sum = [0.0f64; 3];
    for (p, w) in points.iter().zip(weights) {
        let v = p.to_unit_vector();
        sum[0] += w * v[0];
        sum[1] += w * v[1];
        sum[2] += w * v[2];
    }
    let norm = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt();
    let total_weight: f64 = weights.iter().sum();
    if norm / total_weight < 1e-9 {
        return Err(GeoError::DegenerateCentroid);
    }
    let v = [sum[0] / norm, sum[1] / norm, sum[2] / norm];
    let latitude = v[2].clamp(-1.0, 1.0).asin().to_degrees();
    let longitude = v[1].atan2(v[0]).to_degrees();
    Ok(GeoPoint {
        latitude,
        longitude,
    })
}

/// Equal-weight convenience form of [`spherical_centroid`].
pub fn spherical_centroid_unweighted(points: &[GeoPoint]) -> Result<GeoPoint, GeoError> {
    spherical_centroid(points, &vec![1.0; points.len()])
}

/// One row of a country distribution table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryRow {
    pub country: String,
    pub count: u64,
    /// Percent of the role total in integer hundredths (43.25% -> 4325),
    /// rounded half-up.
    pub percent_hundredths: u64,
}

impl CountryRow {
    pub fn percent(&self) -> f64 {
        self.percent_hundredths as f64 / 100.0
    }

    /// "43.25"-style rendering.
    pub fn percent_display(&self) -> String {
        display_hundredths(self.percent_hundredths)
    }
}

/// Top-k country distribution for one role. Percentages are relative to
/// the role's full occurrence total, not just the displayed rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryTable {
    pub role: String,
    pub rows: Vec<CountryRow>,
    pub role_total: u64,
    pub distinct_countries: u64,
}

/// Pseudo-country for records without geolocation.
pub const UNKNOWN_COUNTRY: &str = "??";

/// Builds a table from pre-aggregated (country, occurrence count) pairs.
/// Rows sort by count descending (country ascending on ties) and truncate
/// to `k`.
pub fn country_table_from_counts<I, S>(counts: I, role: &str, k: usize) -> CountryTable
where
    I: IntoIterator<Item = (S, u64)>,
    S: Into<String>,
{
    let mut merged: BTreeMap<String, u64> = BTreeMap::new();
    for (country, count) in counts {
        *merged.entry(country.into()).or_insert(0) += count;
    }
    merged.retain(|_, count| *count > 0);
    let role_total: u64 = merged.values().sum();
    let distinct = merged.len() as u64;
    let mut rows: Vec<CountryRow> = merged
        .into_iter()
        .map(|(country, count)| CountryRow {
            percent_hundredths: percent_hundredths(count, role_total),
            country,
            count,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.country.cmp(&b.country)));
    rows.truncate(k);
    CountryTable {
        role: role.to_string(),
        rows,
        role_total,
        distinct_countries: distinct,
    }
}

/// Builds a table by counting role-tagged occurrences; records lacking a
/// country land under [`UNKNOWN_COUNTRY`].
pub fn country_table<'a, I>(countries: I, role: &str, k: usize) -> CountryTable
where
    I: IntoIterator<Item = Option<&'a str>>,
{
    country_table_from_counts(
        countries
            .into_iter()
            .map(|c| (c.unwrap_or(UNKNOWN_COUNTRY).to_string(), 1)),
        role,
        k,
    )
}
