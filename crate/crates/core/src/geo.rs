//! Great-circle distance and adaptive-radius candidate station search.
//!
//! Candidate generation expands a search radius in fixed steps until at
//! least `min_count` stations fall inside, then returns everything within
//! that radius. Empty results are possible when the cap is reached without
//! finding anything; downstream treats those as zero-candidate events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Earth's mean radius in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A point on the sphere, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidInput(format!(
                "coordinates out of range: ({lat}, {lon})"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// A station id paired with its location, the unit of candidate search.
#[derive(Debug, Clone, PartialEq)]
pub struct StationRef {
    pub station_id: u64,
    pub location: GeoPoint,
}

/// Great-circle distance between two points in km.
///
/// half-angle form: `a = sin^2(dlat/2) + cos(lat1) cos(lat2) sin^2(dlon/2)`,
/// `d = 2 R atan2(sqrt(a), sqrt(1-a))`.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();

    let s = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // s can exceed 1 by a few ulps for antipodal pairs
    let s = s.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_KM * s.sqrt().atan2((1.0 - s).sqrt())
}

/// Search parameters for adaptive candidate lookup.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchConfig {
    pub min_count: usize,
    pub r_start_km: f64,
    pub r_step_km: f64,
    pub r_max_km: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            min_count: 3,
            r_start_km: 1.0,
            r_step_km: 1.0,
            r_max_km: 10.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_count < 1 {
            return Err(Error::InvalidConfig("min_count must be >= 1".into()));
        }
        if !(self.r_start_km > 0.0 && self.r_start_km <= self.r_max_km && self.r_step_km > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid radius schedule: start={} step={} max={}",
                self.r_start_km, self.r_step_km, self.r_max_km
            )));
        }
        Ok(())
    }

    /// The radius schedule `r_start, r_start+step, ..., r_max`. The cap is
    /// always the final entry even when the step grid overshoots it.
    pub fn radii(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let r = self.r_start_km + f64::from(i) * self.r_step_km;
            if r >= self.r_max_km - 1e-12 {
                out.push(self.r_max_km);
                break;
            }
            out.push(r);
            i += 1;
        }
        out
    }
}

/// Stations within the smallest scheduled radius that yields at least
/// `min_count` distinct stations; whatever lies within the cap otherwise.
///
/// The radius bound is inclusive (`d <= r`). Results are sorted by
/// distance, ties broken by station id, with duplicate ids removed.
pub fn find_candidates(
    loc: GeoPoint,
    stations: &[StationRef],
    cfg: &SearchConfig,
) -> Result<Vec<(u64, f64)>> {
    cfg.validate()?;
    if stations.is_empty() {
        return Ok(Vec::new());
    }

    // One distance pass; the radius expansion is then a pure filter.
    let mut dists: Vec<(u64, f64)> = stations
        .iter()
        .map(|s| (s.station_id, haversine_km(loc, s.location)))
        .collect();
    dists.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    dists.dedup_by_key(|(id, _)| *id);

    let mut within = Vec::new();
    for r in cfg.radii() {
        within = dists.iter().filter(|(_, d)| *d <= r).cloned().collect();
        if within.len() >= cfg.min_count {
            break;
        }
    }
    Ok(within)
}
