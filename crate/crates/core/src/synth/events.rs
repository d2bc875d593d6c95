//! Decision-event construction: one query per 30-minute-bucketed waypoint.

use chrono::{DateTime, Timelike, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{find_candidates, GeoPoint, SearchConfig, StationRef};
use crate::labeling::transaction_pressure;

use super::{BoundingBox, Journey, Role, Station, DECISION_INTERVAL_MINUTES};

/// One candidate charging node within an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub station_id: u64,
    pub distance_km: f64,
    pub charging_speed_kw: f64,
    /// Popularity at the event hour, in `[0, 1]`.
    pub popularity: f64,
}

/// One ranking query: an EV at a bucketed waypoint with its candidate set.
///
/// Events with an empty candidate set are kept (they feed the radius
/// sensitivity statistics) but are excluded from labeling and training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    pub event_id: u64,
    pub ev_id: u64,
    pub journey_id: u64,
    pub timestamp: DateTime<Utc>,
    pub location: GeoPoint,
    pub community_area: u32,
    pub role: Role,
    pub soc_e: f64,
    pub energy_level_wh: f64,
    pub battery_capacity_wh: f64,
    pub quantity_wh: f64,
    pub pressure: f64,
    pub model_id: u8,
    pub candidates: Vec<Candidate>,
}

impl DecisionEvent {
    pub fn has_candidates(&self) -> bool {
        !self.candidates.is_empty()
    }
}

/// Grid cell id in `1..=77`: the box is split 11 rows by 7 columns.
pub fn community_area(bbox: &BoundingBox, p: GeoPoint) -> u32 {
    let rows = 11usize;
    let cols = 7usize;
    let fr = ((p.lat - bbox.lat_min) / (bbox.lat_max - bbox.lat_min)).clamp(0.0, 1.0);
    let fc = ((p.lon - bbox.lon_min) / (bbox.lon_max - bbox.lon_min)).clamp(0.0, 1.0);
    let row = ((fr * rows as f64) as usize).min(rows - 1);
    let col = ((fc * cols as f64) as usize).min(cols - 1);
    (row * cols + col) as u32 + 1
}

fn bucket_timestamp(ts: DateTime<Utc>) -> DateTime<Utc> {
    let minute = ts.minute() - ts.minute() % DECISION_INTERVAL_MINUTES;
    ts.with_minute(minute)
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_nanosecond(0))
        .expect("bucketing keeps fields in range")
}

/// Build one decision event per waypoint across all journeys.
///
/// Every journey must already carry a role; its role and quantity are
/// replicated onto each of its events. Candidate popularity is the
/// station's profile at the bucketed hour. Event ids are dense and ordered
/// by (journey_id, waypoint index) regardless of worker count.
pub fn build_decision_events(
    journeys: &[Journey],
    stations: &[Station],
    bbox: &BoundingBox,
    search: &SearchConfig,
) -> Result<Vec<DecisionEvent>> {
    search.validate()?;
    for j in journeys {
        if j.role.is_none() {
            return Err(Error::InvalidInput(format!(
                "journey {} has no assigned role",
                j.journey_id
            )));
        }
    }

    let refs: Vec<StationRef> = stations
        .iter()
        .map(|s| StationRef {
            station_id: s.station_id,
            location: s.location,
        })
        .collect();
    let by_id: std::collections::HashMap<u64, &Station> =
        stations.iter().map(|s| (s.station_id, s)).collect();

    // dense ids in (journey_id, waypoint) order
    let mut offsets = Vec::with_capacity(journeys.len());
    let mut next = 0u64;
    for j in journeys {
        offsets.push(next);
        next += j.waypoints.len() as u64;
    }

    let events: Vec<DecisionEvent> = journeys
        .par_iter()
        .zip(offsets.par_iter())
        .map(|(journey, &offset)| {
            let role = journey.role.expect("checked above");
            let capacity = journey.model.battery_capacity_wh;
            journey
                .waypoints
                .iter()
                .enumerate()
                .map(|(w, waypoint)| {
                    let bucketed = bucket_timestamp(waypoint.timestamp);
                    let hour = bucketed.hour() as usize;
                    let candidates = find_candidates(waypoint.location, &refs, search)
                        .expect("search config validated")
                        .into_iter()
                        .map(|(station_id, distance_km)| {
                            let st = by_id[&station_id];
                            Candidate {
                                station_id,
                                distance_km,
                                charging_speed_kw: st.charging_speed_kw,
                                popularity: st.popularity_profile[hour],
                            }
                        })
                        .collect();

                    let energy = journey.energy_level_wh[w];
                    let soc_e = (energy / capacity).clamp(0.0, 1.0);
                    DecisionEvent {
                        event_id: offset + w as u64,
                        ev_id: journey.ev_id,
                        journey_id: journey.journey_id,
                        timestamp: bucketed,
                        location: waypoint.location,
                        community_area: community_area(bbox, waypoint.location),
                        role,
                        soc_e,
                        energy_level_wh: energy,
                        battery_capacity_wh: capacity,
                        quantity_wh: journey.quantity_wh,
                        pressure: transaction_pressure(soc_e, role),
                        model_id: journey.model.model_id,
                        candidates,
                    }
                })
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();

    Ok(events)
}
