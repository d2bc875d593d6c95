//! CSV serialization of the dataset: `events.csv` and `stations.csv`.
//!
//! Floating-point fields are written with six decimal places so repeated
//! runs of the same seed produce byte-identical files.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

use super::{Candidate, DecisionEvent, Role, Station};

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_stations_csv(path: &Path, stations: &[Station]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let hours: Vec<String> = (0..24).map(|h| format!("p{h:02}")).collect();
    writeln!(
        w,
        "station_id,lat,lon,charging_speed_kw,ports,{}",
        hours.join(",")
    )
    .map_err(|e| Error::io(path, e))?;
    for s in stations {
        let profile: Vec<String> = s.popularity_profile.iter().map(|&p| f6(p)).collect();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.station_id,
            f6(s.location.lat),
            f6(s.location.lon),
            f6(s.charging_speed_kw),
            s.ports,
            profile.join(",")
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_stations_csv(path: &Path) -> Result<Vec<Station>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let r = record?;
        let get = |i: usize| -> Result<f64> {
            r.get(i)
                .ok_or_else(|| Error::InvalidInput(format!("{}: short station row", path.display())))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
        };
        let mut profile = [0.0f64; 24];
        for (h, slot) in profile.iter_mut().enumerate() {
            *slot = get(5 + h)?;
        }
        out.push(Station {
            station_id: get(0)? as u64,
            location: GeoPoint { lat: get(1)?, lon: get(2)? },
            charging_speed_kw: get(3)?,
            ports: get(4)? as u32,
            popularity_profile: profile,
        });
    }
    Ok(out)
}

pub const EVENTS_HEADER: &str = "event_id,ev_id,journey_id,timestamp,lat,lon,community_area,role,soc_e,energy_wh,capacity_wh,quantity_wh,model_id,candidate_station_id,distance_km,charging_speed_kw,popularity,candidate_count";

/// One row per event-candidate pair. Zero-candidate events keep a single
/// row with empty candidate fields and `candidate_count` 0, carrying the
/// flag the sensitivity statistics need.
pub fn write_events_csv(path: &Path, events: &[DecisionEvent]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{EVENTS_HEADER}").map_err(|e| Error::io(path, e))?;
    for e in events {
        let prefix = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.event_id,
            e.ev_id,
            e.journey_id,
            e.timestamp.format(TS_FORMAT),
            f6(e.location.lat),
            f6(e.location.lon),
            e.community_area,
            e.role.code(),
            f6(e.soc_e),
            f6(e.energy_level_wh),
            f6(e.battery_capacity_wh),
            f6(e.quantity_wh),
            e.model_id,
        );
        if e.candidates.is_empty() {
            writeln!(w, "{prefix},,,,,0").map_err(|e| Error::io(path, e))?;
        } else {
            for c in &e.candidates {
                writeln!(
                    w,
                    "{prefix},{},{},{},{},{}",
                    c.station_id,
                    f6(c.distance_km),
                    f6(c.charging_speed_kw),
                    f6(c.popularity),
                    e.candidates.len()
                )
                .map_err(|e| Error::io(path, e))?;
            }
        }
    }
    Ok(())
}

/// Rebuild events from `events.csv`, grouping candidate rows by event id.
pub fn read_events_csv(path: &Path) -> Result<Vec<DecisionEvent>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut events: BTreeMap<u64, DecisionEvent> = BTreeMap::new();
    for record in rdr.records() {
        let r = record?;
        let field = |i: usize| -> Result<&str> {
            r.get(i)
                .ok_or_else(|| Error::InvalidInput(format!("{}: short event row", path.display())))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
        };
        let event_id = num(0)? as u64;
        let entry = match events.entry(event_id) {
            std::collections::btree_map::Entry::Occupied(o) => o.into_mut(),
            std::collections::btree_map::Entry::Vacant(v) => {
                let ts = NaiveDateTime::parse_from_str(field(3)?, TS_FORMAT)
                    .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
                v.insert(DecisionEvent {
                    event_id,
                    ev_id: num(1)? as u64,
                    journey_id: num(2)? as u64,
                    timestamp: DateTime::<Utc>::from_naive_utc_and_offset(ts, Utc),
                    location: GeoPoint { lat: num(4)?, lon: num(5)? },
                    community_area: num(6)? as u32,
                    role: Role::from_code(field(7)?)?,
                    soc_e: num(8)?,
                    energy_level_wh: num(9)?,
                    battery_capacity_wh: num(10)?,
                    quantity_wh: num(11)?,
                    pressure: 0.0, // recomputed below once role and soc are known
                    model_id: num(12)? as u8,
                    candidates: Vec::new(),
                })
            }
        };
        if !field(13)?.is_empty() {
            entry.candidates.push(Candidate {
                station_id: num(13)? as u64,
                distance_km: num(14)?,
                charging_speed_kw: num(15)?,
                popularity: num(16)?,
            });
        }
    }
    let mut out: Vec<DecisionEvent> = events.into_values().collect();
    for e in &mut out {
        e.pressure = crate::labeling::transaction_pressure(e.soc_e, e.role);
    }
    Ok(out)
}
