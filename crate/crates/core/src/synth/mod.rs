//! Seeded synthetic world and journey generation.
//!
//! Produces the trading dataset schema end to end: a station field and EV
//! fleet, per-EV journey chains with energy accounting, per-journey trading
//! roles and quantities, and 30-minute decision events with candidate
//! stations attached.

mod csv_io;
mod events;
mod journeys;
mod roles;
mod world;

pub use csv_io::{read_events_csv, read_stations_csv, write_events_csv, write_stations_csv};
pub use events::{build_decision_events, community_area, Candidate, DecisionEvent};
pub use journeys::simulate_journeys;
pub use roles::{
    assign_role_and_quantity, assign_roles, available_energy, consumer_deficit, provider_energy,
};
pub use world::generate_world;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// Decision events are bucketed to this interval.
pub const DECISION_INTERVAL_MINUTES: u32 = 30;

/// An EV model row: capacity and rated range determine the per-km draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvModel {
    pub model_id: u8,
    pub battery_capacity_wh: f64,
    pub range_km: f64,
}

impl EvModel {
    pub fn consumption_wh_per_km(&self) -> f64 {
        self.battery_capacity_wh / self.range_km
    }
}

/// A charging station with an hourly popularity profile in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub station_id: u64,
    pub location: GeoPoint,
    pub charging_speed_kw: f64,
    pub ports: u32,
    pub popularity_profile: [f64; 24],
}

/// One EV in the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ev {
    pub ev_id: u64,
    pub model: EvModel,
}

/// Trading role of a journey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Provider,
    Consumer,
}

impl Role {
    pub fn code(self) -> &'static str {
        match self {
            Role::Provider => "P",
            Role::Consumer => "C",
        }
    }

    pub fn from_code(code: &str) -> Result<Role> {
        match code {
            "P" => Ok(Role::Provider),
            "C" => Ok(Role::Consumer),
            other => Err(Error::InvalidInput(format!("unknown role code {other:?}"))),
        }
    }
}

/// A timestamped point along a journey.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub timestamp: DateTime<Utc>,
    pub location: GeoPoint,
}

/// One journey of one EV: waypoints, per-segment distances, and the energy
/// level recorded at each waypoint.
///
/// Energy is non-increasing along the waypoints except when the 20% floor
/// triggers a synthetic recharge, which records full capacity at the next
/// waypoint. Role and quantity are journey-level and replicated to every
/// event derived from the journey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Journey {
    pub journey_id: u64,
    pub ev_id: u64,
    pub model: EvModel,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub waypoints: Vec<Waypoint>,
    pub segment_km: Vec<f64>,
    pub cumulative_consumption_wh: f64,
    pub energy_level_wh: Vec<f64>,
    pub role: Option<Role>,
    pub quantity_wh: f64,
}

impl Journey {
    pub fn total_km(&self) -> f64 {
        self.segment_km.iter().sum()
    }
}

/// Thresholds and probabilities governing role and quantity assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleConfig {
    pub soc_th_pct: f64,
    pub soc_target_pct: f64,
    pub soc_min_pct: f64,
    pub e_min_trade_wh: f64,
    pub p_mid: f64,
    pub p_high: f64,
    pub consumer_cutoff: f64,
    pub provider_cutoff: f64,
}

impl Default for RoleConfig {
    fn default() -> Self {
        RoleConfig {
            soc_th_pct: 30.0,
            soc_target_pct: 100.0,
            // retained in the config schema; the deficit formula uses only
            // the target level
            soc_min_pct: 20.0,
            e_min_trade_wh: 10_000.0,
            p_mid: 0.50,
            p_high: 0.80,
            consumer_cutoff: 0.30,
            provider_cutoff: 0.90,
        }
    }
}

impl RoleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.consumer_cutoff > 0.0
            && self.consumer_cutoff < self.provider_cutoff
            && self.provider_cutoff <= 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "cutoffs must satisfy 0 < consumer ({}) < provider ({}) <= 1",
                self.consumer_cutoff, self.provider_cutoff
            )));
        }
        for (name, p) in [("p_mid", self.p_mid), ("p_high", self.p_high)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} not in [0,1]")));
            }
        }
        Ok(())
    }
}

/// Axis-aligned lat/lon bounding box for the synthetic world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.lat_min && p.lat <= self.lat_max && p.lon >= self.lon_min && p.lon <= self.lon_max
    }
}

/// World generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub n_stations: usize,
    pub n_evs: usize,
    pub bbox: BoundingBox,
    pub models: Vec<EvModel>,
    /// Fraction of stations (and journey endpoints) drawn around hub
    /// centers instead of uniformly; urban fields are clumpy.
    pub hub_fraction: f64,
    pub n_hubs: usize,
    pub hub_sigma_km: f64,
    pub charging_speeds_kw: Vec<f64>,
    /// Journeys start uniformly over this many days from `start_date`.
    pub period_days: u32,
    pub start_date: DateTime<Utc>,
    /// Journeys displacing less than this are loops and are dropped.
    pub min_displacement_km: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_stations: 220,
            n_evs: 300,
            bbox: BoundingBox {
                lat_min: 41.64,
                lat_max: 42.02,
                lon_min: -87.94,
                lon_max: -87.52,
            },
            models: default_models(),
            hub_fraction: 0.75,
            n_hubs: 5,
            hub_sigma_km: 1.8,
            charging_speeds_kw: vec![7.0, 11.0, 22.0, 50.0, 120.0, 150.0, 250.0],
            period_days: 364,
            start_date: DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z")
                .unwrap()
                .with_timezone(&Utc),
            min_displacement_km: 0.2,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stations == 0 || self.n_evs == 0 {
            return Err(Error::InvalidConfig(
                "station and EV counts must be positive".into(),
            ));
        }
        if self.models.is_empty() || self.charging_speeds_kw.is_empty() {
            return Err(Error::InvalidConfig(
                "model table and charging speed table must be non-empty".into(),
            ));
        }
        if self.bbox.lat_min >= self.bbox.lat_max || self.bbox.lon_min >= self.bbox.lon_max {
            return Err(Error::InvalidConfig("degenerate bounding box".into()));
        }
        for m in &self.models {
            if m.battery_capacity_wh <= 0.0 || m.range_km <= 0.0 || !(1..=9).contains(&m.model_id) {
                return Err(Error::InvalidConfig(format!("bad EV model row: {m:?}")));
            }
        }
        Ok(())
    }
}

/// Nine fleet models spanning compact to long-range packs.
pub fn default_models() -> Vec<EvModel> {
    [
        (1u8, 40_000.0, 270.0),
        (2, 50_000.0, 350.0),
        (3, 58_000.0, 420.0),
        (4, 62_000.0, 440.0),
        (5, 66_000.0, 430.0),
        (6, 75_000.0, 480.0),
        (7, 77_000.0, 490.0),
        (8, 82_000.0, 520.0),
        (9, 100_000.0, 620.0),
    ]
    .into_iter()
    .map(|(model_id, battery_capacity_wh, range_km)| EvModel {
        model_id,
        battery_capacity_wh,
        range_km,
    })
    .collect()
}

/// Generated world: stations plus the EV fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    pub stations: Vec<Station>,
    pub fleet: Vec<Ev>,
}
