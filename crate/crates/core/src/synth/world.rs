//! Station field and fleet generation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geo::{GeoPoint, EARTH_RADIUS_KM};
use crate::rng::{stream, StreamKind};

use super::{Ev, Station, World, WorldConfig};

const DEG_PER_KM: f64 = 360.0 / (2.0 * std::f64::consts::PI * EARTH_RADIUS_KM);

/// Deterministically generate the station field and EV fleet for `seed`.
///
/// Stations are a hub-clustered/uniform mixture; popularity profiles are
/// bimodal daily curves with morning and evening peaks, min-max scaled to
/// `[0, 1]` per station. Fleet models are assigned uniformly at random.
pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<World> {
    config.validate()?;

    let mut rng = stream(seed, StreamKind::Stations, 0);
    let hubs: Vec<GeoPoint> = (0..config.n_hubs)
        .map(|_| uniform_point(&mut rng, config, 0.1))
        .collect();

    let stations = (0..config.n_stations)
        .map(|i| Station {
            station_id: i as u64 + 1,
            location: mixture_point(&mut rng, config, &hubs),
            charging_speed_kw: *pick(&mut rng, &config.charging_speeds_kw),
            ports: rng.gen_range(1..=4),
            popularity_profile: popularity_profile(&mut rng),
        })
        .collect();

    let mut model_rng = stream(seed, StreamKind::FleetModels, 0);
    let fleet = (0..config.n_evs)
        .map(|i| Ev {
            ev_id: i as u64 + 1,
            model: *pick(&mut model_rng, &config.models),
        })
        .collect();

    Ok(World {
        config: config.clone(),
        stations,
        fleet,
    })
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

/// Uniform point inside the box, inset by `margin` of the box extent.
fn uniform_point(rng: &mut ChaCha8Rng, config: &WorldConfig, margin: f64) -> GeoPoint {
    let b = &config.bbox;
    let dlat = (b.lat_max - b.lat_min) * margin;
    let dlon = (b.lon_max - b.lon_min) * margin;
    GeoPoint {
        lat: rng.gen_range(b.lat_min + dlat..b.lat_max - dlat),
        lon: rng.gen_range(b.lon_min + dlon..b.lon_max - dlon),
    }
}

/// Hub-clustered with probability `hub_fraction`, uniform otherwise.
pub(super) fn mixture_point(rng: &mut ChaCha8Rng, config: &WorldConfig, hubs: &[GeoPoint]) -> GeoPoint {
    if !hubs.is_empty() && rng.gen_range(0.0..1.0) < config.hub_fraction {
        let hub = pick(rng, hubs);
        let r_km = config.hub_sigma_km * gaussian(rng).abs();
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let lat = hub.lat + r_km * theta.sin() * DEG_PER_KM;
        let lon_scale = DEG_PER_KM / hub.lat.to_radians().cos();
        let lon = hub.lon + r_km * theta.cos() * lon_scale;
        let b = &config.bbox;
        GeoPoint {
            lat: lat.clamp(b.lat_min, b.lat_max),
            lon: lon.clamp(b.lon_min, b.lon_max),
        }
    } else {
        uniform_point(rng, config, 0.0)
    }
}

/// Box-Muller standard normal.
pub(super) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Two Gaussian bumps at 08:30 and 17:30 plus seeded noise, min-max scaled.
fn popularity_profile(rng: &mut ChaCha8Rng) -> [f64; 24] {
    let mut raw = [0.0f64; 24];
    for (h, v) in raw.iter_mut().enumerate() {
        let t = h as f64;
        let morning = (-(t - 8.5).powi(2) / (2.0 * 2.0f64.powi(2))).exp();
        let evening = (-(t - 17.5).powi(2) / (2.0 * 2.5f64.powi(2))).exp();
        *v = morning + evening + rng.gen_range(0.0..0.25);
    }
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(f64::MIN_POSITIVE);
    raw.map(|v| (v - min) / span)
}
