//! Journey simulation with per-km energy accounting.

use chrono::Duration;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::geo::{haversine_km, GeoPoint, EARTH_RADIUS_KM};
use crate::rng::{stream, StreamKind};

use super::world::{gaussian, mixture_point};
use super::{Journey, Waypoint, World};

const DEG_PER_KM: f64 = 360.0 / (2.0 * std::f64::consts::PI * EARTH_RADIUS_KM);

/// Battery fraction at which the synthetic recharge kicks in.
const RECHARGE_FLOOR: f64 = 0.20;

/// Simulate `n_journeys` across the fleet.
///
/// Journey ids are dealt round-robin over EVs; each EV's journeys form a
/// time-ordered chain whose energy carries over from one journey to the
/// next. The first journey of an EV starts from a uniform draw in
/// [20%, 100%] of capacity. Whenever a segment would push the level under
/// 20% of capacity, the next waypoint records a full battery instead; the
/// recharge location is not modeled. Loop journeys (displacement below the
/// configured floor) are dropped.
///
/// EV chains are independent, so simulation is parallel over EVs and the
/// output is assembled in journey-id order regardless of worker count.
pub fn simulate_journeys(world: &World, n_journeys: usize, seed: u64) -> Result<Vec<Journey>> {
    world.config.validate()?;
    let n_evs = world.fleet.len();

    // Hubs are re-derived from the same stream prefix the station field
    // used, so journey endpoints cluster around the same centers.
    let mut hub_rng = stream(seed, StreamKind::Stations, 0);
    let hubs: Vec<GeoPoint> = (0..world.config.n_hubs)
        .map(|_| {
            let b = &world.config.bbox;
            let dlat = (b.lat_max - b.lat_min) * 0.1;
            let dlon = (b.lon_max - b.lon_min) * 0.1;
            GeoPoint {
                lat: hub_rng.gen_range(b.lat_min + dlat..b.lat_max - dlat),
                lon: hub_rng.gen_range(b.lon_min + dlon..b.lon_max - dlon),
            }
        })
        .collect();

    let mut journeys: Vec<Journey> = (0..n_evs)
        .into_par_iter()
        .flat_map_iter(|ev_idx| {
            let ev = &world.fleet[ev_idx];
            let journey_ids: Vec<u64> =
                (ev_idx..n_journeys).step_by(n_evs.max(1)).map(|j| j as u64).collect();
            simulate_ev_chain(world, ev_idx, &journey_ids, &hubs, seed)
                .into_iter()
                .map(move |mut j| {
                    j.ev_id = ev.ev_id;
                    j
                })
                .collect::<Vec<_>>()
        })
        .collect();

    journeys.sort_by_key(|j| j.journey_id);
    Ok(journeys)
}

/// One EV's journey chain; energy and clock carry across journeys.
fn simulate_ev_chain(
    world: &World,
    ev_idx: usize,
    journey_ids: &[u64],
    hubs: &[GeoPoint],
    seed: u64,
) -> Vec<Journey> {
    let ev = &world.fleet[ev_idx];
    let capacity = ev.model.battery_capacity_wh;
    let consumption = ev.model.consumption_wh_per_km();

    let mut ev_rng = stream(seed, StreamKind::FleetEnergy, ev.ev_id);
    let mut energy = capacity * ev_rng.gen_range(0.2..1.0);

    // spread this EV's journeys across the simulation period
    let n = journey_ids.len().max(1) as f64;
    let nominal_gap_h = f64::from(world.config.period_days) * 24.0 / (n + 1.0);
    let mut clock = world.config.start_date
        + Duration::seconds((ev_rng.gen_range(0.0..nominal_gap_h) * 3600.0) as i64);

    let mut out = Vec::with_capacity(journey_ids.len());
    for &journey_id in journey_ids {
        let mut rng = stream(seed, StreamKind::Journey, journey_id);

        let origin = mixture_point(&mut rng, &world.config, hubs);
        let destination = mixture_point(&mut rng, &world.config, hubs);
        let displacement = haversine_km(origin, destination);

        if displacement >= world.config.min_displacement_km {
            let n_waypoints = rng.gen_range(2..=6usize);
            let waypoint_locs = waypoint_line(&mut rng, origin, destination, n_waypoints);
            let speed_kmh = rng.gen_range(20.0..50.0);

            let mut waypoints = Vec::with_capacity(n_waypoints);
            let mut segment_km = Vec::with_capacity(n_waypoints - 1);
            let mut energy_level = Vec::with_capacity(n_waypoints);
            let mut consumed = 0.0;

            waypoints.push(Waypoint {
                timestamp: clock,
                location: waypoint_locs[0],
            });
            energy_level.push(energy);

            for w in 1..n_waypoints {
                let seg = haversine_km(waypoint_locs[w - 1], waypoint_locs[w]);
                let travel_s = seg / speed_kmh * 3600.0 + rng.gen_range(0.0..600.0);
                clock += Duration::seconds(travel_s as i64);

                consumed += consumption * seg;
                energy -= consumption * seg;
                if energy < RECHARGE_FLOOR * capacity {
                    energy = capacity;
                }

                waypoints.push(Waypoint {
                    timestamp: clock,
                    location: waypoint_locs[w],
                });
                segment_km.push(seg);
                energy_level.push(energy);
            }

            out.push(Journey {
                journey_id,
                ev_id: ev.ev_id,
                model: ev.model,
                origin,
                destination,
                waypoints,
                segment_km,
                cumulative_consumption_wh: consumed,
                energy_level_wh: energy_level,
                role: None,
                quantity_wh: 0.0,
            });
        }

        let gap_h = nominal_gap_h * rng.gen_range(0.5..1.5);
        clock += Duration::seconds((gap_h * 3600.0) as i64);
    }
    out
}

/// Evenly spaced points on the O->D line, interior points jittered.
fn waypoint_line(
    rng: &mut ChaCha8Rng,
    origin: GeoPoint,
    destination: GeoPoint,
    n: usize,
) -> Vec<GeoPoint> {
    let jitter_km = 0.3;
    (0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            let mut lat = origin.lat + f * (destination.lat - origin.lat);
            let mut lon = origin.lon + f * (destination.lon - origin.lon);
            if i > 0 && i < n - 1 {
                lat += gaussian(rng) * jitter_km * DEG_PER_KM;
                lon += gaussian(rng) * jitter_km * DEG_PER_KM / lat.to_radians().cos();
            }
            GeoPoint { lat, lon }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_world, WorldConfig};
    use approx::assert_relative_eq;

    fn small_world(seed: u64) -> World {
        let cfg = WorldConfig {
            n_stations: 40,
            n_evs: 20,
            ..WorldConfig::default()
        };
        generate_world(&cfg, seed).unwrap()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let world = small_world(3);
        let a = simulate_journeys(&world, 200, 11).unwrap();
        let b = simulate_journeys(&world, 200, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn energy_decrements_match_consumption_rate() {
        // 150 Wh/km over 10 km must drop exactly 1500 Wh
        let world = small_world(3);
        let journeys = simulate_journeys(&world, 300, 5).unwrap();
        let mut checked = 0;
        for j in &journeys {
            let rate = j.model.consumption_wh_per_km();
            for (i, seg) in j.segment_km.iter().enumerate() {
                let before = j.energy_level_wh[i];
                let after = j.energy_level_wh[i + 1];
                if after <= before {
                    assert_relative_eq!(before - after, rate * seg, epsilon = 1e-9);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn recharge_resets_to_full_capacity() {
        let world = small_world(3);
        let journeys = simulate_journeys(&world, 2000, 5).unwrap();
        let mut recharges = 0;
        for j in &journeys {
            let cap = j.model.battery_capacity_wh;
            let rate = j.model.consumption_wh_per_km();
            for (i, seg) in j.segment_km.iter().enumerate() {
                let would_be = j.energy_level_wh[i] - rate * seg;
                if would_be < RECHARGE_FLOOR * cap {
                    assert_eq!(j.energy_level_wh[i + 1], cap);
                    recharges += 1;
                }
            }
        }
        assert!(recharges > 0, "no recharge events in 2000 journeys");
    }

    #[test]
    fn energy_levels_stay_in_bounds() {
        let world = small_world(9);
        for j in simulate_journeys(&world, 1000, 2).unwrap() {
            let cap = j.model.battery_capacity_wh;
            assert!(j
                .energy_level_wh
                .iter()
                .all(|&e| (0.0..=cap + 1e-9).contains(&e)));
        }
    }

    #[test]
    fn consumption_conserved_per_journey() {
        let world = small_world(4);
        for j in simulate_journeys(&world, 500, 8).unwrap() {
            let rate = j.model.consumption_wh_per_km();
            let sum: f64 = j.segment_km.iter().map(|s| rate * s).sum();
            assert_relative_eq!(sum, j.cumulative_consumption_wh, epsilon = 1e-9);
        }
    }

    #[test]
    fn loop_journeys_not_emitted() {
        // a point-sized box forces every journey to be a loop
        let cfg = WorldConfig {
            n_stations: 5,
            n_evs: 3,
            bbox: super::super::BoundingBox {
                lat_min: 41.80,
                lat_max: 41.8000001,
                lon_min: -87.7000001,
                lon_max: -87.70,
            },
            hub_fraction: 0.0,
            ..WorldConfig::default()
        };
        let world = generate_world(&cfg, 1).unwrap();
        let journeys = simulate_journeys(&world, 50, 1).unwrap();
        assert!(journeys.is_empty());
    }

    #[test]
    fn waypoint_counts_and_timestamps_monotone() {
        let world = small_world(6);
        for j in simulate_journeys(&world, 300, 3).unwrap() {
            assert!((2..=6).contains(&j.waypoints.len()));
            assert_eq!(j.segment_km.len(), j.waypoints.len() - 1);
            assert_eq!(j.energy_level_wh.len(), j.waypoints.len());
            for w in j.waypoints.windows(2) {
                assert!(w[0].timestamp <= w[1].timestamp);
            }
        }
    }
}
