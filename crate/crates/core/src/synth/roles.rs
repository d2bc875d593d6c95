//! Energy accounting and per-journey role/quantity assignment.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::rng::{stream, StreamKind};

use super::{Journey, Role, RoleConfig};

/// Energy above the safety threshold: `(soc - soc_th) / 100 * capacity`.
/// Negative when the level sits under the threshold; callers clamp.
pub fn available_energy(soc_pct: f64, capacity_wh: f64, cfg: &RoleConfig) -> f64 {
    (soc_pct / 100.0) * capacity_wh - (cfg.soc_th_pct / 100.0) * capacity_wh
}

/// Tradable surplus after reserving the energy needed to finish the trip.
pub fn provider_energy(available_wh: f64, travel_need_wh: f64) -> f64 {
    (available_wh - travel_need_wh).max(0.0)
}

/// Consumer deficit up to the target level.
pub fn consumer_deficit(energy_wh: f64, capacity_wh: f64, cfg: &RoleConfig) -> f64 {
    ((cfg.soc_target_pct / 100.0) * capacity_wh - energy_wh).max(0.0)
}

/// Role and quantity for one journey from its start-of-journey energy.
///
/// The surplus ratio `r = min(1, surplus / capacity)` drives a piecewise
/// rule: below the consumer cutoff the journey is a consumer; the
/// (0.30, 0.70] and (0.70, provider_cutoff] bands flip to provider with
/// probability `p_mid` / `p_high`; above the cutoff the journey is a
/// provider outright. Provider quantities under the minimum tradable
/// threshold are zeroed. The travel reserve is the consumption rate times
/// the full journey distance.
///
/// `rng` must be the journey-keyed stream so the one uniform draw per
/// journey is identical no matter the processing order or the cutoff
/// being swept.
pub fn assign_role_and_quantity(
    journey: &Journey,
    cfg: &RoleConfig,
    rng: &mut ChaCha8Rng,
) -> (Role, f64) {
    let capacity = journey.model.battery_capacity_wh;
    let energy0 = journey.energy_level_wh[0];
    let soc_pct = (energy0 / capacity * 100.0).clamp(0.0, 100.0);

    let travel_need = journey.model.consumption_wh_per_km() * journey.total_km();
    let surplus = provider_energy(available_energy(soc_pct, capacity, cfg), travel_need);
    let r = (surplus / capacity).min(1.0);

    let u: f64 = rng.gen_range(0.0..1.0);
    let role = if r <= cfg.consumer_cutoff {
        Role::Consumer
    } else if r <= 0.70 {
        if u < cfg.p_mid {
            Role::Provider
        } else {
            Role::Consumer
        }
    } else if r <= cfg.provider_cutoff {
        if u < cfg.p_high {
            Role::Provider
        } else {
            Role::Consumer
        }
    } else {
        Role::Provider
    };

    let quantity = match role {
        Role::Provider => {
            let q = surplus.max(0.0);
            if q < cfg.e_min_trade_wh {
                0.0
            } else {
                q
            }
        }
        Role::Consumer => consumer_deficit(energy0, capacity, cfg),
    };

    (role, quantity)
}

/// Assign roles and quantities across all journeys, in parallel.
pub fn assign_roles(journeys: &mut [Journey], cfg: &RoleConfig, seed: u64) -> Result<()> {
    cfg.validate()?;
    journeys.par_iter_mut().for_each(|j| {
        let mut rng = stream(seed, StreamKind::Role, j.journey_id);
        let (role, quantity) = assign_role_and_quantity(j, cfg, &mut rng);
        j.role = Some(role);
        j.quantity_wh = quantity;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::synth::EvModel;
    use chrono::{TimeZone, Utc};

    fn cfg() -> RoleConfig {
        RoleConfig::default()
    }

    #[test]
    fn available_energy_examples() {
        // threshold equals level
        assert_eq!(available_energy(30.0, 60_000.0, &cfg()), 0.0);
        // hand arithmetic with the 30% threshold
        assert_eq!(available_energy(50.0, 60_000.0, &cfg()), 12_000.0);
        assert_eq!(available_energy(20.0, 60_000.0, &cfg()), -6_000.0);
    }

    #[test]
    fn provider_energy_examples() {
        assert_eq!(provider_energy(5_000.0, 8_000.0), 0.0);
        assert_eq!(provider_energy(20_000.0, 5_000.0), 15_000.0);
        assert_eq!(provider_energy(0.0, 0.0), 0.0);
    }

    #[test]
    fn consumer_deficit_examples() {
        assert_eq!(consumer_deficit(60_000.0, 60_000.0, &cfg()), 0.0);
        assert_eq!(consumer_deficit(45_000.0, 60_000.0, &cfg()), 15_000.0);
        // level clipped above capacity upstream still clamps to zero
        assert_eq!(consumer_deficit(70_000.0, 60_000.0, &cfg()), 0.0);
    }

    /// A journey rigged to hit a target surplus ratio. Zero travel distance
    /// makes the surplus equal available energy exactly.
    fn journey_with_soc(soc: f64) -> Journey {
        let model = EvModel {
            model_id: 1,
            battery_capacity_wh: 100_000.0,
            range_km: 500.0,
        };
        let t = Utc.with_ymd_and_hms(2024, 1, 1, 8, 0, 0).unwrap();
        let p = GeoPoint { lat: 41.8, lon: -87.7 };
        Journey {
            journey_id: 1,
            ev_id: 1,
            model,
            origin: p,
            destination: p,
            waypoints: vec![super::super::Waypoint { timestamp: t, location: p }],
            segment_km: vec![],
            cumulative_consumption_wh: 0.0,
            energy_level_wh: vec![soc * 100_000.0],
            role: None,
            quantity_wh: 0.0,
        }
    }

    #[test]
    fn high_surplus_is_deterministic_provider() {
        // soc 100% of a 100 kWh pack, threshold 30% -> surplus ratio 0.70;
        // push past the provider cutoff with a lower threshold config
        let mut rng = stream(0, StreamKind::Role, 1);
        let c = RoleConfig {
            soc_th_pct: 0.0,
            ..RoleConfig::default()
        };
        // r = min(1, 0.95) > 0.90 cutoff
        let (role, q) = assign_role_and_quantity(&journey_with_soc(0.95), &c, &mut rng);
        assert_eq!(role, Role::Provider);
        assert_eq!(q, 95_000.0);
    }

    #[test]
    fn low_surplus_is_deterministic_consumer() {
        // r = 0.50 - 0.30 = 0.20 <= 0.30
        let mut rng = stream(0, StreamKind::Role, 1);
        let (role, q) = assign_role_and_quantity(&journey_with_soc(0.50), &cfg(), &mut rng);
        assert_eq!(role, Role::Consumer);
        assert_eq!(q, 50_000.0); // deficit up to the 100% target
    }

    #[test]
    fn small_provider_trades_zeroed() {
        // surplus 8 kWh sits under the 10 kWh minimum: provider keeps the
        // role, quantity drops to zero
        let c = RoleConfig {
            soc_th_pct: 0.0,
            ..RoleConfig::default()
        };
        let model = EvModel {
            model_id: 1,
            battery_capacity_wh: 8_000.0,
            range_km: 80.0,
        };
        let mut j = journey_with_soc(1.0);
        j.model = model;
        j.energy_level_wh = vec![8_000.0];
        // surplus 8000 of an 8 kWh pack: r = 1.0 > 0.90, deterministic provider
        let mut rng = stream(0, StreamKind::Role, 1);
        let (role, q) = assign_role_and_quantity(&j, &c, &mut rng);
        assert_eq!(role, Role::Provider);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn mid_band_rate_matches_p_mid() {
        // over many journey-keyed streams the provider share in the middle
        // band must land inside a 99% binomial interval around p_mid
        let n = 20_000usize;
        let mut providers = 0usize;
        let j = journey_with_soc(0.80); // r = 0.50, mid band
        for id in 0..n {
            let mut rng = stream(42, StreamKind::Role, id as u64);
            let mut jj = j.clone();
            jj.journey_id = id as u64;
            let (role, _) = assign_role_and_quantity(&jj, &cfg(), &mut rng);
            if role == Role::Provider {
                providers += 1;
            }
        }
        let p_hat = providers as f64 / n as f64;
        let half_width = 2.576 * (0.5f64 * 0.5 / n as f64).sqrt();
        assert!(
            (p_hat - 0.5).abs() <= half_width,
            "mid-band provider rate {p_hat} outside 99% CI half-width {half_width}"
        );
    }

    #[test]
    fn cutoff_sweep_only_flips_banded_journeys() {
        let socs: Vec<f64> = (0..500).map(|i| 0.3 + 0.7 * (i as f64 / 499.0)).collect();
        let c85 = RoleConfig { provider_cutoff: 0.85, ..cfg() };
        let c95 = RoleConfig { provider_cutoff: 0.95, ..cfg() };
        for (id, &soc) in socs.iter().enumerate() {
            let mut j = journey_with_soc(soc);
            j.journey_id = id as u64;
            let r = ((soc - 0.30) * 100_000.0 / 100_000.0).clamp(0.0, 1.0);
            let mut rng_a = stream(7, StreamKind::Role, j.journey_id);
            let mut rng_b = stream(7, StreamKind::Role, j.journey_id);
            let (role_a, _) = assign_role_and_quantity(&j, &c85, &mut rng_a);
            let (role_b, _) = assign_role_and_quantity(&j, &c95, &mut rng_b);
            if !(0.70 < r && r <= 0.95) {
                assert_eq!(role_a, role_b, "journey outside the swept band changed role (r={r})");
            }
        }
    }

    #[test]
    fn rejects_inverted_cutoffs() {
        let c = RoleConfig {
            consumer_cutoff: 0.9,
            provider_cutoff: 0.3,
            ..RoleConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
