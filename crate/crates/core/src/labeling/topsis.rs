//! Event-wise fuzzy-weighted TOPSIS suitability scoring.
//!
//! Criterion importance is linguistic (low/medium/high triangular fuzzy
//! numbers defuzzified by centroid) and varies with the EV's role and its
//! transaction pressure. Candidate attributes stay crisp; only the weights
//! are fuzzy.

use serde::{Deserialize, Serialize};

use crate::synth::{Candidate, DecisionEvent, Role};

/// Criterion order used throughout: distance, speed, availability.
pub const N_CRITERIA: usize = 3;

/// A triangular fuzzy number `(a, b, c)` with `a <= b <= c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tfn(pub f64, pub f64, pub f64);

impl Tfn {
    pub fn centroid(self) -> f64 {
        (self.0 + self.1 + self.2) / 3.0
    }
}

/// Linguistic importance levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Importance {
    Low,
    Medium,
    High,
}

/// TOPSIS scoring parameters.
///
/// The regime weight table is an artifact constant: the linguistic
/// assignments implement monotone priority shifts (consumers escalate
/// distance and availability urgency as pressure rises; pressured
/// suppliers chase throughput and demand), not values published anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopsisConfig {
    pub epsilon: f64,
    pub tfn_high: Tfn,
    pub tfn_medium: Tfn,
    pub tfn_low: Tfn,
    /// Pressure regime membership triangles (low, med, high).
    pub regime_low: Tfn,
    pub regime_med: Tfn,
    pub regime_high: Tfn,
    /// Normalized value for a criterion that does not discriminate within
    /// an event (all candidates identical on it).
    pub degenerate_value: f64,
    /// Closeness assigned when ideal and anti-ideal coincide.
    pub single_candidate_score: f64,
    /// Linguistic importance per role and regime, criterion order (d, s, a).
    pub consumer_table: [[Importance; N_CRITERIA]; 3],
    pub supplier_table: [[Importance; N_CRITERIA]; 3],
}

impl Default for TopsisConfig {
    fn default() -> Self {
        use Importance::{High as H, Low as L, Medium as M};
        TopsisConfig {
            epsilon: 1e-9,
            tfn_high: Tfn(0.7, 0.9, 1.0),
            tfn_medium: Tfn(0.3, 0.5, 0.7),
            tfn_low: Tfn(0.1, 0.3, 0.5),
            regime_low: Tfn(0.0, 0.0, 0.5),
            regime_med: Tfn(0.25, 0.5, 0.75),
            regime_high: Tfn(0.5, 1.0, 1.0),
            degenerate_value: 0.5,
            single_candidate_score: 0.5,
            consumer_table: [[M, H, M], [M, M, H], [H, M, H]],
            supplier_table: [[H, M, L], [M, H, M], [L, H, H]],
        }
    }
}

impl TopsisConfig {
    fn centroid_of(&self, imp: Importance) -> f64 {
        match imp {
            Importance::Low => self.tfn_low.centroid(),
            Importance::Medium => self.tfn_medium.centroid(),
            Importance::High => self.tfn_high.centroid(),
        }
    }

    /// Defuzzified and row-normalized regime weights `w~[regime][criterion]`.
    pub fn regime_weights(&self, role: Role) -> [[f64; N_CRITERIA]; 3] {
        let table = match role {
            Role::Consumer => &self.consumer_table,
            Role::Provider => &self.supplier_table,
        };
        let mut out = [[0.0; N_CRITERIA]; 3];
        for (g, row) in table.iter().enumerate() {
            let raw: Vec<f64> = row.iter().map(|&imp| self.centroid_of(imp)).collect();
            let sum: f64 = raw.iter().sum();
            for (c, &v) in raw.iter().enumerate() {
                out[g][c] = v / sum;
            }
        }
        out
    }
}

/// Per-event TOPSIS intermediates and the final closeness values.
#[derive(Debug, Clone)]
pub struct TopsisResult {
    /// Normalized criteria per candidate, order (d, s, a).
    pub normalized: Vec<[f64; N_CRITERIA]>,
    /// Weighted normalized values per candidate.
    pub weighted: Vec<[f64; N_CRITERIA]>,
    pub ideal: [f64; N_CRITERIA],
    pub anti_ideal: [f64; N_CRITERIA],
    pub dist_ideal: Vec<f64>,
    pub dist_anti_ideal: Vec<f64>,
    /// Closeness coefficient per candidate, in `[0, 1]`.
    pub closeness: Vec<f64>,
    /// Event-level criterion weights, summing to 1.
    pub weights: [f64; N_CRITERIA],
}

/// Role-aware urgency: consumers tense up as charge drops, suppliers as it
/// rises.
pub fn transaction_pressure(soc_e: f64, role: Role) -> f64 {
    let soc = soc_e.clamp(0.0, 1.0);
    match role {
        Role::Consumer => 1.0 - soc,
        Role::Provider => soc,
    }
}

fn triangular(p: f64, t: Tfn) -> f64 {
    let Tfn(a, b, c) = t;
    let up = if b > a {
        (p - a) / (b - a)
    } else if p >= b {
        1.0
    } else {
        0.0
    };
    let down = if c > b {
        (c - p) / (c - b)
    } else if p <= b {
        1.0
    } else {
        0.0
    };
    up.min(down).clamp(0.0, 1.0)
}

/// Membership degrees of the three pressure regimes at `p`.
///
/// The low regime is a left shoulder and the high regime a right shoulder,
/// so at least one membership is positive for every `p` in `[0, 1]`.
pub fn regime_memberships(p: f64, cfg: &TopsisConfig) -> [f64; 3] {
    [
        triangular(p, cfg.regime_low),
        triangular(p, cfg.regime_med),
        triangular(p, cfg.regime_high),
    ]
}

/// Event criterion weights: membership-weighted interpolation of the
/// regime rows, renormalized to sum 1.
pub fn event_weights(role: Role, p: f64, cfg: &TopsisConfig) -> [f64; N_CRITERIA] {
    let mu = regime_memberships(p, cfg);
    let table = cfg.regime_weights(role);
    let mut w = [0.0; N_CRITERIA];
    for (g, &m) in mu.iter().enumerate() {
        for c in 0..N_CRITERIA {
            w[c] += m * table[g][c];
        }
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

/// Min-max normalize an event's criteria; distance is inverted into a
/// benefit. A criterion whose max equals its min within the event maps to
/// the degenerate value for every candidate.
pub fn normalize_event(candidates: &[Candidate], cfg: &TopsisConfig) -> Vec<[f64; N_CRITERIA]> {
    let column = |f: fn(&Candidate) -> f64| -> Vec<f64> { candidates.iter().map(f).collect() };
    let normalize = |values: &[f64], invert: bool| -> Vec<f64> {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == min {
            return vec![cfg.degenerate_value; values.len()];
        }
        values
            .iter()
            .map(|&v| {
                let n = (v - min) / (max - min + cfg.epsilon);
                if invert {
                    1.0 - n
                } else {
                    n
                }
            })
            .collect()
    };

    let d = normalize(&column(|c| c.distance_km), true);
    let s = normalize(&column(|c| c.charging_speed_kw), false);
    let a = normalize(&column(|c| c.popularity), false);
    (0..candidates.len()).map(|j| [d[j], s[j], a[j]]).collect()
}

/// Full TOPSIS evaluation of one event.
pub fn topsis_score(event: &DecisionEvent, cfg: &TopsisConfig) -> TopsisResult {
    let normalized = normalize_event(&event.candidates, cfg);
    let weights = event_weights(event.role, event.pressure, cfg);

    let weighted: Vec<[f64; N_CRITERIA]> = normalized
        .iter()
        .map(|x| {
            let mut v = [0.0; N_CRITERIA];
            for c in 0..N_CRITERIA {
                v[c] = weights[c] * x[c];
            }
            v
        })
        .collect();

    let mut ideal = [f64::NEG_INFINITY; N_CRITERIA];
    let mut anti_ideal = [f64::INFINITY; N_CRITERIA];
    for v in &weighted {
        for c in 0..N_CRITERIA {
            ideal[c] = ideal[c].max(v[c]);
            anti_ideal[c] = anti_ideal[c].min(v[c]);
        }
    }

    let dist = |v: &[f64; N_CRITERIA], to: &[f64; N_CRITERIA]| -> f64 {
        (0..N_CRITERIA)
            .map(|c| (v[c] - to[c]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let dist_ideal: Vec<f64> = weighted.iter().map(|v| dist(v, &ideal)).collect();
    let dist_anti_ideal: Vec<f64> = weighted.iter().map(|v| dist(v, &anti_ideal)).collect();

    let closeness: Vec<f64> = dist_ideal
        .iter()
        .zip(&dist_anti_ideal)
        .map(|(&dp, &dm)| {
            if dp + dm == 0.0 {
                cfg.single_candidate_score
            } else {
                dm / (dp + dm)
            }
        })
        .collect();

    TopsisResult {
        normalized,
        weighted,
        ideal,
        anti_ideal,
        dist_ideal,
        dist_anti_ideal,
        closeness,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use chrono::{TimeZone, Utc};
    use rand::Rng;

    use crate::geo::GeoPoint;

    fn cand(station_id: u64, d: f64, s: f64, a: f64) -> Candidate {
        Candidate {
            station_id,
            distance_km: d,
            charging_speed_kw: s,
            popularity: a,
        }
    }

    pub(crate) fn event_with(role: Role, pressure: f64, candidates: Vec<Candidate>) -> DecisionEvent {
        DecisionEvent {
            event_id: 0,
            ev_id: 1,
            journey_id: 1,
            timestamp: Utc.with_ymd_and_hms(2024, 1, 1, 8, 0, 0).unwrap(),
            location: GeoPoint { lat: 41.8, lon: -87.7 },
            community_area: 1,
            role,
            soc_e: 0.5,
            energy_level_wh: 30_000.0,
            battery_capacity_wh: 60_000.0,
            quantity_wh: 0.0,
            pressure,
            model_id: 1,
            candidates,
        }
    }

    #[test]
    fn pressure_by_role() {
        assert_eq!(transaction_pressure(0.0, Role::Consumer), 1.0);
        assert_eq!(transaction_pressure(0.8, Role::Provider), 0.8);
        // raw SOC above 1 clips first, then complements
        assert_eq!(transaction_pressure(1.2, Role::Consumer), 0.0);
    }

    #[test]
    fn memberships_at_key_points() {
        let cfg = TopsisConfig::default();
        assert_eq!(regime_memberships(0.0, &cfg), [1.0, 0.0, 0.0]);
        assert_eq!(regime_memberships(0.5, &cfg), [0.0, 1.0, 0.0]);
        let mu = regime_memberships(0.375, &cfg);
        assert_relative_eq!(mu[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(mu[1], 0.5, epsilon = 1e-12);
        assert_eq!(mu[2], 0.0);
        // shoulders keep every p covered
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            assert!(regime_memberships(p, &cfg).iter().any(|&m| m > 0.0));
        }
    }

    #[test]
    fn degenerate_distance_maps_to_half() {
        let cfg = TopsisConfig::default();
        let cands = vec![cand(1, 2.0, 10.0, 0.1), cand(2, 2.0, 20.0, 0.5), cand(3, 2.0, 30.0, 0.9)];
        let norm = normalize_event(&cands, &cfg);
        assert!(norm.iter().all(|x| x[0] == 0.5));
    }

    #[test]
    fn distance_inversion_and_minmax() {
        let cfg = TopsisConfig::default();
        let cands = vec![cand(1, 1.0, 10.0, 0.0), cand(2, 3.0, 20.0, 0.5)];
        let norm = normalize_event(&cands, &cfg);
        assert_relative_eq!(norm[0][0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(norm[1][0], 0.0, epsilon = 1e-8);

        let speeds = vec![cand(1, 1.0, 10.0, 0.1), cand(2, 2.0, 20.0, 0.1), cand(3, 3.0, 30.0, 0.1)];
        let norm = normalize_event(&speeds, &cfg);
        assert_relative_eq!(norm[0][1], 0.0, epsilon = 1e-8);
        assert_relative_eq!(norm[1][1], 0.5, epsilon = 1e-8);
        assert_relative_eq!(norm[2][1], 1.0, epsilon = 1e-8);
        assert!(norm.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn zero_pressure_collapses_to_low_regime_row() {
        let cfg = TopsisConfig::default();
        let w = event_weights(Role::Consumer, 0.0, &cfg);
        let expected = cfg.regime_weights(Role::Consumer)[0];
        for c in 0..N_CRITERIA {
            assert_relative_eq!(w[c], expected[c], epsilon = 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one_for_any_role_and_pressure() {
        let cfg = TopsisConfig::default();
        for role in [Role::Consumer, Role::Provider] {
            for i in 0..=50 {
                let p = i as f64 / 50.0;
                let w = event_weights(role, p, &cfg);
                assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
                assert!(w.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn interpolated_weights_match_hand_blend() {
        // memberships at p = 0.375 are (0.25, 0.5, 0); blend the consumer
        // low and mid rows by hand and renormalize
        let cfg = TopsisConfig::default();
        let rows = cfg.regime_weights(Role::Consumer);
        let mut expectation = [0.0; N_CRITERIA];
        for c in 0..N_CRITERIA {
            expectation[c] = 0.25 * rows[0][c] + 0.5 * rows[1][c];
        }
        let total: f64 = expectation.iter().sum();
        let got = event_weights(Role::Consumer, 0.375, &cfg);
        for c in 0..N_CRITERIA {
            assert_relative_eq!(got[c], expectation[c] / total, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_candidate_scores_half() {
        let cfg = TopsisConfig::default();
        let event = event_with(Role::Consumer, 0.6, vec![cand(1, 2.0, 50.0, 0.4)]);
        let res = topsis_score(&event, &cfg);
        assert_eq!(res.closeness, vec![0.5]);
    }

    #[test]
    fn extreme_candidates_hit_zero_and_one() {
        // one candidate best on everything, one worst on everything: their
        // weighted vectors ARE the ideal and anti-ideal
        let cfg = TopsisConfig::default();
        let event = event_with(
            Role::Provider,
            0.5,
            vec![cand(1, 1.0, 100.0, 0.9), cand(2, 5.0, 10.0, 0.1)],
        );
        let res = topsis_score(&event, &cfg);
        assert_relative_eq!(res.closeness[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(res.closeness[1], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn dominating_candidate_attains_max_closeness() {
        let cfg = TopsisConfig::default();
        let event = event_with(
            Role::Consumer,
            0.8,
            vec![
                cand(1, 0.5, 120.0, 0.95),
                cand(2, 1.5, 50.0, 0.40),
                cand(3, 4.0, 22.0, 0.70),
            ],
        );
        let res = topsis_score(&event, &cfg);
        let best = res.closeness.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.closeness[0], best);
    }

    #[test]
    fn closeness_in_unit_interval_and_permutation_equivariant() {
        let cfg = TopsisConfig::default();
        let mut rng = crate::rng::stream(11, crate::rng::StreamKind::EmInit, 0);
        for _ in 0..200 {
            let n = rng.gen_range(1..=8usize);
            let cands: Vec<Candidate> = (0..n)
                .map(|i| {
                    cand(
                        i as u64 + 1,
                        rng.gen_range(0.1..10.0),
                        rng.gen_range(5.0..250.0),
                        rng.gen_range(0.0..1.0),
                    )
                })
                .collect();
            let role = if rng.gen_range(0.0..1.0) < 0.5 { Role::Consumer } else { Role::Provider };
            let p = rng.gen_range(0.0..1.0);
            let event = event_with(role, p, cands.clone());
            let res = topsis_score(&event, &cfg);
            assert!(res.closeness.iter().all(|&r| (0.0..=1.0).contains(&r)));

            let mut reversed = cands;
            reversed.reverse();
            let res_rev = topsis_score(&event_with(role, p, reversed), &cfg);
            for (j, &r) in res.closeness.iter().enumerate() {
                let k = res.closeness.len() - 1 - j;
                assert_relative_eq!(r, res_rev.closeness[k], epsilon = 1e-12);
            }
        }
    }
}
