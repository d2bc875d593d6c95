//! Rank-quantile mapping from soft relevance to integer grades.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grade thresholds over the normalized rank score
/// `q = 1 - (rank - 1) / max(|J| - 1, 1)`.
///
/// The defaults give grade 3 to roughly the top 10% of an event's
/// candidates, grade >= 2 to the top 30% and grade >= 1 to the top 60%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradeConfig {
    pub g_max: u8,
    /// Ascending thresholds `kappa_1 < ... < kappa_G` in `(0, 1]`.
    pub kappa: Vec<f64>,
}

impl Default for GradeConfig {
    fn default() -> Self {
        GradeConfig {
            g_max: 3,
            kappa: vec![0.4, 0.7, 0.9],
        }
    }
}

impl GradeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kappa.len() != self.g_max as usize {
            return Err(Error::InvalidConfig(format!(
                "need {} thresholds for grades up to {}, got {}",
                self.g_max,
                self.g_max,
                self.kappa.len()
            )));
        }
        let ascending = self.kappa.windows(2).all(|w| w[0] < w[1]);
        let in_range = self.kappa.iter().all(|&k| k > 0.0 && k <= 1.0);
        if !ascending || !in_range {
            return Err(Error::InvalidConfig(format!(
                "thresholds must be strictly increasing in (0, 1]: {:?}",
                self.kappa
            )));
        }
        Ok(())
    }

    fn grade_of(&self, q: f64) -> u8 {
        self.kappa.iter().filter(|&&k| q >= k).count() as u8
    }
}

/// Grades for one event.
///
/// Candidates are ranked by descending `p`; ties break on higher raw
/// TOPSIS score, then lower station id, so the ordering is deterministic.
/// The top-ranked candidate always gets `q = 1` and thus the top grade.
pub fn graded_labels(
    p: &[f64],
    raw_topsis: &[f64],
    station_ids: &[u64],
    cfg: &GradeConfig,
) -> Result<Vec<u8>> {
    cfg.validate()?;
    let n = p.len();
    if n == 0 || raw_topsis.len() != n || station_ids.len() != n {
        return Err(Error::InvalidInput(format!(
            "mismatched label inputs: p={n}, raw={}, ids={}",
            raw_topsis.len(),
            station_ids.len()
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        p[j].partial_cmp(&p[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                raw_topsis[j]
                    .partial_cmp(&raw_topsis[i])
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(station_ids[i].cmp(&station_ids[j]))
    });

    let denom = (n as f64 - 1.0).max(1.0);
    let mut grades = vec![0u8; n];
    for (rank0, &idx) in order.iter().enumerate() {
        let q = 1.0 - rank0 as f64 / denom;
        grades[idx] = cfg.grade_of(q);
    }
    Ok(grades)
}
