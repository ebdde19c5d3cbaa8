use crate::error::{shape_err, Result};
use serde::{Deserialize, Serialize};

/// Mean and final displacement, averaged over `samples` trajectories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionMetrics {
    pub mad: f64,
    pub fad: f64,
    pub samples: usize,
}

pub fn mad_fad(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<PredictionMetrics> {
    if pred.len() != truth.len() || pred.is_empty() {
        return shape_err(format!(
            "mad_fad needs equal non-empty lengths, got {} and {}",
            pred.len(),
            truth.len()
        ));
    }
    let disp: Vec<f64> = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p[0] - t[0]).hypot(p[1] - t[1]))
        .collect();
    Ok(PredictionMetrics {
        mad: disp.iter().sum::<f64>() / disp.len() as f64,
        fad: *disp.last().expect("non-empty"),
        samples: 1,
    })
}

impl PredictionMetrics {
    /// Sample-weighted average of per-trajectory metrics.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a PredictionMetrics>) -> PredictionMetrics {
        let mut acc = PredictionMetrics::default();
        for m in items {
            acc.mad += m.mad * m.samples as f64;
            acc.fad += m.fad * m.samples as f64;
            acc.samples += m.samples;
        }
        if acc.samples > 0 {
            acc.mad /= acc.samples as f64;
            acc.fad /= acc.samples as f64;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let a = [[1.0, 2.0], [3.0, 4.0]];
        let m = mad_fad(&a, &a).unwrap();
        assert_eq!((m.mad, m.fad), (0.0, 0.0));
        let shifted = [[2.0, 2.0], [4.0, 4.0]];
        let m = mad_fad(&shifted, &a).unwrap();
        assert_eq!((m.mad, m.fad), (1.0, 1.0));
        let m = mad_fad(&[[3.0, 4.0], [0.0, 0.0]], &[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!((m.mad, m.fad), (2.5, 0.0));
    }

    #[test]
    fn length_mismatch() {
        assert!(mad_fad(&[[0.0, 0.0]], &[]).is_err());
        assert!(mad_fad(&[[0.0, 0.0]], &[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }
}
