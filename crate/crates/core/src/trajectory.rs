use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Uniformly or non-uniformly sampled real trajectory.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub z: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Max of |z[idx]| over samples.
    pub fn amplitude(&self, idx: usize) -> f64 {
        self.z.iter().map(|z| z[idx].abs()).fold(0.0, f64::max)
    }
}

/// A periodic orbit sampled over one period `[0, period)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampledOrbit {
    pub period: f64,
    pub traj: Trajectory,
}
