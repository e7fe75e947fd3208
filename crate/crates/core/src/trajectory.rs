use std::io::Write;

use crate::error::Result;
use crate::manifold::FixedRankPoint;
use crate::projection::GapReport;

pub const TRAJECTORY_CSV_HEADER: &str =
    "t,gap_sigma_r,gap_sigma_r1,residual_norm,reconstruction_error";

/// One accepted step. Diagnostics that were not computed are NaN.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: FixedRankPoint,
    pub gap: Option<GapReport>,
    pub residual_norm: f64,
    pub reconstruction_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Set when the run stopped early at a crossing of `sigma_r` and `sigma_{r+1}`.
    pub crossing: Option<(f64, GapReport)>,
}

impl Trajectory {
    pub fn push(&mut self, s: TrajectorySample) {
        self.samples.push(s);
    }

    pub fn last(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for s in &self.samples {
            let (sr, sr1) = s
                .gap
                .map(|g| (g.sigma_r, g.sigma_r_plus_1))
                .unwrap_or((f64::NAN, f64::NAN));
            writeln!(
                w,
                "{},{},{},{},{}",
                s.t, sr, sr1, s.residual_norm, s.reconstruction_error
            )?;
        }
        Ok(())
    }
}
