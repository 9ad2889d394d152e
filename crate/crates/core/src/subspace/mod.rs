//! Subspace estimation: covariance and spatial smoothing, eigendecomposition,
//! model order selection, angle and delay-Doppler MUSIC, path separation.

mod covariance;
mod delay_doppler;
mod evd;
mod mdl;
mod music;
pub mod search;
mod separate;

use std::io::Write;

pub use covariance::{sample_covariance, selection_matrix, spatial_smooth, CovarianceMatrix, SmoothingPlan};
pub use delay_doppler::{
    delay_doppler_music, delay_doppler_music_with, subblock_covariance, subblock_covariance_direct,
    wrap_delay_centered, wrap_doppler, DdEstimate, DdGrid, DdOptions,
};
pub use evd::{hermitian_evd, EigenDecomposition};
pub use mdl::mdl_order;
pub use music::{music_aoa, music_aoa_with, AngleGrid, MusicEstimate, SPECTRUM_EPS};
pub use separate::{combine, separate_paths, separation_weights};

/// Pseudo-spectrum on a rectangular grid, values row-major with `axis1` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub axis1_name: String,
    pub axis2_name: String,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpectrumGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axis2.len() + j]
    }

    /// Plain CSV: `axis1, axis2, value`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.axis1_name.as_str(), self.axis2_name.as_str(), "value"])?;
        for (i, a) in self.axis1.iter().enumerate() {
            for (j, b) in self.axis2.iter().enumerate() {
                w.write_record([format!("{a:e}"), format!("{b:e}"), format!("{:e}", self.value(i, j))])?;
            }
        }
        w.flush()
    }
}
