use crate::error::Result;
use crate::scene::Angles;
use crate::waveform::{ls_beamformer, CMatrix, CVector, CsiTensor, UpaSpec, C64};

/// LS combiners `w_l` with unit response toward path `l` and nulls toward the
/// others.
pub fn separation_weights(aoas: &[Angles], upa: &UpaSpec) -> Result<Vec<CVector>> {
    (0..aoas.len())
        .map(|l| {
            let v = CVector::from_fn(aoas.len(), |k, _| C64::new(if k == l { 1.0 } else { 0.0 }, 0.0));
            ls_beamformer(aoas, &v, upa)
        })
        .collect()
}

/// Per-path `N × M_s` matrices `ĥ^l_{n,m} = w_l^T ĥ_{n,m}`.
///
/// The combiner is applied without conjugation so that the constraints
/// `α^T(q_k) w_l = δ_{kl}` solved by the beamformer are exactly the responses
/// seen by the data.
pub fn separate_paths(csi: &CsiTensor, aoas: &[Angles], upa: &UpaSpec) -> Result<Vec<CMatrix>> {
    let weights = separation_weights(aoas, upa)?;
    Ok(weights.iter().map(|w| combine(csi, w)).collect())
}

pub fn combine(csi: &CsiTensor, w: &CVector) -> CMatrix {
    let g = csi.grid;
    CMatrix::from_fn(g.n_subcarriers, g.n_packets, |n, m| {
        csi.snapshot(n, m).iter().zip(w.iter()).map(|(h, w)| h * w).sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{synthesize_csi_with_gains, ClockOffsets, OfdmGrid, PathParams};

    fn setup() -> (UpaSpec, OfdmGrid, Vec<PathParams>) {
        let upa = UpaSpec::square(4);
        let grid = OfdmGrid::new(8, 4, 97_656.25, 3.34e-6, 1, 28e9).unwrap();
        let mk = |phi: f64, theta: f64, tau: f64, f: f64, g: C64, los: bool| PathParams {
            gain: g,
            delay: tau,
            doppler: f,
            aoa: Angles::from_degrees(phi, theta),
            aod: Angles::new(0.0, 0.0),
            is_los: los,
        };
        let paths = vec![
            mk(45.0, 55.0, 0.6e-6, 0.0, C64::new(1.0, 0.0), true),
            mk(-60.0, 30.0, 1.5e-6, 800.0, C64::new(0.0, 0.9), false),
        ];
        (upa, grid, paths)
    }

    #[test]
    fn nulls_suppress_other_path() {
        let (upa, grid, paths) = setup();
        let chi = [C64::new(1.0, 0.0); 2];
        let only0 =
            synthesize_csi_with_gains(&upa, &grid, &paths[..1], &chi[..1], &ClockOffsets::default(), 0.0, 0).unwrap();
        let only1 =
            synthesize_csi_with_gains(&upa, &grid, &paths[1..], &chi[1..], &ClockOffsets::default(), 0.0, 0).unwrap();
        let aoas: Vec<Angles> = paths.iter().map(|p| p.aoa).collect();
        let s0 = separate_paths(&only0, &aoas, &upa).unwrap();
        let s1 = separate_paths(&only1, &aoas, &upa).unwrap();
        let leak = s1[0].norm_squared() / s0[0].norm_squared();
        assert!(leak < 1e-10, "{leak}");
        let leak = s0[1].norm_squared() / s1[1].norm_squared();
        assert!(leak < 1e-10, "{leak}");
    }

    #[test]
    fn single_path_gives_phase_sequence() {
        let (upa, grid, paths) = setup();
        let p = &paths[1];
        let csi = synthesize_csi_with_gains(
            &upa,
            &grid,
            &[*p],
            &[C64::new(1.0, 0.0)],
            &ClockOffsets::default(),
            0.0,
            0,
        )
        .unwrap();
        let h = &separate_paths(&csi, &[p.aoa], &upa).unwrap()[0];
        let dp = grid.delay_phasors(p.delay);
        let fp = grid.doppler_phasors(p.doppler);
        for n in 0..grid.n_subcarriers {
            for m in 0..grid.n_packets {
                assert!((h[(n, m)] - p.gain * dp[n] * fp[m]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_aoa_leaks_a_little() {
        let (upa, grid, paths) = setup();
        let chi = [C64::new(1.0, 0.0)];
        let only1 =
            synthesize_csi_with_gains(&upa, &grid, &paths[1..], &chi, &ClockOffsets::default(), 0.0, 0).unwrap();
        let mut aoas: Vec<Angles> = paths.iter().map(|p| p.aoa).collect();
        aoas[1].azimuth += 0.1f64.to_radians();
        let s = separate_paths(&only1, &aoas, &upa).unwrap();
        let leak = s[0].norm_squared() / s[1].norm_squared();
        assert!(leak > 0.0 && leak < 1e-2, "{leak}");
    }
}
