//! Least-squares identification of the EM2 friction law from
//! `(w2, F_d, tau_f)` samples.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::FrictionParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionSample {
    pub w2: f64,
    pub f_d: f64,
    pub tau_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionFit {
    pub params: FrictionParams,
    pub residual_rms: f64,
    pub samples: usize,
}

/// Relative singular-value threshold below which a column is treated as unidentifiable.
const RANK_TOL: f64 = 1e-10;

/// Fit `(b, c, d)` at a fixed tanh sharpness.
///
/// The model is linear in the coefficients once the direction factor
/// `tanh(s·w2)` is fixed, so the fit is an ordinary least-squares solve.
pub fn identify_friction(samples: &[FrictionSample], tanh_sharpness: f64) -> Result<FrictionFit> {
    if samples.len() < 4 {
        return Err(Error::RankDeficient(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    if !(tanh_sharpness > 0.0) {
        return Err(Error::param("tanh_sharpness", "must be > 0"));
    }
    let has_pos = samples.iter().any(|s| s.w2 > 0.0);
    let has_neg = samples.iter().any(|s| s.w2 < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::RankDeficient(
            "samples must span both signs of w2".into(),
        ));
    }

    let n = samples.len();
    let mut a = DMatrix::<f64>::zeros(n, 3);
    let mut y = DVector::<f64>::zeros(n);
    for (i, s) in samples.iter().enumerate() {
        let dir = (tanh_sharpness * s.w2).tanh();
        a[(i, 0)] = s.w2.abs() * dir;
        a[(i, 1)] = dir;
        a[(i, 2)] = s.f_d * dir;
        y[i] = s.tau_f;
    }

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(Error::RankDeficient(format!(
            "singular values span [{smin:e}, {smax:e}]"
        )));
    }
    let x = svd
        .solve(&y, RANK_TOL * smax)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;

    let resid = &a * &x - &y;
    let residual_rms = (resid.norm_squared() / n as f64).sqrt();
    Ok(FrictionFit {
        params: FrictionParams {
            b_visc: x[0],
            dry_offset: x[1],
            load_scale: x[2],
            tanh_sharpness,
        },
        residual_rms,
        samples: n,
    })
}

/// Noise-free samples of the friction law on a `w2 × F_d` grid.
pub fn synthetic_samples(fp: &FrictionParams, speeds: &[f64], loads: &[f64]) -> Vec<FrictionSample> {
    let mut out = Vec::with_capacity(speeds.len() * loads.len());
    for &f_d in loads {
        for &w2 in speeds {
            out.push(FrictionSample {
                w2,
                f_d,
                tau_f: crate::model::friction_torque(w2, f_d, fp),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn truth() -> FrictionParams {
        FrictionParams {
            b_visc: 8e-4,
            dry_offset: 0.07,
            load_scale: 1e-4,
            tanh_sharpness: 10.0,
        }
    }

    fn grid() -> (Vec<f64>, Vec<f64>) {
        let speeds: Vec<f64> = (-20..=20).filter(|&i| i != 0).map(|i| i as f64 * 5.0).collect();
        (speeds, vec![50.0, 150.0, 300.0])
    }

    #[test]
    fn noiseless_round_trip() {
        let (s, l) = grid();
        let fit = identify_friction(&synthetic_samples(&truth(), &s, &l), 10.0).unwrap();
        assert!((fit.params.b_visc - 8e-4).abs() < 1e-6);
        assert!((fit.params.dry_offset - 0.07).abs() < 1e-6);
        assert!((fit.params.load_scale - 1e-4).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn zero_speed_samples_are_rank_deficient() {
        let samples: Vec<_> = (0..10)
            .map(|i| FrictionSample {
                w2: 0.0,
                f_d: i as f64 * 10.0,
                tau_f: 0.0,
            })
            .collect();
        assert!(matches!(
            identify_friction(&samples, 10.0),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn constant_load_cannot_separate_offset_and_scale() {
        let (s, _) = grid();
        let samples = synthetic_samples(&truth(), &s, &[150.0]);
        assert!(identify_friction(&samples, 10.0).is_err());
    }

    #[test]
    fn too_few_samples() {
        let (s, l) = grid();
        let samples = synthetic_samples(&truth(), &s[..1], &l);
        assert!(identify_friction(&samples, 10.0).is_err());
    }

    #[test]
    fn noisy_residual_matches_noise_level() {
        let sigma = 0.005;
        let (s, l) = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut samples = synthetic_samples(&truth(), &s, &l);
        for smp in &mut samples {
            smp.tau_f += noise.sample(&mut rng);
        }
        let fit = identify_friction(&samples, 10.0).unwrap();
        // 120 samples, 3 parameters: expected rms ≈ σ·sqrt((n-3)/n)
        assert!((fit.residual_rms / sigma - 1.0).abs() < 0.2, "{}", fit.residual_rms);
    }
}
