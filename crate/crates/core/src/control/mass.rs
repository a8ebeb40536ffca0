use crate::params::G;

/// One control-tick sample of the load cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrapSample {
    pub t: f64,
    pub f_strap: f64,
    pub v0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    pub mass: f64,
    /// No quasi-static window was found and the fallback was used.
    pub fallback: bool,
}

/// Output speed below which the strap force is taken as the patient weight (m/s).
pub const QUASI_STATIC_SPEED: f64 = 0.05;
/// Minimum duration of a weighing window (s).
pub const MIN_WINDOW: f64 = 0.5;

/// Median strap force over the most recent quasi-static window, divided by g.
///
/// `history` must be in time order.
pub fn estimate_mass(history: &[StrapSample], fallback: f64) -> MassEstimate {
    let mut end = history.len();
    while end > 0 {
        // skip moving samples
        while end > 0 && history[end - 1].v0.abs() >= QUASI_STATIC_SPEED {
            end -= 1;
        }
        let mut start = end;
        while start > 0 && history[start - 1].v0.abs() < QUASI_STATIC_SPEED {
            start -= 1;
        }
        if end > start && history[end - 1].t - history[start].t >= MIN_WINDOW {
            let mut forces: Vec<f64> = history[start..end].iter().map(|s| s.f_strap).collect();
            return MassEstimate {
                mass: median(&mut forces) / G,
                fallback: false,
            };
        }
        end = start;
    }
    log::warn!("no quasi-static weighing window, using fallback mass {fallback} kg");
    MassEstimate {
        mass: fallback,
        fallback: true,
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(n: usize, mut f: impl FnMut(usize) -> (f64, f64)) -> Vec<StrapSample> {
        (0..n)
            .map(|i| {
                let (f_strap, v0) = f(i);
                StrapSample { t: i as f64 * 0.004, f_strap, v0 }
            })
            .collect()
    }

    #[test]
    fn constant_force() {
        let h = series(250, |_| (667.08, 0.0));
        let est = estimate_mass(&h, 50.0);
        assert!(!est.fallback);
        assert!((est.mass - 68.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_force_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 5.0).unwrap();
        let h = series(500, |_| (883.0 + noise.sample(&mut rng), 0.001));
        let est = estimate_mass(&h, 50.0);
        assert!((est.mass - 90.0).abs() < 1.0, "{}", est.mass);
    }

    #[test]
    fn free_fall_only_uses_fallback() {
        let h = series(300, |i| (0.0, -9.81 * i as f64 * 0.004 - 0.1));
        let est = estimate_mass(&h, 75.0);
        assert!(est.fallback);
        assert_eq!(est.mass, 75.0);
    }

    #[test]
    fn latest_window_wins() {
        // 1 s at 68 kg, 0.4 s moving, 0.6 s at 90 kg
        let h = series(500, |i| match i {
            0..=249 => (68.0 * G, 0.0),
            250..=349 => (500.0, 0.2),
            _ => (90.0 * G, 0.0),
        });
        assert!((estimate_mass(&h, 1.0).mass - 90.0).abs() < 1e-9);
        // too short a final window falls back to the earlier one
        let h = series(400, |i| match i {
            0..=249 => (68.0 * G, 0.0),
            250..=349 => (500.0, 0.2),
            _ => (90.0 * G, 0.0),
        });
        assert!((estimate_mass(&h, 1.0).mass - 68.0).abs() < 1e-9);
    }
}
