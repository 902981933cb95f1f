//! Synthetic quasi-static indentation experiments.
//!
//! The end effector descends at constant speed from above the specimen to a
//! fixed fraction of its thickness below the surface. The true force follows
//! the closed-form contact law; encoder and force-sensor noise are added as
//! independent Gaussian samples. Trajectory tracking is ideal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::contact::{IndenterProfile, Material};
use crate::error::{Error, Result};
use crate::recovery::RecoveryParams;

/// 50 mm/min.
pub const RIG_SPEED: f64 = 0.05 / 60.0;
pub const RIG_SAMPLE_RATE: f64 = 800.0;
/// Rated peak-to-peak uncertainty of the force sensor along z (N).
pub const RIG_FORCE_UNCERTAINTY: f64 = 48e-3;
/// Gaussian σ taken as a quarter of the peak-to-peak band.
pub const RIG_FORCE_NOISE_STD: f64 = RIG_FORCE_UNCERTAINTY / 4.0;
/// ±0.03 mm repeatability read as a ±3σ band.
pub const RIG_POSITION_NOISE_STD: f64 = 1e-5;
pub const RIG_DEPTH_FRACTION: f64 = 0.1;
pub const APPROACH_GAP: f64 = 5e-3;
/// Cartesian PD gains of the rig controller; recorded, not simulated.
pub const RIG_CONTROLLER_GAINS: (f64, f64) = (20.0, 0.5);

/// Reference foam specimens: ground-truth modulus, its spread, and thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foam {
    pub name: &'static str,
    pub e_f: f64,
    pub e_f_std: f64,
    pub thickness: f64,
}

pub const WHITE_FOAM: Foam = Foam {
    name: "white",
    e_f: 111e3,
    e_f_std: 13e3,
    thickness: 0.030,
};

pub const PINK_FOAM: Foam = Foam {
    name: "pink",
    e_f: 136e3,
    e_f_std: 14e3,
    thickness: 0.020,
};

pub const GREY_FOAM: Foam = Foam {
    name: "grey",
    e_f: 194e3,
    e_f_std: 17e3,
    thickness: 0.020,
};

pub const FOAMS: [Foam; 3] = [WHITE_FOAM, PINK_FOAM, GREY_FOAM];

impl Foam {
    pub fn by_name(name: &str) -> Option<Foam> {
        FOAMS
            .into_iter()
            .find(|f| f.name.eq_ignore_ascii_case(name))
    }
}

/// Rig tips: flat punch of 1 cm radius, sphere of 1 cm, paraboloid of 1.17 cm.
pub fn rig_flat_tip() -> IndenterProfile {
    IndenterProfile::flat(0.01).expect("valid")
}

pub fn rig_sphere_tip() -> IndenterProfile {
    IndenterProfile::sphere(0.01).expect("valid")
}

pub fn rig_paraboloid_tip() -> IndenterProfile {
    IndenterProfile::paraboloid(0.0117).expect("valid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Specimen {
    pub material: Material,
    /// m
    pub thickness: f64,
    /// True surface height in the robot frame (m).
    pub z_surf_true: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub specimen: Specimen,
    pub profile: IndenterProfile,
    /// Cross-head speed (m/s).
    pub speed: f64,
    /// Maximum penetration as a fraction of the thickness.
    pub depth_fraction: f64,
    /// Hz
    pub sample_rate: f64,
    /// N
    pub force_noise_std: f64,
    /// m
    pub position_noise_std: f64,
    /// Height above the surface where the descent starts (m).
    pub approach_gap: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Rig defaults: 50 mm/min, 10 % depth, 800 Hz, σ_F = 12 mN, σ_z = 10 μm.
    pub fn rig(specimen: Specimen, profile: IndenterProfile, seed: u64) -> Self {
        Self {
            specimen,
            profile,
            speed: RIG_SPEED,
            depth_fraction: RIG_DEPTH_FRACTION,
            sample_rate: RIG_SAMPLE_RATE,
            force_noise_std: RIG_FORCE_NOISE_STD,
            position_noise_std: RIG_POSITION_NOISE_STD,
            approach_gap: APPROACH_GAP,
            seed,
        }
    }

    pub fn noise_free(mut self) -> Self {
        self.force_noise_std = 0.0;
        self.position_noise_std = 0.0;
        self
    }

    /// Every violated constraint, with units.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.speed) {
            out.push(format!("speed must be > 0 m/s, got {}", self.speed));
        }
        if !positive(self.sample_rate) {
            out.push(format!(
                "sample_rate must be > 0 Hz, got {}",
                self.sample_rate
            ));
        }
        if !(self.depth_fraction > 0.0 && self.depth_fraction <= 0.2) {
            out.push(format!(
                "depth_fraction must lie in (0, 0.2] of the thickness, got {}",
                self.depth_fraction
            ));
        }
        if !positive(self.specimen.thickness) {
            out.push(format!(
                "thickness must be > 0 m, got {}",
                self.specimen.thickness
            ));
        }
        if !self.specimen.z_surf_true.is_finite() {
            out.push(format!(
                "z_surf must be a finite height in m, got {}",
                self.specimen.z_surf_true
            ));
        }
        if !non_negative(self.force_noise_std) {
            out.push(format!(
                "force_noise_std must be >= 0 N, got {}",
                self.force_noise_std
            ));
        }
        if !non_negative(self.position_noise_std) {
            out.push(format!(
                "position_noise_std must be >= 0 m, got {}",
                self.position_noise_std
            ));
        }
        if !non_negative(self.approach_gap) {
            out.push(format!(
                "approach_gap must be >= 0 m, got {}",
                self.approach_gap
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(Error::invalid(v.join("; ")));
        }
        if self.depth_fraction > RIG_DEPTH_FRACTION {
            log::warn!(
                "depth_fraction {} exceeds the linear range of {}",
                self.depth_fraction,
                RIG_DEPTH_FRACTION
            );
        }
        Ok(())
    }

    pub fn max_depth(&self) -> f64 {
        self.depth_fraction * self.specimen.thickness
    }

    pub fn z_start(&self) -> f64 {
        self.specimen.z_surf_true + self.approach_gap
    }

    pub fn z_end(&self) -> f64 {
        self.specimen.z_surf_true - self.max_depth()
    }

    pub fn traverse_time(&self) -> f64 {
        (self.z_start() - self.z_end()) / self.speed
    }

    /// `floor(traverse_time · sample_rate) + 1`.
    pub fn sample_count(&self) -> usize {
        // The small guard keeps exact products such as 9.6 s × 800 Hz from
        // rounding down a sample.
        (self.traverse_time() * self.sample_rate * (1.0 + 1e-12)).floor() as usize + 1
    }
}

/// One synchronized sample of the logged stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndentationRecord {
    /// s
    pub t: f64,
    /// m
    pub z_ee: f64,
    /// N
    pub f_z: f64,
}

/// Generates one indentation dataset; deterministic given `config.seed`.
pub fn simulate_indentation(config: &ExperimentConfig) -> Result<Vec<IndentationRecord>> {
    config.validate()?;
    let n = config.sample_count();
    let z_start = config.z_start();
    let z_end = config.z_end();
    let t_total = config.traverse_time();
    let material = config.specimen.material;
    let z_surf = config.specimen.z_surf_true;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let force_noise = Normal::new(0.0, config.force_noise_std)
        .map_err(|e| Error::invalid(format!("force noise: {e}")))?;
    let position_noise = Normal::new(0.0, config.position_noise_std)
        .map_err(|e| Error::invalid(format!("position noise: {e}")))?;

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / config.sample_rate;
        let z_true = if i + 1 == n && (t_total - t) * config.sample_rate < 1e-6 {
            z_end
        } else {
            (z_start - config.speed * t).max(z_end)
        };
        let d = (z_surf - z_true).max(0.0);
        let f_true = config.profile.force(&material, d)?;
        let mut z_ee = z_true;
        let mut f_z = f_true;
        if config.position_noise_std > 0.0 {
            z_ee += position_noise.sample(&mut rng);
        }
        if config.force_noise_std > 0.0 {
            f_z += force_noise.sample(&mut rng);
        }
        records.push(IndentationRecord { t, z_ee, f_z });
    }
    Ok(records)
}

/// One palpation of a repeated sequence, with the modulus it was generated with.
#[derive(Debug, Clone, PartialEq)]
pub struct Palpation {
    pub rest: f64,
    pub material: Material,
    pub seed: u64,
    pub records: Vec<IndentationRecord>,
}

/// Repeated palpations where the elastic modulus before palpation `k` is
/// `recovery(rest_intervals[k])`. Palpation `k` uses seed `config.seed + k`.
pub fn simulate_repeated_palpation(
    config: &ExperimentConfig,
    rest_intervals: &[f64],
    recovery: &RecoveryParams,
) -> Result<Vec<Palpation>> {
    let nu = config.specimen.material.nu();
    rest_intervals
        .iter()
        .enumerate()
        .map(|(k, &rest)| {
            if rest.is_nan() || rest <= 0.0 {
                return Err(Error::domain(format!(
                    "rest interval {k} must be > 0 s, got {rest}"
                )));
            }
            let e_f = recovery.eval(rest);
            if !(e_f.is_finite() && e_f > 0.0) {
                return Err(Error::domain(format!(
                    "recovery law gives non-positive modulus {e_f} Pa at rest {rest} s"
                )));
            }
            let material = Material::from_elastic(e_f, nu)?;
            let mut cfg = *config;
            cfg.specimen.material = material;
            cfg.seed = config.seed.wrapping_add(k as u64);
            Ok(Palpation {
                rest,
                material,
                seed: cfg.seed,
                records: simulate_indentation(&cfg)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::force_sphere;

    fn white_sphere(seed: u64) -> ExperimentConfig {
        let specimen = Specimen {
            material: Material::from_elastic(111e3, 0.0).unwrap(),
            thickness: 0.03,
            z_surf_true: 0.0,
        };
        ExperimentConfig::rig(specimen, rig_sphere_tip(), seed)
    }

    #[test]
    fn noise_free_final_force_is_contact_law() {
        let cfg = white_sphere(1).noise_free();
        let data = simulate_indentation(&cfg).unwrap();
        let last = data.last().unwrap();
        let expected = force_sphere(&cfg.specimen.material, 0.01, 0.003).unwrap();
        assert_eq!(last.z_ee, cfg.z_end());
        assert!((last.f_z - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn sample_count_and_time_order() {
        let cfg = white_sphere(1);
        let data = simulate_indentation(&cfg).unwrap();
        // 8 mm at 50 mm/min is 9.6 s; 9.6 × 800 + 1 samples.
        assert_eq!(data.len(), 7681);
        assert_eq!(data.len(), cfg.sample_count());
        assert!(data.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate_indentation(&white_sphere(42)).unwrap();
        let b = simulate_indentation(&white_sphere(42)).unwrap();
        let c = simulate_indentation(&white_sphere(43)).unwrap();
        assert!(a.iter().zip(&b).all(
            |(x, y)| x.f_z.to_bits() == y.f_z.to_bits() && x.z_ee.to_bits() == y.z_ee.to_bits()
        ));
        assert_ne!(a, c);
    }

    #[test]
    fn pre_contact_noise_statistics() {
        // Long approach so that at least 10⁴ samples precede contact.
        let mut cfg = white_sphere(7);
        cfg.approach_gap = 0.015;
        cfg.position_noise_std = 0.0;
        let data = simulate_indentation(&cfg).unwrap();
        let pre: Vec<f64> = data
            .iter()
            .filter(|r| r.z_ee > cfg.specimen.z_surf_true)
            .map(|r| r.f_z)
            .collect();
        assert!(pre.len() >= 10_000);
        let n = pre.len() as f64;
        let mean = pre.iter().sum::<f64>() / n;
        let var = pre.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        assert!((std - cfg.force_noise_std).abs() <= 0.05 * cfg.force_noise_std);
        assert!(mean.abs() <= 3.0 * cfg.force_noise_std / n.sqrt());
    }

    #[test]
    fn config_violations_are_listed() {
        let mut cfg = white_sphere(0);
        cfg.speed = 0.0;
        cfg.sample_rate = -1.0;
        cfg.depth_fraction = 0.5;
        let v = cfg.violations();
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v[0].contains("m/s"));
        assert!(simulate_indentation(&cfg).is_err());
    }

    #[test]
    fn repeated_palpation_moduli() {
        let cfg = white_sphere(3).noise_free();
        let law = RecoveryParams::bounded(111e3, 40e3, 20.0).unwrap();
        let runs = simulate_repeated_palpation(&cfg, &[1e6, 1e-3], &law).unwrap();
        assert!((runs[0].material.e_f() - 111e3).abs() < 1e-6);
        assert!(runs[1].material.e_f() > runs[0].material.e_f());
        assert_eq!(runs[1].seed, 4);
        assert!(simulate_repeated_palpation(&cfg, &[0.0], &law).is_err());
        let negative = RecoveryParams {
            c1: -500e3,
            c2: -0.1,
            c3: 100e3,
            c4: 0.0,
        };
        assert!(matches!(
            simulate_repeated_palpation(&cfg, &[1.0], &negative),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn no_stiffening_gives_identical_datasets() {
        let cfg = white_sphere(3).noise_free();
        let flat_law = RecoveryParams::bounded(111e3, 0.0, 20.0).unwrap();
        let runs = simulate_repeated_palpation(&cfg, &[1.0, 5.0, 50.0], &flat_law).unwrap();
        assert_eq!(runs[0].records, runs[1].records);
        assert_eq!(runs[1].records, runs[2].records);
    }
}
