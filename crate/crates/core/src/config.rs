//! Run configuration: a key-value file plus command-line overrides, resolved
//! into validated simulation and estimation plans.
//!
//! Recognised keys (units in brackets):
//!
//! | key | meaning |
//! |-----|---------|
//! | `label` | run name used for output files |
//! | `specimen` | free-form name; `white`, `pink`, `grey` also preset `e_f` and `thickness` |
//! | `e_f` | elastic modulus [Pa] |
//! | `nu` | Poisson ratio [-], default 0 |
//! | `thickness` | specimen thickness [m] |
//! | `z_surf` | true surface height [m], default 0.1 |
//! | `tip` | `sphere`, `paraboloid`, `flat` or `power-law` |
//! | `tip_radius` | sphere R₁, paraboloid R or flat half-width a [m] |
//! | `tip_exponent`, `tip_coefficient` | power-law n [-] and c_n [m^(1-n)] |
//! | `speed` | cross-head speed [m/s] |
//! | `depth_fraction` | maximum penetration / thickness [-], default 0.1 |
//! | `sample_rate` | [Hz], default 800 |
//! | `force_noise_std` | [N], default 0.012 |
//! | `position_noise_std` | [m], default 1e-5 |
//! | `approach_gap` | [m], default 0.005 |
//! | `seed` | PRNG seed, default 0 |
//! | `f_unc` | force-sensor uncertainty band [N], default 0.048 |
//! | `discard_fraction` | [-], default 0.2 for flat tips, 0 otherwise |
//! | `rest_intervals` | comma-separated rest times [s] for repeated palpation |
//! | `recovery_c1` … `recovery_c4` | recovery law amplitudes [Pa] and rates [1/s] |
//! | `e_true`, `rest_s` | ground truth carried from simulation manifests |

use std::path::Path;

use crate::contact::{IndenterProfile, Material};
use crate::error::{Error, Result};
use crate::estimator::FitModel;
use crate::io::{read_manifest, Manifest};
use crate::recovery::RecoveryParams;
use crate::simulator::{
    ExperimentConfig, Foam, Specimen, APPROACH_GAP, RIG_CONTROLLER_GAINS, RIG_DEPTH_FRACTION,
    RIG_FORCE_NOISE_STD, RIG_FORCE_UNCERTAINTY, RIG_POSITION_NOISE_STD, RIG_SAMPLE_RATE,
};

const DEFAULT_Z_SURF: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    manifest: Manifest,
}

/// Collects every violation instead of stopping at the first one.
struct Fields<'a> {
    m: &'a Manifest,
    errors: Vec<String>,
}

impl<'a> Fields<'a> {
    fn new(m: &'a Manifest) -> Self {
        Self {
            m,
            errors: Vec::new(),
        }
    }

    fn parse_f64(&mut self, key: &str, unit: &str) -> Option<f64> {
        let raw = self.m.get(key)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.errors
                    .push(format!("`{key}` must be a number in {unit}, got `{raw}`"));
                None
            }
        }
    }

    fn required(&mut self, key: &str, unit: &str, what: &str) -> Option<f64> {
        if !self.m.contains(key) {
            self.errors
                .push(format!("missing `{key}` ({what} in {unit})"));
            return None;
        }
        self.parse_f64(key, unit)
    }

    fn or(&mut self, key: &str, default: f64, unit: &str) -> f64 {
        if self.m.contains(key) {
            self.parse_f64(key, unit).unwrap_or(default)
        } else {
            default
        }
    }

    fn optional(&mut self, key: &str, unit: &str) -> Option<f64> {
        self.parse_f64(key, unit)
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.errors.push(msg());
        }
    }
}

/// Which tip a run uses, with the name it is reported under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tip {
    pub name: &'static str,
    pub profile: IndenterProfile,
    /// Radius or half-width as configured, for the non-generic tips (m).
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub label: String,
    pub specimen: String,
    pub tip: Tip,
    pub experiment: ExperimentConfig,
    pub f_unc: f64,
    /// Rest intervals and recovery law for a repeated-palpation run.
    pub palpation: Option<(Vec<f64>, RecoveryParams)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationPlan {
    pub label: String,
    pub specimen: String,
    pub tip: Tip,
    pub model: FitModel,
    pub f_unc: f64,
    pub e_true: Option<f64>,
    pub rest_s: Option<f64>,
}

impl RunConfig {
    pub fn from_manifest(manifest: Manifest) -> Self {
        Self { manifest }
    }

    /// Reads an optional config file and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut manifest = match path {
            Some(p) => read_manifest(p)?,
            None => Manifest::new(),
        };
        manifest.merge(&parse_overrides(overrides)?);
        Ok(Self { manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn overlay(&mut self, other: &Manifest) {
        self.manifest.merge(other);
    }

    fn label(&self) -> String {
        self.manifest.get("label").unwrap_or("run").to_string()
    }

    fn specimen_name(&self) -> String {
        self.manifest.get("specimen").unwrap_or("").to_string()
    }

    fn tip(&self, f: &mut Fields) -> Option<Tip> {
        let Some(kind) = self.manifest.get("tip") else {
            f.errors
                .push("missing `tip` (one of sphere, paraboloid, flat, power-law)".into());
            return None;
        };
        let (name, default_radius) = match kind.to_ascii_lowercase().as_str() {
            "sphere" => ("sphere", Some(0.01)),
            "paraboloid" => ("paraboloid", Some(0.0117)),
            "flat" => ("flat", Some(0.01)),
            "power-law" | "power_law" => ("power-law", None),
            other => {
                f.errors.push(format!(
                    "`tip` must be sphere, paraboloid, flat or power-law, got `{other}`"
                ));
                return None;
            }
        };
        if let Some(default) = default_radius {
            let r = f.or("tip_radius", default, "m");
            f.check(r > 0.0, || format!("`tip_radius` must be > 0 m, got {r}"));
            let profile = match name {
                "sphere" => IndenterProfile::sphere(r),
                "paraboloid" => IndenterProfile::paraboloid(r),
                _ => IndenterProfile::flat(r),
            }
            .ok()?;
            return Some(Tip {
                name,
                profile,
                radius: Some(r),
            });
        }
        let profile = {
            let n = f.required(
                "tip_exponent",
                "dimensionless units",
                "power-law exponent n",
            );
            let c = f.required("tip_coefficient", "m^(1-n)", "power-law coefficient c_n");
            let (n, c) = (n?, c?);
            match IndenterProfile::power_law(n, c) {
                Ok(p) => p,
                Err(e) => {
                    f.errors.push(format!("power-law tip: {e}"));
                    return None;
                }
            }
        };
        Some(Tip {
            name,
            profile,
            radius: None,
        })
    }

    fn f_unc(&self, f: &mut Fields) -> f64 {
        let v = f.or("f_unc", RIG_FORCE_UNCERTAINTY, "N");
        f.check(v > 0.0, || format!("`f_unc` must be > 0 N, got {v}"));
        v
    }

    /// Validated simulation plan, or every violation found.
    pub fn simulation(&self) -> std::result::Result<SimulationPlan, Vec<String>> {
        let mut f = Fields::new(&self.manifest);
        let specimen = self.specimen_name();
        let preset = Foam::by_name(&specimen);

        let e_f = match preset {
            Some(p) if !self.manifest.contains("e_f") => Some(p.e_f),
            _ => f.required("e_f", "Pa", "elastic modulus"),
        };
        let thickness = match preset {
            Some(p) if !self.manifest.contains("thickness") => Some(p.thickness),
            _ => f.required("thickness", "m", "specimen thickness"),
        };
        let nu = f.or("nu", 0.0, "dimensionless units");
        let z_surf = f.or("z_surf", DEFAULT_Z_SURF, "m");
        let tip = self.tip(&mut f);
        let speed = f.required("speed", "m/s", "cross-head speed");
        let depth_fraction = f.or(
            "depth_fraction",
            RIG_DEPTH_FRACTION,
            "fraction of thickness",
        );
        let sample_rate = f.or("sample_rate", RIG_SAMPLE_RATE, "Hz");
        let force_noise_std = f.or("force_noise_std", RIG_FORCE_NOISE_STD, "N");
        let position_noise_std = f.or("position_noise_std", RIG_POSITION_NOISE_STD, "m");
        let approach_gap = f.or("approach_gap", APPROACH_GAP, "m");
        let f_unc = self.f_unc(&mut f);
        let seed = match self.manifest.get("seed") {
            None => 0,
            Some(raw) => raw.parse::<u64>().unwrap_or_else(|_| {
                f.errors.push(format!(
                    "`seed` must be a non-negative integer, got `{raw}`"
                ));
                0
            }),
        };

        let material = match e_f {
            Some(e) => match Material::from_elastic(e, nu) {
                Ok(m) => Some(m),
                Err(_) => {
                    f.errors.push(format!(
                        "`e_f` must be > 0 Pa and `nu` in [0, 0.5), got e_f = {e} Pa, nu = {nu}"
                    ));
                    None
                }
            },
            None => None,
        };

        let palpation = self.palpation(&mut f);

        let (Some(material), Some(thickness), Some(tip), Some(speed)) =
            (material, thickness, tip, speed)
        else {
            return Err(f.errors);
        };
        let experiment = ExperimentConfig {
            specimen: Specimen {
                material,
                thickness,
                z_surf_true: z_surf,
            },
            profile: tip.profile,
            speed,
            depth_fraction,
            sample_rate,
            force_noise_std,
            position_noise_std,
            approach_gap,
            seed,
        };
        f.errors.extend(experiment.violations());
        if !f.errors.is_empty() {
            return Err(f.errors);
        }
        Ok(SimulationPlan {
            label: self.label(),
            specimen,
            tip,
            experiment,
            f_unc,
            palpation,
        })
    }

    fn palpation(&self, f: &mut Fields) -> Option<(Vec<f64>, RecoveryParams)> {
        let raw = self.manifest.get("rest_intervals")?;
        let mut rests = Vec::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse::<f64>() {
                Ok(v) if v > 0.0 => rests.push(v),
                _ => f.errors.push(format!(
                    "`rest_intervals` entries must be > 0 s, got `{item}`"
                )),
            }
        }
        let c1 = f.required("recovery_c1", "Pa", "recovery amplitude c1");
        let c2 = f.required("recovery_c2", "1/s", "recovery rate c2");
        let c3 = f.required("recovery_c3", "Pa", "recovery amplitude c3");
        let c4 = f.or("recovery_c4", 0.0, "1/s");
        Some((
            rests,
            RecoveryParams {
                c1: c1?,
                c2: c2?,
                c3: c3?,
                c4,
            },
        ))
    }

    /// Validated estimation plan, or every violation found.
    pub fn estimation(&self) -> std::result::Result<EstimationPlan, Vec<String>> {
        let mut f = Fields::new(&self.manifest);
        let tip = self.tip(&mut f);
        let nu = f.or("nu", 0.0, "dimensionless units");
        f.check((0.0..0.5).contains(&nu), || {
            format!("`nu` must lie in [0, 0.5), got {nu}")
        });
        let f_unc = self.f_unc(&mut f);
        let discard = f.optional("discard_fraction", "fraction of max penetration");
        let e_true = f
            .optional("e_true", "Pa")
            .or_else(|| Foam::by_name(&self.specimen_name()).map(|p| p.e_f));
        let rest_s = f.optional("rest_s", "s");
        let Some(tip) = tip else {
            return Err(f.errors);
        };
        let model = match discard {
            Some(df) => FitModel::with_discard_fraction(tip.profile, nu, df),
            None => FitModel::new(tip.profile, nu),
        };
        let model = match model {
            Ok(m) => Some(m),
            Err(e) => {
                f.errors.push(e.to_string());
                None
            }
        };
        if !f.errors.is_empty() {
            return Err(f.errors);
        }
        Ok(EstimationPlan {
            label: self.label(),
            specimen: self.specimen_name(),
            tip,
            model: model.expect("checked above"),
            f_unc,
            e_true,
            rest_s,
        })
    }
}

impl SimulationPlan {
    /// Manifest describing the run: the input keys plus every resolved value.
    pub fn manifest(&self, input: &Manifest) -> Manifest {
        let mut m = input.clone();
        let x = &self.experiment;
        m.set("label", self.label.clone());
        if !self.specimen.is_empty() {
            m.set("specimen", self.specimen.clone());
        }
        m.set_f64("e_f", x.specimen.material.e_f());
        m.set_f64("nu", x.specimen.material.nu());
        m.set_f64("thickness", x.specimen.thickness);
        m.set_f64("z_surf", x.specimen.z_surf_true);
        m.set("tip", self.tip.name);
        match (self.tip.radius, x.profile) {
            (Some(r), _) => m.set_f64("tip_radius", r),
            (None, IndenterProfile::PowerLaw(p)) => {
                m.set_f64("tip_exponent", p.n());
                m.set_f64("tip_coefficient", p.c_n());
            }
            (None, IndenterProfile::Flat { a }) => m.set_f64("tip_radius", a),
        }
        m.set_f64("speed", x.speed);
        m.set_f64("depth_fraction", x.depth_fraction);
        m.set_f64("sample_rate", x.sample_rate);
        m.set_f64("force_noise_std", x.force_noise_std);
        m.set_f64("position_noise_std", x.position_noise_std);
        m.set_f64("approach_gap", x.approach_gap);
        m.set("seed", x.seed.to_string());
        m.set_f64("f_unc", self.f_unc);
        m.set_f64("controller_p", RIG_CONTROLLER_GAINS.0);
        m.set_f64("controller_d", RIG_CONTROLLER_GAINS.1);
        m.set_f64("e_true", x.specimen.material.e_f());
        m.set_f64("max_depth", x.max_depth());
        m.set("samples", x.sample_count().to_string());
        m
    }
}

/// Parses `key=value` overrides.
pub fn parse_overrides(items: &[String]) -> Result<Manifest> {
    let mut m = Manifest::new();
    for item in items {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            Error::invalid(format!("override `{item}` is not of the form key=value"))
        })?;
        m.set(k.trim(), v.trim());
    }
    Ok(m)
}
