//! End-to-end acceptance checks. Each criterion prints exactly one PASS/FAIL
//! line; the process exits non-zero when any of them fails.

use std::f64::consts::PI;
use std::time::Instant;

use mdr_indent::contact::{
    discrete_foundation_force, hess_factor, IndenterProfile, Material, SpringFoundation,
};
use mdr_indent::estimator::{estimate, EstimationResult, FitModel};
use mdr_indent::kinematics::{forward_kinematics, DHChain, DHJoint};
use mdr_indent::recovery::{fit_recovery, RecoveryParams, RecoverySample};
use mdr_indent::simulator::{
    rig_flat_tip, rig_paraboloid_tip, rig_sphere_tip, simulate_indentation,
    simulate_repeated_palpation, ExperimentConfig, Foam, Specimen, FOAMS, RIG_FORCE_NOISE_STD,
    RIG_FORCE_UNCERTAINTY,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Z_SURF: f64 = 0.1;

#[derive(Default)]
struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!(
            "{} [{id}] {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn rig(foam: &Foam, profile: IndenterProfile, seed: u64) -> ExperimentConfig {
    let specimen = Specimen {
        material: Material::from_elastic(foam.e_f, 0.0).unwrap(),
        thickness: foam.thickness,
        z_surf_true: Z_SURF,
    };
    ExperimentConfig::rig(specimen, profile, seed)
}

fn run(cfg: &ExperimentConfig, f_unc: f64) -> EstimationResult {
    let records = simulate_indentation(cfg).unwrap();
    let model = FitModel::new(cfg.profile, cfg.specimen.material.nu()).unwrap();
    estimate(&records, &model, f_unc).unwrap()
}

/// Lanczos (g = 7, 9 terms) Gamma function, independent of the library's.
fn lanczos_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * lanczos_gamma(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + G + 0.5;
    let sum = C[0] + (1..9).map(|i| C[i] / (x + i as f64)).sum::<f64>();
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * sum
}

fn oracle_equivalence(r: &mut Report) {
    let start = Instant::now();
    let material = Material::from_effective(1e5, 0.0).unwrap();
    // Power-law tips sized so the contact is a few millimetres wide at 3 mm.
    let mut tips = vec![
        ("sphere", rig_sphere_tip()),
        ("paraboloid", rig_paraboloid_tip()),
        ("flat", rig_flat_tip()),
    ];
    for n in [1.0, 1.5, 2.0, 3.0] {
        let c_tilde = 3e-3 / 5e-3_f64.powf(n);
        let c_n = c_tilde / hess_factor(n).unwrap();
        tips.push(("power-law", IndenterProfile::power_law(n, c_n).unwrap()));
    }
    let depths: Vec<f64> = (1..=30).map(|i| i as f64 * 1e-4).collect();
    let max_error = |profile: &IndenterProfile, dx: f64| {
        let bed = SpringFoundation::new(dx, 0.02, material).unwrap();
        depths
            .iter()
            .map(|&d| {
                let exact = profile.force(&material, d).unwrap();
                let discrete = discrete_foundation_force(&bed, profile, d).unwrap();
                ((discrete - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut worst = 0.0_f64;
    let mut worst_ratio = 0.0_f64;
    for (name, profile) in &tips {
        let coarse = max_error(profile, 1e-6);
        worst = worst.max(coarse);
        // The flat punch is summed exactly, so there is no discretization error to shrink.
        if *name != "flat" {
            let fine = max_error(profile, 0.5e-6);
            worst_ratio = worst_ratio.max(fine / coarse);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    r.line(
        1,
        "closed form vs discrete spring bed",
        worst <= 1e-3 && worst_ratio <= 0.6 && elapsed < 10.0,
        format!(
            "max rel error {worst:.2e} (<= 1e-3), worst refinement ratio {worst_ratio:.3} (<= 0.6), {elapsed:.2} s (< 10 s) over {} tips",
            tips.len()
        ),
    );
}

fn hess_pinning(r: &mut Report) {
    let k2 = hess_factor(2.0).unwrap();
    let k1 = hess_factor(1.0).unwrap();
    let k1_oracle = PI.sqrt() * lanczos_gamma(1.5) / lanczos_gamma(1.0);
    let e2 = (k2 - 2.0).abs();
    let e1 = (k1 - k1_oracle).abs().max((k1 - PI / 2.0).abs());
    r.line(
        2,
        "Hess factor pinning",
        e2 <= 1e-12 && e1 <= 1e-10,
        format!("|kappa(2) - 2| = {e2:.1e} (<= 1e-12), |kappa(1) - pi/2| = {e1:.1e} (<= 1e-10)"),
    );
}

fn noise_free_round_trip(r: &mut Report) {
    let mut worst_e = 0.0_f64;
    let mut worst_z = 0.0_f64;
    for foam in &FOAMS {
        for tip in [rig_sphere_tip(), rig_paraboloid_tip()] {
            let cfg = rig(foam, tip, 0).noise_free();
            let res = run(&cfg, RIG_FORCE_UNCERTAINTY);
            worst_e = worst_e.max(((res.e_f - foam.e_f) / foam.e_f).abs());
            worst_z = worst_z.max((res.z_surf - Z_SURF).abs());
        }
    }
    r.line(
        3,
        "noise-free round trip, 3 foams x {sphere, paraboloid}",
        worst_e <= 5e-3 && worst_z <= 10e-6,
        format!(
            "max |E error| {:.4}% (<= 0.5%), max |z_surf error| {:.2} um (<= 10 um)",
            worst_e * 100.0,
            worst_z * 1e6
        ),
    );
}

struct NoisyRun {
    foam: usize,
    tip: usize,
    z_err: f64,
    e_rel_err: f64,
    e_f: f64,
    sigma_e: f64,
}

/// 100 seeds for each of the sphere and paraboloid tips, cycling through the foams.
fn noisy_runs() -> (Vec<NoisyRun>, f64) {
    let start = Instant::now();
    let mut runs = Vec::new();
    for seed in 0..100u64 {
        let foam = (seed % 3) as usize;
        for (tip, profile) in [rig_sphere_tip(), rig_paraboloid_tip()]
            .into_iter()
            .enumerate()
        {
            let f = &FOAMS[foam];
            let res = run(&rig(f, profile, seed), RIG_FORCE_UNCERTAINTY);
            runs.push(NoisyRun {
                foam,
                tip,
                z_err: (res.z_surf - Z_SURF).abs(),
                e_rel_err: ((res.e_f - f.e_f) / f.e_f).abs(),
                e_f: res.e_f,
                sigma_e: res.sigma_e,
            });
        }
    }
    (runs, start.elapsed().as_secs_f64())
}

fn noisy_round_trip(r: &mut Report, runs: &[NoisyRun], elapsed: f64) {
    let z_med = median(runs.iter().map(|x| x.z_err).collect());
    let e_med = median(runs.iter().map(|x| x.e_rel_err).collect());
    let mut flat_worst = 0.0_f64;
    for foam in &FOAMS {
        let cfg = rig(foam, rig_flat_tip(), 0).noise_free();
        let res = run(&cfg, RIG_FORCE_UNCERTAINTY);
        assert_eq!(res.discard_fraction, 0.2);
        flat_worst = flat_worst.max(((res.e_f - foam.e_f) / foam.e_f).abs());
    }
    r.line(
        4,
        "noisy round trip at rig parameters",
        z_med <= 0.5e-3 && e_med <= 0.10 && elapsed < 60.0 && flat_worst <= 0.01,
        format!(
            "{} runs: median |z_surf error| {:.3} mm (<= 0.5 mm), median |E error| {:.3}% (<= 10%), {elapsed:.1} s (< 60 s); flat noise-free max |E error| {:.4}% (<= 1%)",
            runs.len(),
            z_med * 1e3,
            e_med * 100.0,
            flat_worst * 100.0
        ),
    );
}

fn residual_matches_noise(r: &mut Report) {
    let target = RIG_FORCE_NOISE_STD * RIG_FORCE_NOISE_STD;
    let mut worst = 0.0_f64;
    for seed in 0..100u64 {
        let foam = &FOAMS[(seed % 3) as usize];
        let mut cfg = rig(foam, rig_sphere_tip(), 1000 + seed);
        cfg.position_noise_std = 0.0;
        let res = run(&cfg, RIG_FORCE_UNCERTAINTY);
        worst = worst.max((res.residual_n2 / target - 1.0).abs());
    }
    r.line(
        5,
        "post-fit residual equals injected force variance",
        worst <= 0.2,
        format!("max |residual / sigma_F^2 - 1| over 100 seeds {worst:.3} (<= 0.2)"),
    );
}

fn recovery_round_trip(r: &mut Report) {
    let truth = RecoveryParams::bounded(194e3, 60e3, 20.0).unwrap();
    let rests = [2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0];
    let mut worst = 0.0_f64;
    let mut monotone = true;
    for seed in 0..20u64 {
        let cfg = rig(&FOAMS[2], rig_sphere_tip(), 500 + 10 * seed);
        let model = FitModel::new(cfg.profile, 0.0).unwrap();
        let samples: Vec<RecoverySample> = simulate_repeated_palpation(&cfg, &rests, &truth)
            .unwrap()
            .iter()
            .map(|p| {
                let res = estimate(&p.records, &model, RIG_FORCE_UNCERTAINTY).unwrap();
                RecoverySample {
                    t: p.rest,
                    e: res.e_f,
                    sigma: Some(res.sigma_e),
                }
            })
            .collect();
        let fit = fit_recovery(&samples).unwrap().params;
        for &t in &rests {
            worst = worst.max(((fit.eval(t) - truth.eval(t)) / truth.eval(t)).abs());
        }
        monotone &= rests.windows(2).all(|w| fit.eval(w[0]) > fit.eval(w[1]));
    }
    r.line(
        6,
        "recovery law round trip",
        worst <= 0.02 && monotone,
        format!(
            "max |fit / truth - 1| over 20 seeds {:.3}% (<= 2%), shorter rest gives larger E: {monotone}",
            worst * 100.0
        ),
    );
}

type M4 = [[f64; 4]; 4];

fn dh_matrix(a: f64, alpha: f64, d: f64, theta: f64) -> M4 {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    [
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn mat_mul(x: &M4, y: &M4) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

fn kinematics(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_ortho = 0.0_f64;
    for _ in 0..20 {
        let joints: Vec<DHJoint> = (0..100)
            .map(|_| {
                DHJoint::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-PI..PI),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-PI..PI),
                )
                .unwrap()
            })
            .collect();
        let chain = DHChain::new(joints).unwrap();
        let q: Vec<f64> = (0..100).map(|_| rng.random_range(-PI..PI)).collect();
        let pose = forward_kinematics(&chain, &q).unwrap();
        worst_ortho = worst_ortho.max(pose.orthonormality_error());
    }

    // Published UR3e parameters: (a, alpha, d).
    let ur3e = [
        (0.0, PI / 2.0, 0.15185),
        (-0.24355, 0.0, 0.0),
        (-0.2132, 0.0, 0.0),
        (0.0, PI / 2.0, 0.13105),
        (0.0, -PI / 2.0, 0.08535),
        (0.0, 0.0, 0.0921),
    ];
    let mut t: M4 = dh_matrix(0.0, 0.0, 0.0, 0.0);
    for &(a, alpha, d) in &ur3e {
        t = mat_mul(&t, &dh_matrix(a, alpha, d, 0.0));
    }
    let chain = DHChain::ur3e();
    let pose = forward_kinematics(&chain, &vec![0.0; chain.len()]).unwrap();
    let z_err = (pose.z() - t[2][3]).abs();
    r.line(
        7,
        "forward kinematics",
        worst_ortho <= 1e-7 && z_err <= 1e-9,
        format!(
            "orthonormality drift over 100-joint chains {worst_ortho:.1e} (<= 1e-7), UR3e home z {:.6} m vs oracle error {z_err:.1e} m (<= 1e-9)",
            pose.z()
        ),
    );
}

fn sigma_calibration(r: &mut Report, runs: &[NoisyRun]) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for foam in 0..FOAMS.len() {
        for tip in 0..2 {
            let group: Vec<&NoisyRun> = runs
                .iter()
                .filter(|x| x.foam == foam && x.tip == tip)
                .collect();
            let es: Vec<f64> = group.iter().map(|x| x.e_f).collect();
            let predicted = group.iter().map(|x| x.sigma_e).sum::<f64>() / group.len() as f64;
            let ratio = predicted / std_dev(&es);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    r.line(
        8,
        "reported sigma_E vs Monte Carlo spread",
        lo >= 0.5 && hi <= 2.0,
        format!(
            "sigma_E / empirical std over 3 foams x 2 tips in [{lo:.2}, {hi:.2}] (within [0.5, 2])"
        ),
    );
}

fn main() {
    let mut r = Report::default();
    oracle_equivalence(&mut r);
    hess_pinning(&mut r);
    noise_free_round_trip(&mut r);
    let (runs, elapsed) = noisy_runs();
    noisy_round_trip(&mut r, &runs, elapsed);
    residual_matches_noise(&mut r);
    recovery_round_trip(&mut r);
    kinematics(&mut r);
    sigma_calibration(&mut r, &runs);
    println!("{} passed, {} failed", r.passed, r.failed);
    if r.failed > 0 {
        std::process::exit(1);
    }
}
