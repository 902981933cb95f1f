//! Two-exponential recovery law `E(t) = c₁ e^{c₂ t} + c₃ e^{c₄ t}` relating the
//! measured elasticity to the rest time between palpations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryParams {
    /// Amplitude of the first term (Pa).
    pub c1: f64,
    /// Rate of the first term (1/s).
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

fn exp_term(amplitude: f64, rate: f64, t: f64) -> f64 {
    // 0·∞ would poison constant terms evaluated at an infinite rest time.
    if rate == 0.0 {
        amplitude
    } else {
        amplitude * (rate * t).exp()
    }
}

impl RecoveryParams {
    /// Bounded form `E∞ + A e^{-t/τ}` used to drive simulations.
    pub fn bounded(e_inf: f64, amplitude: f64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::domain(format!(
                "recovery time constant must be > 0 s, got {tau}"
            )));
        }
        Ok(Self {
            c1: amplitude,
            c2: -1.0 / tau,
            c3: e_inf,
            c4: 0.0,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        exp_term(self.c1, self.c2, t) + exp_term(self.c3, self.c4, t)
    }

    /// `∂E/∂(c₁, c₂, c₃, c₄)` at time `t`.
    pub fn gradient(&self, t: f64) -> [f64; 4] {
        let e2 = (self.c2 * t).exp();
        let e4 = (self.c4 * t).exp();
        [e2, self.c1 * t * e2, e4, self.c3 * t * e4]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.c1, self.c2, self.c3, self.c4]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        Self {
            c1: p[0],
            c2: p[1],
            c3: p[2],
            c4: p[3],
        }
    }

    /// Smallest value of `E` on `[t0, t1]`, sampled densely.
    pub fn min_over(&self, t0: f64, t1: f64) -> f64 {
        const STEPS: usize = 400;
        (0..=STEPS)
            .map(|i| self.eval(t0 + (t1 - t0) * i as f64 / STEPS as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `E(t)` from the recovery law; `t` is the rest time in seconds.
pub fn eval_recovery(params: &RecoveryParams, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::domain(format!("rest time must be >= 0 s, got {t}")));
    }
    Ok(params.eval(t))
}

/// One measured elasticity at a given rest time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySample {
    pub t: f64,
    pub e: f64,
    /// Standard uncertainty of `e`; `None` means unit weight.
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartDiagnostic {
    pub start: [f64; 4],
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryFit {
    pub params: RecoveryParams,
    /// Weighted sum of squared residuals.
    pub loss: f64,
    pub starts: Vec<StartDiagnostic>,
}

/// Minimal damped Gauss–Newton (Levenberg–Marquardt with Marquardt scaling).
///
/// `model(p, x)` returns the value and gradient at one abscissa.
struct Lm<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
    ws: &'a [f64],
}

impl Lm<'_> {
    fn residuals<F>(&self, p: &DVector<f64>, model: &F) -> (DVector<f64>, DMatrix<f64>)
    where
        F: Fn(&DVector<f64>, f64) -> (f64, Vec<f64>),
    {
        let m = self.xs.len();
        let mut r = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, p.len());
        for i in 0..m {
            let (v, g) = model(p, self.xs[i]);
            r[i] = self.ws[i] * (v - self.ys[i]);
            for (k, gk) in g.iter().enumerate() {
                jac[(i, k)] = self.ws[i] * gk;
            }
        }
        (r, jac)
    }

    fn minimize<F>(
        &self,
        start: DVector<f64>,
        model: F,
    ) -> std::result::Result<(DVector<f64>, f64), String>
    where
        F: Fn(&DVector<f64>, f64) -> (f64, Vec<f64>),
    {
        let mut p = start;
        let (mut r, mut jac) = self.residuals(&p, &model);
        let mut loss = r.norm_squared();
        if !loss.is_finite() {
            return Err("non-finite loss at start".into());
        }
        let mut lambda = 1e-3;
        for _ in 0..500 {
            if loss == 0.0 {
                break;
            }
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * &r;
            let mut damped = jtj.clone();
            for k in 0..p.len() {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => match damped.lu().solve(&(-&grad)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        if lambda > 1e16 {
                            break;
                        }
                        continue;
                    }
                },
            };
            let trial = &p + &step;
            let (tr, tj) = self.residuals(&trial, &model);
            let trial_loss = tr.norm_squared();
            if trial_loss.is_finite() && trial_loss < loss {
                let improvement = (loss - trial_loss) / loss;
                p = trial;
                r = tr;
                jac = tj;
                loss = trial_loss;
                lambda = (lambda / 10.0).max(1e-12);
                if improvement < 1e-15 || step.norm() <= 1e-14 * (p.norm() + 1e-14) {
                    break;
                }
            } else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break;
                }
            }
        }
        if !loss.is_finite() || p.iter().any(|v| !v.is_finite()) {
            return Err("diverged".into());
        }
        Ok((p, loss))
    }
}

/// Weighted linear least squares for the amplitudes of fixed exponential rates.
fn linear_amplitudes(xs: &[f64], ys: &[f64], ws: &[f64], rates: &[f64]) -> Option<Vec<f64>> {
    let m = xs.len();
    let k = rates.len();
    let a = DMatrix::from_fn(m, k, |i, j| ws[i] * exp_term(1.0, rates[j], xs[i]));
    let b = DVector::from_fn(m, |i, _| ws[i] * ys[i]);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-12).ok()?;
    sol.iter()
        .all(|v| v.is_finite())
        .then(|| sol.iter().copied().collect())
}

fn two_exp_model(p: &DVector<f64>, t: f64) -> (f64, Vec<f64>) {
    let params = RecoveryParams::from_array([p[0], p[1], p[2], p[3]]);
    (params.eval(t), params.gradient(t).to_vec())
}

fn one_exp_model(p: &DVector<f64>, t: f64) -> (f64, Vec<f64>) {
    let e = (p[1] * t).exp();
    (p[0] * e, vec![e, p[0] * t * e])
}

struct Scaled {
    t_scale: f64,
    y_scale: f64,
    ts: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
}

fn prepare(samples: &[RecoverySample]) -> Result<Scaled> {
    const NEEDED: usize = 4;
    if samples.len() < NEEDED {
        return Err(Error::InsufficientData {
            needed: NEEDED,
            got: samples.len(),
        });
    }
    let mut ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    if ts.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::invalid("rest times must be finite and >= 0 s"));
    }
    let mut sorted = ts.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("rest times must be distinct"));
    }
    for s in samples {
        if !s.e.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite elasticity at t = {} s",
                s.t
            )));
        }
        if let Some(sig) = s.sigma {
            if !(sig.is_finite() && sig > 0.0) {
                return Err(Error::invalid(format!(
                    "uncertainty must be > 0 Pa, got {sig} at t = {} s",
                    s.t
                )));
            }
        }
    }
    let t_scale = sorted.last().copied().unwrap().max(f64::MIN_POSITIVE);
    let y_scale = samples
        .iter()
        .map(|s| s.e.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    // Mixed weighting (some σ missing) falls back to unit weights for all.
    let weighted = samples.iter().all(|s| s.sigma.is_some());
    let ws_raw: Vec<f64> = samples
        .iter()
        .map(|s| {
            if weighted {
                1.0 / s.sigma.unwrap()
            } else {
                1.0
            }
        })
        .collect();
    for t in &mut ts {
        *t /= t_scale;
    }
    let ys = samples.iter().map(|s| s.e / y_scale).collect();
    let ws = ws_raw.iter().map(|w| w * y_scale).collect();
    Ok(Scaled {
        t_scale,
        y_scale,
        ts,
        ys,
        ws,
    })
}

fn unscale(p: &DVector<f64>, sc: &Scaled) -> RecoveryParams {
    RecoveryParams {
        c1: p[0] * sc.y_scale,
        c2: p[1] / sc.t_scale,
        c3: p[2] * sc.y_scale,
        c4: p[3] / sc.t_scale,
    }
}

/// Best single-exponential fit `c₁ e^{c₂ t}` returned as recovery params with `c₃ = 0`.
pub fn fit_single_exponential(samples: &[RecoverySample]) -> Result<RecoveryFit> {
    let sc = prepare(samples)?;
    let lm = Lm {
        xs: &sc.ts,
        ys: &sc.ys,
        ws: &sc.ws,
    };
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut starts = Vec::new();
    for rate in [0.0, -0.3, -1.0, -3.0, -10.0, 1.0] {
        let Some(amp) = linear_amplitudes(&sc.ts, &sc.ys, &sc.ws, &[rate]) else {
            continue;
        };
        let start = DVector::from_vec(vec![amp[0], rate]);
        let outcome = lm.minimize(start.clone(), one_exp_model);
        if let Ok((p, loss)) = &outcome {
            if best.as_ref().is_none_or(|(_, l)| loss < l) {
                best = Some((p.clone(), *loss));
            }
        }
        starts.push(StartDiagnostic {
            start: [amp[0] * sc.y_scale, rate / sc.t_scale, 0.0, 0.0],
            outcome: outcome.map(|(_, l)| l),
        });
    }
    let (p, loss) =
        best.ok_or_else(|| Error::FitFailed("no single-exponential start converged".into()))?;
    let full = DVector::from_vec(vec![p[0], p[1], 0.0, 0.0]);
    Ok(RecoveryFit {
        params: unscale(&full, &sc),
        loss,
        starts,
    })
}

/// Rate pairs (in units of 1/t_max) for the deterministic multi-start.
const RATE_STARTS: [(f64, f64); 7] = [
    (-1.0, 0.0),
    (-5.0, 0.0),
    (-20.0, 0.0),
    (-0.3, -3.0),
    (-1.0, -10.0),
    (-3.0, -30.0),
    (0.5, -5.0),
];

/// Weighted two-exponential fit with eight deterministic starts.
///
/// Seven starts come from a grid of rate pairs with amplitudes solved
/// linearly; the eighth extends the best single-exponential fit, so the
/// result can never be worse than that nested model. The lowest-loss fit
/// with `E(t) > 0` over the sample span wins (earlier start on ties).
pub fn fit_recovery(samples: &[RecoverySample]) -> Result<RecoveryFit> {
    let sc = prepare(samples)?;
    let lm = Lm {
        xs: &sc.ts,
        ys: &sc.ys,
        ws: &sc.ws,
    };
    let mut starts: Vec<DVector<f64>> = RATE_STARTS
        .iter()
        .filter_map(|&(r2, r4)| {
            linear_amplitudes(&sc.ts, &sc.ys, &sc.ws, &[r2, r4])
                .map(|a| DVector::from_vec(vec![a[0], r2, a[1], r4]))
        })
        .collect();
    if let Ok(single) = fit_single_exponential(samples) {
        let p = single.params;
        starts.push(DVector::from_vec(vec![
            p.c1 / sc.y_scale,
            p.c2 * sc.t_scale,
            0.0,
            -1.0,
        ]));
    }

    let t_lo = samples.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
    let t_hi = samples
        .iter()
        .map(|s| s.t)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut diagnostics = Vec::with_capacity(starts.len());
    let mut best: Option<(RecoveryParams, f64)> = None;
    for start in starts {
        let start_params = unscale(&start, &sc);
        let outcome = lm.minimize(start, two_exp_model).and_then(|(p, loss)| {
            let params = unscale(&p, &sc);
            let floor = params.min_over(t_lo, t_hi);
            if floor > 0.0 && samples.iter().all(|s| params.eval(s.t) > 0.0) {
                Ok((params, loss))
            } else {
                Err(format!(
                    "fitted curve not positive over span (min {floor:.3e} Pa)"
                ))
            }
        });
        if let Ok((params, loss)) = &outcome {
            if best.as_ref().is_none_or(|(_, l)| loss < l) {
                best = Some((*params, *loss));
            }
        }
        diagnostics.push(StartDiagnostic {
            start: start_params.as_array(),
            outcome: outcome.map(|(_, l)| l),
        });
    }
    match best {
        Some((params, loss)) => Ok(RecoveryFit {
            params,
            loss,
            starts: diagnostics,
        }),
        None => {
            let detail = diagnostics
                .iter()
                .enumerate()
                .map(|(i, d)| format!("start {i}: {:?}", d.outcome))
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::FitFailed(format!("every start failed: {detail}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples_from(p: &RecoveryParams, ts: &[f64]) -> Vec<RecoverySample> {
        ts.iter()
            .map(|&t| RecoverySample {
                t,
                e: p.eval(t),
                sigma: None,
            })
            .collect()
    }

    #[test]
    fn eval_examples() {
        let constant = RecoveryParams {
            c1: 0.0,
            c2: -3.0,
            c3: 100e3,
            c4: 0.0,
        };
        assert_eq!(eval_recovery(&constant, 17.0).unwrap(), 100e3);
        let p = RecoveryParams {
            c1: 50e3,
            c2: -1.0,
            c3: 100e3,
            c4: 0.0,
        };
        assert_eq!(eval_recovery(&p, 0.0).unwrap(), 150e3);
        assert!(eval_recovery(&p, -1.0).is_err());
        assert_eq!(p.eval(f64::INFINITY), 100e3);
        assert!((p.eval(1e6) - 100e3).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = RecoveryParams {
            c1: 3.0e4,
            c2: -0.05,
            c3: 1.1e5,
            c4: -0.002,
        };
        let t = 12.5;
        let g = p.gradient(t);
        let base = p.as_array();
        for k in 0..4 {
            let h = 1e-6 * base[k].abs().max(1e-3);
            let mut up = base;
            let mut dn = base;
            up[k] += h;
            dn[k] -= h;
            let fd = (RecoveryParams::from_array(up).eval(t)
                - RecoveryParams::from_array(dn).eval(t))
                / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1e-9),
                "k={k}: {fd} vs {}",
                g[k]
            );
        }
    }

    #[test]
    fn exact_round_trip_reproduces_curve() {
        let truth = RecoveryParams::bounded(111e3, 40e3, 30.0).unwrap();
        let ts = [2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0];
        let fit = fit_recovery(&samples_from(&truth, &ts)).unwrap();
        for &t in &ts {
            let rel = (fit.params.eval(t) - truth.eval(t)).abs() / truth.eval(t);
            assert!(rel < 1e-3, "t={t}: rel {rel}");
        }
    }

    #[test]
    fn full_two_exponential_round_trip() {
        let truth = RecoveryParams {
            c1: 60e3,
            c2: -0.2,
            c3: 120e3,
            c4: -0.004,
        };
        let ts: Vec<f64> = (0..12).map(|i| 1.0 + 20.0 * i as f64).collect();
        let fit = fit_recovery(&samples_from(&truth, &ts)).unwrap();
        for &t in &ts {
            let rel = (fit.params.eval(t) - truth.eval(t)).abs() / truth.eval(t);
            assert!(rel < 1e-3, "t={t}: rel {rel}");
        }
    }

    #[test]
    fn constant_data_fits_exactly() {
        let samples: Vec<_> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&t| RecoverySample {
                t,
                e: 100e3,
                sigma: None,
            })
            .collect();
        let fit = fit_recovery(&samples).unwrap();
        assert!(fit.loss < 1e-20);
        for t in [1.0, 3.0, 8.0] {
            assert!((fit.params.eval(t) - 100e3).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_short_or_duplicate_input() {
        let s = |t| RecoverySample {
            t,
            e: 1.0,
            sigma: None,
        };
        assert!(matches!(
            fit_recovery(&[s(1.0), s(2.0)]),
            Err(Error::InsufficientData { needed: 4, got: 2 })
        ));
        assert!(matches!(
            fit_recovery(&[s(1.0), s(2.0), s(2.0), s(3.0)]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn never_worse_than_single_exponential() {
        let ts = [1.0, 3.0, 6.0, 9.0, 15.0, 30.0];
        let ys = [150e3, 139e3, 128e3, 122e3, 115e3, 112e3];
        let samples: Vec<_> = ts
            .iter()
            .zip(ys)
            .map(|(&t, e)| RecoverySample {
                t,
                e,
                sigma: Some(2e3),
            })
            .collect();
        let two = fit_recovery(&samples).unwrap();
        let one = fit_single_exponential(&samples).unwrap();
        assert!(two.loss <= one.loss * (1.0 + 1e-12));
    }
}
