//! Finite-difference verification of every analytic gradient in the crate.
//!
//! Three suites: the per-image Student-t loss (prediction and
//! log-degrees-of-freedom gradients), the per-pixel baseline losses, and the
//! end-to-end composite of the Student-t loss with the MLP forward pass
//! (weights, biases, and the log-degrees-of-freedom parameter together).
//!
//! Errors are scored as `|analytic - fd| / max(|analytic|, |fd|, floor)`
//! where `floor = abs_floor / tol`, so `err <= tol` accepts either a relative
//! match or an absolute difference below `abs_floor` when both gradients are
//! near zero.

use crate::error::{Error, Result};
use crate::losses::{self, LossKind, LossSpec};
use crate::model::{MlpGrads, MlpModel, Workspace};
use crate::seed;
use crate::tloss::{self, Residual, TLossState};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const N_TLOSS_CONFIGS: usize = 100;
pub const N_BASELINE_CASES: usize = 1000;
pub const N_END_TO_END_CONFIGS: usize = 20;

pub const TLOSS_TOL: f64 = 1e-6;
pub const BASELINE_TOL: f64 = 1e-6;
pub const END_TO_END_TOL: f64 = 1e-4;
const ABS_FLOOR: f64 = 1e-8;

/// Outcome of one finite-difference suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub n_configs: usize,
    pub n_gradients: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    /// The configuration that produced `max_rel_err`.
    pub worst_case: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

/// All suites together, as printed by the command-line checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub suites: Vec<SuiteReport>,
}

impl GradCheckReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

/// Central finite difference of `f` at `x[i]` with step `h`.
fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &mut [f64], i: usize, h: f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let hi = f(x);
    x[i] = orig - h;
    let lo = f(x);
    x[i] = orig;
    (hi - lo) / (2.0 * h)
}

/// Scores `analytic` against the finite difference of `f` in every
/// coordinate and returns the worst error under the module's metric.
fn max_err_against_fd(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &mut [f64],
    analytic: &[f64],
    step: &dyn Fn(f64) -> f64,
    tol: f64,
) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let floor = ABS_FLOOR / tol;
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let fd = central_diff(f, x, i, step(x[i]));
        let a = analytic[i];
        let err = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
        worst = worst.max(err);
    }
    worst
}

/// Checks the per-image Student-t loss gradients (predictions and the
/// log-degrees-of-freedom) on random configurations.
pub fn check_tloss(seed: u64) -> Result<SuiteReport> {
    let mut rng = seed::stream(&[seed, seed::tag("gradcheck"), seed::tag("tloss")]);
    let dims = [1usize, 4, 64];
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    let mut n_gradients = 0usize;

    for cfg_idx in 0..N_TLOSS_CONFIGS {
        let dim = dims[cfg_idx % dims.len()];
        let nu_tilde = rng.gen_range(-3.0..=3.0);
        let state = TLossState::with_nu_tilde(nu_tilde, dim)?;
        let mut residuals: Vec<f64> = (0..dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let grad = tloss::grad(&state, &Residual::new(residuals.clone())?)?;

        // The analytic gradient is taken with respect to predictions, and a
        // prediction bump of +h moves its residual by -h, so the residual
        // finite difference must be negated before comparison. The step
        // balances truncation against cancellation noise: the loss magnitude
        // grows past 100 at D = 64, so a smaller step drowns in roundoff.
        let mut value_of_residuals = |r: &[f64]| {
            tloss::value(&state, &Residual::new(r.to_vec()).unwrap()).unwrap()
        };
        let d_prediction_from_residuals: Vec<f64> =
            grad.d_prediction.iter().map(|d| -d).collect();
        let err = max_err_against_fd(
            &mut value_of_residuals,
            &mut residuals,
            &d_prediction_from_residuals,
            &|_| 1e-5,
            TLOSS_TOL,
        );
        if err > worst {
            worst = err;
            worst_case = format!("config {cfg_idx}: nu_tilde={nu_tilde:.4}, dim={dim}, d_prediction");
        }
        n_gradients += dim;

        let fixed = Residual::new(residuals.clone())?;
        let mut value_of_nu_tilde = |nt: &[f64]| {
            let s = TLossState::with_nu_tilde(nt[0], dim).unwrap();
            tloss::value(&s, &fixed).unwrap()
        };
        let err = max_err_against_fd(
            &mut value_of_nu_tilde,
            &mut [nu_tilde],
            &[grad.d_nu_tilde],
            &|_| 1e-5,
            TLOSS_TOL,
        );
        if err > worst {
            worst = err;
            worst_case = format!("config {cfg_idx}: nu_tilde={nu_tilde:.4}, dim={dim}, d_nu_tilde");
        }
        n_gradients += 1;
    }

    Ok(SuiteReport {
        name: "tloss".into(),
        n_configs: N_TLOSS_CONFIGS,
        n_gradients,
        max_rel_err: worst,
        tolerance: TLOSS_TOL,
        worst_case,
    })
}

fn random_spec<R: Rng>(rng: &mut R) -> LossSpec {
    let kinds: Vec<LossKind> = LossKind::all()
        .iter()
        .copied()
        .filter(|k| !k.is_per_image())
        .collect();
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let mut spec = LossSpec::new(kind);
    spec.q = rng.gen_range(0.1..=1.0);
    spec.clamp_a = -rng.gen_range(0.5..=8.0);
    spec.sce_alpha = rng.gen_range(0.05..=2.0);
    spec.sce_beta = rng.gen_range(0.05..=2.0);
    spec.apl_active_w = rng.gen_range(0.25..=2.0);
    spec.apl_passive_w = rng.gen_range(0.25..=2.0);
    spec
}

/// Checks every per-pixel baseline loss gradient on random
/// (parameters, probability, label) triples.
pub fn check_baselines(seed: u64) -> Result<SuiteReport> {
    let mut rng = seed::stream(&[seed, seed::tag("gradcheck"), seed::tag("baselines")]);
    let mut worst = 0.0f64;
    let mut worst_case = String::new();

    for case in 0..N_BASELINE_CASES {
        let spec = random_spec(&mut rng);
        // Stay well inside the clipping region so the loss is smooth across
        // the finite-difference stencil.
        let p = rng.gen_range(1e-4..=1.0 - 1e-4);
        let y = rng.gen_range(0..=1u8);
        let analytic = losses::pixel_loss_grad(&spec, losses::PixelPrediction::new(p)?, y)?;
        let mut f = |x: &[f64]| {
            losses::pixel_loss(&spec, losses::PixelPrediction::new(x[0]).unwrap(), y).unwrap()
        };
        let err = max_err_against_fd(&mut f, &mut [p], &[analytic], &|_| 1e-7, BASELINE_TOL);
        if err > worst {
            worst = err;
            worst_case = format!("case {case}: {} at p={p:.6}, y={y}", spec.kind);
        }
    }

    Ok(SuiteReport {
        name: "baseline_losses".into(),
        n_configs: N_BASELINE_CASES,
        n_gradients: N_BASELINE_CASES,
        max_rel_err: worst,
        tolerance: BASELINE_TOL,
        worst_case,
    })
}

/// Checks the composite of the Student-t loss with the MLP forward pass:
/// every weight, every bias, and the log-degrees-of-freedom parameter.
pub fn check_end_to_end(seed: u64) -> Result<SuiteReport> {
    let mut rng = seed::stream(&[seed, seed::tag("gradcheck"), seed::tag("end_to_end")]);
    let side = 6usize;
    let n_pixels = side * side;
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    let mut n_gradients = 0usize;

    for cfg_idx in 0..N_END_TO_END_CONFIGS {
        let hidden_dim = rng.gen_range(3..=8);
        let model = MlpModel::init(hidden_dim, &mut rng)?;
        let pixels: Vec<f64> = (0..n_pixels).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let image = crate::grid::Grid::from_data(side, side, pixels)?;
        let mask = crate::grid::Mask::from_fn(side, side, |_, _| rng.gen_bool(0.4))?;
        let feats = crate::model::Features::from_image(&image);
        let nu_tilde = rng.gen_range(-2.0..=2.0);

        let mut theta = model.params_flat();
        theta.push(nu_tilde);

        let mut scratch = model.clone();
        let mut ws = Workspace::new();
        let mut composite = |t: &[f64]| {
            let (weights, nt) = t.split_at(t.len() - 1);
            scratch.set_params_flat(weights).unwrap();
            scratch.forward(&feats, &mut ws);
            let state = TLossState::with_nu_tilde(nt[0], n_pixels).unwrap();
            let residual = Residual::from_label_probs(&mask, &ws.probs).unwrap();
            tloss::value(&state, &residual).unwrap()
        };

        let mut ws2 = Workspace::new();
        model.forward(&feats, &mut ws2);
        let state = TLossState::with_nu_tilde(nu_tilde, n_pixels)?;
        let residual = Residual::from_label_probs(&mask, &ws2.probs)?;
        let grad = tloss::grad(&state, &residual)?;
        let mut grads = MlpGrads::zeros(hidden_dim);
        model.backward(&feats, &mut ws2, &grad.d_prediction, &mut grads)?;
        let mut analytic = grads.flat();
        analytic.push(grad.d_nu_tilde);

        let err = max_err_against_fd(
            &mut composite,
            &mut theta,
            &analytic,
            &|t: f64| 1e-5 * t.abs().max(1.0),
            END_TO_END_TOL,
        );
        if err > worst {
            worst = err;
            worst_case = format!("config {cfg_idx}: hidden_dim={hidden_dim}, nu_tilde={nu_tilde:.4}");
        }
        n_gradients += analytic.len();
    }

    Ok(SuiteReport {
        name: "end_to_end".into(),
        n_configs: N_END_TO_END_CONFIGS,
        n_gradients,
        max_rel_err: worst,
        tolerance: END_TO_END_TOL,
        worst_case,
    })
}

/// Runs all three suites.
pub fn run_all(seed: u64) -> Result<GradCheckReport> {
    let suites = vec![
        check_tloss(seed)?,
        check_baselines(seed)?,
        check_end_to_end(seed)?,
    ];
    if suites.iter().any(|s| !s.max_rel_err.is_finite()) {
        return Err(Error::Domain("non-finite gradient-check error".into()));
    }
    Ok(GradCheckReport { suites })
}
