//! Monte Carlo ensembles: signal, constituent bank and combiner per run,
//! aggregated in run order, plus the transient recursions.

use bregmix_core::diagnostics::{eg_quotient_parts, linearization_diagnostic, QuotientAccumulator};
use bregmix_core::mixture::combiner_regressor;
use bregmix_core::moments::{BaseMomentAccumulator, BaseMoments};
use bregmix_core::rng::{stream, StreamRole};
use bregmix_core::transient::convergence_condition;
use bregmix_core::{
    AnyMixture, Error as CoreError, FilterBank, Matrix, Mixture, Multiplicative, SignalModel,
    TheoreticalMoments, TransientModel, UpdateForm, Vector,
};
use rayon::prelude::*;

use crate::config::ResolvedConfig;
use crate::error::{AppError, Result};

/// Runs simulated concurrently before their results are folded in.
const WAVE: usize = 32;

/// Largest tolerated fraction of diverged runs.
pub const MAX_DIVERGED_FRACTION: f64 = 0.1;

/// Execution knobs that never change the numbers produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Execution {
    /// Worker threads; 0 picks the machine default, 1 runs serially.
    pub threads: usize,
}

impl Execution {
    pub fn serial() -> Self {
        Self { threads: 1 }
    }

    /// Reads `BREGMIX_THREADS`, defaulting to 0 (auto).
    pub fn from_env() -> Self {
        let threads = std::env::var("BREGMIX_THREADS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(0);
        Self { threads }
    }
}

/// Decimated ensemble curves. Row `r` summarizes steps
/// `r * decimation ..= t[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub t: Vec<usize>,
    pub mse_mixture: Vec<f64>,
    /// `[row][constituent]`.
    pub mse_constituents: Vec<Vec<f64>>,
    /// Mean combiner state at the end of each window, `[row][i]`.
    pub mean_state: Vec<Vec<f64>>,
    /// Mean effective combination weights at the end of each window.
    pub mean_weights: Vec<Vec<f64>>,
    /// Mean outer product of the state at the end of each window.
    pub second_moment: Vec<Matrix>,
    /// Window mean; NaN for LMS combiners.
    pub linearization: Vec<f64>,
    /// Window mean; NaN unless the combiner is EG.
    pub quotient: Vec<f64>,
    pub saturation: Vec<u64>,
    pub theory: Option<TheoryCurves>,
    pub runs_used: usize,
    pub diverged: usize,
}

impl CurveSet {
    pub fn rows(&self) -> usize {
        self.t.len()
    }

    /// Diagonal of the empirical covariance `Q - q q^T` at a row.
    pub fn covariance_diagonal(&self, row: usize) -> Vec<f64> {
        let q = &self.mean_state[row];
        (0..q.len())
            .map(|i| self.second_moment[row][(i, i)] - q[i] * q[i])
            .collect()
    }
}

/// Recursion outputs aligned with the empirical rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurves {
    pub mse: Vec<f64>,
    pub mean_state: Vec<Vec<f64>>,
    pub mean_weights: Vec<Vec<f64>>,
    pub second_moment: Vec<Matrix>,
    /// Largest mean-convergence spectral radius within each window.
    pub convergence_radius: Vec<f64>,
    /// Base moments averaged over the last tenth of the horizon.
    pub final_moments: BaseMoments,
    /// Runs behind the moment estimates.
    pub moment_runs: usize,
}

struct Layout {
    horizon: usize,
    decimation: usize,
    rows: usize,
}

impl Layout {
    fn new(rc: &ResolvedConfig) -> Self {
        let horizon = rc.config.horizon;
        let decimation = rc.config.output.decimation;
        Self {
            horizon,
            decimation,
            rows: horizon.div_ceil(decimation),
        }
    }

    fn row(&self, t: usize) -> usize {
        t / self.decimation
    }

    fn end(&self, row: usize) -> usize {
        ((row + 1) * self.decimation).min(self.horizon) - 1
    }

    fn len(&self, row: usize) -> usize {
        self.end(row) + 1 - row * self.decimation
    }
}

/// What one run records.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Full { moments: bool },
    MomentsOnly,
}

#[derive(Default)]
struct RunTrace {
    mse: Vec<f64>,
    constituent_mse: Vec<f64>,
    state: Vec<f64>,
    weights: Vec<f64>,
    linearization: Vec<f64>,
    saturation: Vec<u64>,
    quotient: Vec<(f64, f64)>,
    regressors: Vec<f64>,
    targets: Vec<f64>,
}

fn initial_mixture(rc: &ResolvedConfig) -> bregmix_core::Result<AnyMixture> {
    let form = if rc.config.mixture.use_linearized {
        UpdateForm::Linearized
    } else {
        UpdateForm::Exact
    };
    AnyMixture::uniform(
        rc.algorithm,
        rc.constituents(),
        rc.config.mixture.mu,
        rc.config.mixture.u,
        form,
    )
}

fn simulate(
    rc: &ResolvedConfig,
    layout: &Layout,
    run: u64,
    mode: Mode,
) -> bregmix_core::Result<RunTrace> {
    let model = SignalModel::new(rc.signal.clone());
    let mut regressor_rng = stream(rc.config.seed, run, StreamRole::Regressor);
    let mut noise_rng = stream(rc.config.seed, run, StreamRole::Noise);
    let mut bank = FilterBank::zeros(rc.signal.filter_order(), &rc.step_sizes)?;
    let m = bank.len();
    let affine = rc.algorithm.is_affine();
    let k = if affine { m - 1 } else { m };

    let full = matches!(mode, Mode::Full { .. });
    let keep_moments = matches!(mode, Mode::Full { moments: true } | Mode::MomentsOnly);
    let mut mix = if full {
        Some(initial_mixture(rc)?)
    } else {
        None
    };
    let dim = rc.state_dim();
    let eg_u = mix
        .as_ref()
        .and_then(|x| x.kind())
        .and_then(|k| k.total_mass());
    let multiplicative = rc.algorithm.is_multiplicative();
    let mu = rc.config.mixture.mu;

    let rows = layout.rows;
    let mut tr = RunTrace::default();
    if full {
        tr.mse = vec![0.0; rows];
        tr.constituent_mse = vec![0.0; rows * m];
        tr.state = vec![0.0; rows * dim];
        tr.weights = vec![0.0; rows * m];
        tr.linearization = vec![0.0; rows];
        tr.saturation = vec![0; rows];
        if eg_u.is_some() {
            tr.quotient = Vec::with_capacity(layout.horizon);
        }
    }
    if keep_moments {
        tr.regressors = Vec::with_capacity(layout.horizon * k);
        tr.targets = Vec::with_capacity(layout.horizon);
    }

    for t in 0..layout.horizon {
        let sample = model.next_sample(&mut regressor_rng, &mut noise_rng);
        let x = bank.predict_and_adapt(&sample.a, sample.y)?;
        let (g, target) = combiner_regressor(affine, &x, sample.y);
        if keep_moments {
            tr.regressors.extend_from_slice(&g);
            tr.targets.push(target);
        }
        let Some(cur) = mix.take() else { continue };
        let row = layout.row(t);

        for (i, xi) in x.iter().enumerate() {
            let e = sample.y - xi;
            tr.constituent_mse[row * m + i] += e * e;
        }
        if t == layout.end(row) {
            tr.state[row * dim..(row + 1) * dim].copy_from_slice(cur.state());
            tr.weights[row * m..(row + 1) * m].copy_from_slice(&cur.effective_weights());
        }

        let step = cur.step(&x, sample.y)?;
        let e = step.error;
        tr.mse[row] += e * e;
        if multiplicative {
            tr.linearization[row] += linearization_diagnostic(mu * e * g[0]);
        }
        if let Some(u) = eg_u {
            tr.quotient
                .push(eg_quotient_parts(cur.state(), &g, mu * e, u));
        }
        if step.saturated {
            tr.saturation[row] += 1;
        }
        mix = Some(step.next);
    }
    Ok(tr)
}

/// Simulates `indices` in waves on `pool`, handing each result to `sink` in index order.
fn for_each_run(
    pool: &rayon::ThreadPool,
    indices: std::ops::Range<u64>,
    job: impl Fn(u64) -> bregmix_core::Result<RunTrace> + Sync,
    mut sink: impl FnMut(bregmix_core::Result<RunTrace>) -> Result<()>,
) -> Result<()> {
    let all: Vec<u64> = indices.collect();
    for wave in all.chunks(WAVE) {
        let results: Vec<_> = pool.install(|| wave.par_iter().map(|&r| job(r)).collect());
        for res in results {
            sink(res)?;
        }
    }
    Ok(())
}

struct Totals {
    mse: Vec<f64>,
    constituent_mse: Vec<f64>,
    state: Vec<f64>,
    weights: Vec<f64>,
    outer: Vec<f64>,
    linearization: Vec<f64>,
    saturation: Vec<u64>,
    quotient: Vec<QuotientAccumulator>,
}

/// Runs the ensemble and, when enabled, the transient recursions.
pub fn run_ensemble(rc: &ResolvedConfig, exec: Execution) -> Result<CurveSet> {
    let layout = Layout::new(rc);
    let rows = layout.rows;
    let m = rc.constituents();
    let dim = rc.state_dim();
    let k = if rc.algorithm.is_affine() { m - 1 } else { m };
    let runs = rc.config.runs;
    let theory = rc.config.theory.enabled;
    let calibration = rc.config.theory.moment_runs;
    let is_eg = rc.algorithm.is_eg();

    // fail fast on a combiner that cannot be built
    let initial = initial_mixture(rc)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exec.threads)
        .build()
        .map_err(|e| AppError::Core(CoreError::InvalidConfig(e.to_string())))?;

    let mut totals = Totals {
        mse: vec![0.0; rows],
        constituent_mse: vec![0.0; rows * m],
        state: vec![0.0; rows * dim],
        weights: vec![0.0; rows * m],
        outer: vec![0.0; rows * dim * dim],
        linearization: vec![0.0; rows],
        saturation: vec![0; rows],
        quotient: if is_eg {
            vec![QuotientAccumulator::default(); layout.horizon]
        } else {
            Vec::new()
        },
    };
    let mut moments = (theory).then(|| BaseMomentAccumulator::new(k, layout.horizon));
    let mode = Mode::Full {
        moments: theory && calibration.is_none(),
    };
    let mut used = 0usize;
    let mut diverged = 0usize;

    for_each_run(
        &pool,
        0..runs as u64,
        |r| simulate(rc, &layout, r, mode),
        |res| {
            let tr = match res {
                Ok(tr) => tr,
                Err(CoreError::Divergence) => {
                    diverged += 1;
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            };
            used += 1;
            add(&mut totals.mse, &tr.mse);
            add(&mut totals.constituent_mse, &tr.constituent_mse);
            add(&mut totals.state, &tr.state);
            add(&mut totals.weights, &tr.weights);
            add(&mut totals.linearization, &tr.linearization);
            for (a, b) in totals.saturation.iter_mut().zip(&tr.saturation) {
                *a += b;
            }
            for row in 0..rows {
                let z = &tr.state[row * dim..(row + 1) * dim];
                let out = &mut totals.outer[row * dim * dim..(row + 1) * dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        out[i * dim + j] += z[i] * z[j];
                    }
                }
            }
            for (acc, (n, d)) in totals.quotient.iter_mut().zip(&tr.quotient) {
                acc.add(*n, *d);
            }
            if let (Some(acc), Mode::Full { moments: true }) = (moments.as_mut(), mode) {
                acc.add_run(&tr.regressors, &tr.targets)?;
            }
            Ok(())
        },
    )?;

    if diverged as f64 > MAX_DIVERGED_FRACTION * runs as f64 || used == 0 {
        return Err(AppError::TooManyDiverged { diverged, runs });
    }

    if let (Some(acc), Some(extra)) = (moments.as_mut(), calibration) {
        let start = runs as u64;
        for_each_run(
            &pool,
            start..start + extra as u64,
            |r| simulate(rc, &layout, r, Mode::MomentsOnly),
            |res| match res {
                Ok(tr) => Ok(acc.add_run(&tr.regressors, &tr.targets)?),
                Err(CoreError::Divergence) => Ok(()),
                Err(e) => Err(e.into()),
            },
        )?;
    }

    let n = used as f64;
    let mut curves = CurveSet {
        t: (0..rows).map(|r| layout.end(r)).collect(),
        mse_mixture: (0..rows)
            .map(|r| totals.mse[r] / (n * layout.len(r) as f64))
            .collect(),
        mse_constituents: (0..rows)
            .map(|r| {
                (0..m)
                    .map(|i| totals.constituent_mse[r * m + i] / (n * layout.len(r) as f64))
                    .collect()
            })
            .collect(),
        mean_state: (0..rows)
            .map(|r| {
                totals.state[r * dim..(r + 1) * dim]
                    .iter()
                    .map(|v| v / n)
                    .collect()
            })
            .collect(),
        mean_weights: (0..rows)
            .map(|r| {
                totals.weights[r * m..(r + 1) * m]
                    .iter()
                    .map(|v| v / n)
                    .collect()
            })
            .collect(),
        second_moment: (0..rows)
            .map(|r| {
                Matrix::from_row_slice(dim, dim, &totals.outer[r * dim * dim..(r + 1) * dim * dim])
                    / n
            })
            .collect(),
        linearization: (0..rows)
            .map(|r| {
                if rc.algorithm.is_multiplicative() {
                    totals.linearization[r] / (n * layout.len(r) as f64)
                } else {
                    f64::NAN
                }
            })
            .collect(),
        quotient: vec![f64::NAN; rows],
        saturation: totals.saturation,
        theory: None,
        runs_used: used,
        diverged,
    };

    if is_eg {
        let mut sums = vec![0.0; rows];
        for (t, acc) in totals.quotient.iter().enumerate() {
            let d = acc.diagnostic().ok_or(CoreError::DegenerateQuotient(0.0))?;
            sums[layout.row(t)] += d;
        }
        curves.quotient = (0..rows).map(|r| sums[r] / layout.len(r) as f64).collect();
    }

    if let Some(acc) = moments {
        curves.theory = Some(run_theory(rc, &layout, &initial, &acc)?);
    }
    Ok(curves)
}

fn add(total: &mut [f64], part: &[f64]) {
    for (a, b) in total.iter_mut().zip(part) {
        *a += b;
    }
}

fn effective_from_state(affine: bool, state: &[f64]) -> Vec<f64> {
    let k = state.len() / 2;
    let free: Vec<f64> = (0..k).map(|i| state[i] - state[i + k]).collect();
    if affine {
        let mut w = free.clone();
        w.push(1.0 - free.iter().sum::<f64>());
        w
    } else {
        free
    }
}

fn run_theory(
    rc: &ResolvedConfig,
    layout: &Layout,
    initial: &AnyMixture,
    acc: &BaseMomentAccumulator,
) -> Result<TheoryCurves> {
    let kind: Multiplicative = initial.kind().ok_or_else(|| {
        AppError::Core(CoreError::InvalidConfig(
            "theory needs an EGU or EG combiner".into(),
        ))
    })?;
    let model = TransientModel::new(rc.config.mixture.mu, kind);
    let affine = rc.algorithm.is_affine();
    let rows = layout.rows;
    let mut cur = TheoreticalMoments::deterministic(initial.state());

    let mut mse = vec![0.0; rows];
    let mut radius = vec![0.0f64; rows];
    let mut mean_state = Vec::with_capacity(rows);
    let mut second = Vec::with_capacity(rows);

    let tail_start = layout.horizon - (layout.horizon / 10).max(1);
    let k = acc.moments_at(0)?.p.len();
    let mut tail = BaseMoments {
        r: Matrix::zeros(k, k),
        p: Vector::zeros(k),
        target_power: 0.0,
    };

    for t in 0..layout.horizon {
        let base = acc.moments_at(t)?;
        let aug = base.augment();
        let row = layout.row(t);
        mse[row] += model.mse(&cur, &aug);
        let rho = convergence_condition(&cur.mean, &base.r, model.mu)
            .map_err(|source| AppError::Theory { t, source })?;
        radius[row] = radius[row].max(rho);
        if t == layout.end(row) {
            mean_state.push(cur.mean.iter().copied().collect::<Vec<f64>>());
            second.push(cur.second.clone());
        }
        if t >= tail_start {
            tail.r += &base.r;
            tail.p += &base.p;
            tail.target_power += base.target_power;
        }
        cur = model
            .step(&cur, &aug)
            .map_err(|source| AppError::Theory { t, source })?;
    }
    for (r, v) in mse.iter_mut().enumerate() {
        *v /= layout.len(r) as f64;
    }
    let tail_len = (layout.horizon - tail_start) as f64;
    tail.r /= tail_len;
    tail.p /= tail_len;
    tail.target_power /= tail_len;

    Ok(TheoryCurves {
        mse,
        mean_weights: mean_state
            .iter()
            .map(|s| effective_from_state(affine, s))
            .collect(),
        mean_state,
        second_moment: second,
        convergence_radius: radius,
        final_moments: tail,
        moment_runs: acc.runs(),
    })
}
