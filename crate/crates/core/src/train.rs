//! Gradient verification and desk-scale training of the learnable
//! front-ends by distillation to log Mel targets.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::dsp::{normalize_waveform, NormalizedWaveform, Waveform};
use crate::error::{Error, Result};
use crate::fixed::{logmel_extract, N_MELS};
use crate::neural::{record_forward, FeModel};
use crate::SAMPLE_RATE;

pub const FD_EPSILON: f64 = 1e-4;
/// Denominator floor of the relative gradient error.
pub const REL_ERROR_FLOOR: f64 = 1e-7;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Fixed target for the gradient-check loss; any non-degenerate pattern works.
fn check_target(dim: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_fn(dim, |(i, j)| (0.7 * i as f64 + 1.3 * j as f64).sin())
}

fn check_loss(model: &FeModel, samples: &[f64]) -> Result<(f64, Vec<i8>)> {
    let mut g = Graph::new();
    let (out, _) = record_forward(model, &mut g, samples, false)?;
    let target = check_target(g.value(out).dim());
    let loss = g.mse(out, target)?;
    Ok((g.value(loss)[[0, 0]], g.kink_signature()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    /// Entries compared against the analytic gradient.
    pub checked: usize,
    /// Entries whose `±eps` perturbations straddle an `abs` kink; central
    /// differences are meaningless there, so they are left out.
    pub skipped_kinks: usize,
}

/// Largest relative error between backward's gradient of
/// `mse(FE(wav), fixed target)` and central differences.
/// See [`finite_diff_report`].
pub fn finite_diff_check(
    model: &FeModel,
    wav: &NormalizedWaveform,
    eps: f64,
    sample: Option<(usize, u64)>,
) -> Result<f64> {
    finite_diff_report(model, wav, eps, sample).map(|r| r.max_rel_error)
}

/// Checks every parameter entry, or `sample = (count, seed)` random ones.
pub fn finite_diff_report(
    model: &FeModel,
    wav: &NormalizedWaveform,
    eps: f64,
    sample: Option<(usize, u64)>,
) -> Result<FdReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let samples = wav.samples();
    let mut g = Graph::new();
    let (out, bound) = record_forward(model, &mut g, samples, true)?;
    let target = check_target(g.value(out).dim());
    let loss = g.mse(out, target)?;
    let grads = g.backward(loss)?;

    let sizes: Vec<usize> = model.params.values().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let flat: Vec<usize> = match sample {
        None => (0..total).collect(),
        Some((count, seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = rand::seq::index::sample(&mut rng, total, count.min(total)).into_vec();
            picked.sort_unstable();
            picked
        }
    };

    let mut report = FdReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    let mut probe = model.clone();
    for idx in flat {
        let (mut p, mut offset) = (0, idx);
        while offset >= sizes[p] {
            offset -= sizes[p];
            p += 1;
        }
        let analytic = grads
            .get(bound.vars[p])
            .and_then(|m| m.iter().nth(offset).copied())
            .ok_or(Error::NoGraph)?;
        let original = model.params[p].data[offset];
        probe.params[p].data[offset] = original + eps;
        let (plus, plus_kinks) = check_loss(&probe, samples)?;
        probe.params[p].data[offset] = original - eps;
        let (minus, minus_kinks) = check_loss(&probe, samples)?;
        probe.params[p].data[offset] = original;
        if plus_kinks != minus_kinks {
            report.skipped_kinks += 1;
            continue;
        }
        report.checked += 1;
        let err = relative_error(analytic, (plus - minus) / (2.0 * eps));
        report.max_rel_error = report.max_rel_error.max(err);
    }
    Ok(report)
}

/// Largest relative error between backward and central differences for
/// the scalar built by `build` from `inputs`, over every input entry.
pub fn graph_fd_check<F>(inputs: &[Array2<f64>], eps: f64, build: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let eval = |vals: &[Array2<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|v| g.param(v.clone())).collect();
        let out = build(&mut g, &vars)?;
        Ok(g.value(out)[[0, 0]])
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|v| g.param(v.clone())).collect();
    let out = build(&mut g, &vars)?;
    let grads = g.backward(out)?;
    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).ok_or(Error::NoGraph)?;
        for (idx, (&orig, &a)) in input.iter().zip(analytic.iter()).enumerate() {
            let set = |m: &mut Array2<f64>, v: f64| *m.iter_mut().nth(idx).expect("in range") = v;
            set(&mut probe[k], orig + eps);
            let plus = eval(&probe)?;
            set(&mut probe[k], orig - eps);
            let minus = eval(&probe)?;
            set(&mut probe[k], orig);
            worst = worst.max(relative_error(a, (plus - minus) / (2.0 * eps)));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    Constant,
    OneCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub peak_lr: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub batch_utterances: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            peak_lr: 3e-3,
            schedule: Schedule::OneCycle,
            seed: 0,
            batch_utterances: 4,
        }
    }
}

/// Learning rate at `step` (0-based) of `steps`.
///
/// One-cycle: linear from `peak/10` up to `peak` over the first 45% of
/// steps, back down to `peak/10` over the next 45%, then to `peak/100`.
pub fn learning_rate(schedule: Schedule, peak: f64, step: usize, steps: usize) -> f64 {
    match schedule {
        Schedule::Constant => peak,
        Schedule::OneCycle => {
            let s = step as f64;
            let warm = 0.45 * steps as f64;
            let lo = peak / 10.0;
            let last = peak / 100.0;
            if s <= warm {
                lo + (peak - lo) * s / warm
            } else if s <= 2.0 * warm {
                peak - (peak - lo) * (s - warm) / warm
            } else {
                let tail = (steps as f64 - 2.0 * warm).max(1.0);
                lo - (lo - last) * ((s - 2.0 * warm) / tail).min(1.0)
            }
        }
    }
}

/// Adam with bias correction over a flat list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (k, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossCurve {
    pub points: Vec<CurvePoint>,
}

impl LossCurve {
    fn mean_loss(points: &[CurvePoint]) -> f64 {
        points.iter().map(|p| p.loss).sum::<f64>() / points.len() as f64
    }

    /// Loss before the first update.
    pub fn initial(&self) -> f64 {
        self.points[0].loss
    }

    /// Mean of the last `window` losses.
    pub fn final_smoothed(&self, window: usize) -> f64 {
        let n = self.points.len();
        Self::mean_loss(&self.points[n - window.min(n)..])
    }

    /// `step,lr,loss` with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,lr,loss\n");
        for p in &self.points {
            s.push_str(&format!("{},{:.6e},{:.9e}\n", p.step, p.lr, p.loss));
        }
        s
    }
}

/// Trainable linear map from front-end dims to the 80 Mel bands.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub weight: Array2<f64>,
    pub bias: Array2<f64>,
}

impl Head {
    fn init(in_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((N_MELS, in_dim), |_| rng.gen_range(-bound..bound)),
            bias: Array2::zeros((N_MELS, 1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub curve: LossCurve,
    pub head: Head,
}

struct Example {
    input: NormalizedWaveform,
    /// `(80, frames)`
    target: Array2<f64>,
}

/// Trains `model` (and a fresh linear head) so that `head(FE(x))` matches
/// the normalized log Mel features of `x`, frame by frame at 10 ms. Like
/// the targets, front-end outputs are normalized per utterance and
/// dimension before the head.
pub fn train_distill(model: &mut FeModel, corpus: &[Waveform], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let shift = model.frame_shift_ms();
    if (shift - 10.0).abs() > 1e-9 {
        return Err(Error::FrameMismatch(shift));
    }
    if corpus.is_empty() || cfg.steps == 0 || cfg.batch_utterances == 0 {
        return Err(Error::BadRange("need a corpus, steps >= 1 and batch >= 1".into()));
    }
    if !(cfg.peak_lr >= 0.0 && cfg.peak_lr.is_finite()) {
        return Err(Error::BadRange(format!("peak learning rate {}", cfg.peak_lr)));
    }
    let examples: Vec<Example> = corpus
        .iter()
        .map(|w| {
            Ok(Example {
                input: normalize_waveform(w)?,
                target: logmel_extract(w)?.values.reversed_axes().as_standard_layout().to_owned(),
            })
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut head = Head::init(model.config.output_dim(), &mut rng);
    let mut sizes: Vec<usize> = model.params.values().map(|t| t.len()).collect();
    sizes.extend([head.weight.len(), head.bias.len()]);
    let mut adam = Adam::new(&sizes);

    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut curve = LossCurve::default();

    for step in 0..cfg.steps {
        let lr = learning_rate(cfg.schedule, cfg.peak_lr, step, cfg.steps);
        let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
        let mut loss_sum = 0.0;
        for _ in 0..cfg.batch_utterances {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let ex = &examples[order[cursor]];
            cursor += 1;

            let mut g = Graph::new();
            let (fe, bound) = record_forward(model, &mut g, ex.input.samples(), true)?;
            let dims = g.value(fe).nrows();
            let ones = g.constant(Array2::ones((dims, 1)));
            let zeros = g.constant(Array2::zeros((dims, 1)));
            let fe = g.group_norm(fe, ones, zeros)?;
            let w = g.param(head.weight.clone());
            let b = g.param(head.bias.clone());
            let pred = g.linear(fe, w, Some(b))?;
            let frames = g.value(pred).ncols().min(ex.target.ncols());
            let pred = g.slice_cols(pred, 0, frames)?;
            let target = ex.target.slice(ndarray::s![.., ..frames]).to_owned();
            let loss = g.mse(pred, target)?;
            loss_sum += g.value(loss)[[0, 0]];
            let gr = g.backward(loss)?;
            let leaves = bound.vars.iter().chain([&w, &b]);
            for (acc, v) in grads.iter_mut().zip(leaves) {
                let gv = gr.get(*v).ok_or(Error::NoGraph)?;
                for (a, x) in acc.iter_mut().zip(gv.iter()) {
                    *a += x;
                }
            }
        }
        let scale = 1.0 / cfg.batch_utterances as f64;
        for g in &mut grads {
            g.iter_mut().for_each(|v| *v *= scale);
        }
        curve.points.push(CurvePoint {
            step,
            lr,
            loss: loss_sum * scale,
        });

        let head_w = head.weight.as_slice_mut().expect("standard layout");
        let head_b = head.bias.as_slice_mut().expect("standard layout");
        let mut slices: Vec<&mut [f64]> = model.params.values_mut().map(|t| t.data.as_mut_slice()).collect();
        slices.push(head_w);
        slices.push(head_b);
        adam.update(&mut slices, &grads, lr);
    }
    Ok(TrainOutcome { curve, head })
}

/// `count` one-second utterances, each a mixture of three random sines
/// plus uniform noise. Every sine sounds over its own random interval of at
/// least 200 ms, faded in and out over 10 ms.
pub fn synthetic_corpus(count: usize, seed: u64) -> Vec<Waveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = SAMPLE_RATE as usize;
    let min_len = n / 5;
    let ramp = n / 100;
    (0..count)
        .map(|_| {
            let tones: Vec<(f64, f64, f64, usize, usize)> = (0..3)
                .map(|_| {
                    let start = rng.gen_range(0..n - min_len);
                    let end = rng.gen_range(start + min_len..=n);
                    (
                        rng.gen_range(100.0..7000.0),
                        rng.gen_range(0.2..1.0),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                        start,
                        end,
                    )
                })
                .collect();
            let samples = (0..n)
                .map(|i| {
                    let t = i as f64 / SAMPLE_RATE as f64;
                    let s: f64 = tones
                        .iter()
                        .filter(|tone| (tone.3..tone.4).contains(&i))
                        .map(|&(f, a, ph, start, end)| {
                            let edge = (i - start).min(end - 1 - i) as f64 / ramp as f64;
                            a * edge.min(1.0) * (std::f64::consts::TAU * f * t + ph).sin()
                        })
                        .sum();
                    s + rng.gen_range(-0.05..0.05)
                })
                .collect();
            Waveform::new(samples, SAMPLE_RATE).expect("finite samples")
        })
        .collect()
}
