use std::sync::Arc;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DebiasStrategy, StrategyRegistry, TrainError};
use crate::data::Dataset;
use crate::metrics::{FairnessReport, GroupedPredictions};
use crate::nn::{adam_step, bce_loss, sigmoid, AdamState, DenseNet, GradientSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Strategy name, resolved through a [`StrategyRegistry`].
    pub mode: String,
    pub alpha: f64,
    pub lr: f64,
    /// Adversary learning rate; `None` uses `lr`.
    pub adversary_lr: Option<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub predictor_hidden: Vec<usize>,
    pub adversary_hidden: Vec<usize>,
    /// High-risk cutoff used for validation metrics.
    pub threshold: f64,
    /// Validation gap a checkpoint must meet to be preferred on AUC.
    pub gap_limit: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: "parity".to_string(),
            alpha: 1.0,
            lr: 1e-4,
            adversary_lr: None,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            predictor_hidden: vec![256, 256],
            adversary_hidden: vec![100],
            threshold: 0.5,
            gap_limit: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return bad(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if let Some(lr) = self.adversary_lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("adversary lr must be positive, got {lr}"));
            }
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be positive".to_string());
        }
        if self.predictor_hidden.contains(&0) || self.adversary_hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        Ok(())
    }

    pub fn predictor_dims(&self, n_features: usize) -> Vec<usize> {
        std::iter::once(n_features).chain(self.predictor_hidden.iter().copied()).chain([1]).collect()
    }

    pub fn adversary_dims(&self, input_width: usize) -> Vec<usize> {
        std::iter::once(input_width).chain(self.adversary_hidden.iter().copied()).chain([1]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationMetrics {
    pub auc: f64,
    pub accuracy: f64,
    pub high_risk_gap: f64,
    pub fp_gap: f64,
    pub fn_gap: f64,
}

impl From<&FairnessReport> for ValidationMetrics {
    fn from(r: &FairnessReport) -> Self {
        ValidationMetrics {
            auc: r.auc,
            accuracy: r.accuracy,
            high_risk_gap: r.high_risk_gap,
            fp_gap: r.fp_gap,
            fn_gap: r.fn_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean predictor loss over the epoch's batches.
    pub loss_y: f64,
    /// Mean adversary loss, when an adversary is trained.
    pub loss_d: Option<f64>,
    pub valid: ValidationMetrics,
}

/// Predictor, optional adversary, and the per-epoch record of how they got there.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPair {
    pub mode: String,
    pub predictor: DenseNet,
    pub adversary: Option<DenseNet>,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters `predictor` and `adversary` hold.
    pub selected_epoch: usize,
    pub config: TrainConfig,
}

impl TrainedPair {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, TrainError> {
        predict(self, x)
    }
}

pub fn coupled_loss(l_y: f64, l_d: f64, alpha: f64) -> f64 {
    l_y - alpha * l_d
}

/// Recidivism probabilities for every row of `x`.
pub fn predict(pair: &TrainedPair, x: ArrayView2<f64>) -> Result<Vec<f64>, TrainError> {
    if x.ncols() != pair.predictor.input_dim() {
        return Err(TrainError::SchemaMismatch(format!(
            "{} feature columns, model expects {}",
            x.ncols(),
            pair.predictor.input_dim()
        )));
    }
    Ok(pair.predictor.logits(x)?.iter().map(|&z| sigmoid(z)).collect())
}

/// Losses and gradients for one batch.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub loss_y: f64,
    pub loss_d: Option<f64>,
    /// Gradient of `L_y - alpha * L_d` with respect to the predictor.
    pub predictor: GradientSet,
    /// Gradient of `L_d` with respect to the adversary.
    pub adversary: Option<GradientSet>,
}

/// Forward both nets on a batch and backpropagate both losses.
///
/// The adversary term is skipped entirely when `alpha == 0`, so the predictor
/// gradient is then exactly the baseline gradient.
///
/// Head gradients are `p - y`, the gradient of the unclipped cross-entropy;
/// it agrees with the clipped loss whenever no probability is clipped and
/// keeps saturated, wrong predictions learning.
pub fn batch_gradients(
    predictor: &DenseNet,
    adversary: Option<&DenseNet>,
    strategy: &dyn DebiasStrategy,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    d: ArrayView1<f64>,
    alpha: f64,
) -> Result<BatchGradients, TrainError> {
    let n = y.len() as f64;
    let (logits, cache) = predictor.forward(x)?;
    let probs = logits.mapv(sigmoid);
    let loss_y = bce_loss(probs.view(), y)?;
    let mut dlogit: Array1<f64> = (&probs - &y) / n;

    let (loss_d, adv_grads) = match adversary {
        Some(adv) => {
            let input = strategy.adversary_input(logits.view(), y)?;
            let (adv_logits, adv_cache) = adv.forward(input.view())?;
            let q = adv_logits.mapv(sigmoid);
            let loss_d = bce_loss(q.view(), d)?;
            let dq = (&q - &d) / n;
            let (grads, dinput) = adv.backward(&adv_cache, dq.view())?;
            if alpha != 0.0 {
                // column 0 is the logit; any other columns are data
                dlogit.scaled_add(-alpha, &dinput.column(0));
            }
            (Some(loss_d), Some(grads))
        }
        None => (None, None),
    };
    let (pred_grads, _) = predictor.backward(&cache, dlogit.view())?;
    Ok(BatchGradients { loss_y, loss_d, predictor: pred_grads, adversary: adv_grads })
}

/// Trains with the built-in strategies.
pub fn train(train_ds: &Dataset, valid_ds: &Dataset, cfg: &TrainConfig) -> Result<TrainedPair, TrainError> {
    let strategy = StrategyRegistry::builtin().get(&cfg.mode)?;
    train_with(strategy, train_ds, valid_ds, cfg)
}

/// Independent seeds for predictor init, adversary init and batch order.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn train_with(
    strategy: Arc<dyn DebiasStrategy>,
    train_ds: &Dataset,
    valid_ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainedPair, TrainError> {
    cfg.validate()?;
    if train_ds.n_rows() == 0 {
        return Err(TrainError::EmptyDataset("train"));
    }
    if valid_ds.n_rows() == 0 {
        return Err(TrainError::EmptyDataset("validation"));
    }
    if train_ds.schema != valid_ds.schema || train_ds.n_features() != valid_ds.n_features() {
        return Err(TrainError::SchemaMismatch("train and validation schemas differ".to_string()));
    }

    let mut predictor = DenseNet::new(&cfg.predictor_dims(train_ds.n_features()), stream_seed(cfg.seed, 0))?;
    let mut pred_state = AdamState::new(&predictor);
    let mut adversary = match strategy.adversary_input_width() {
        Some(width) => Some(DenseNet::new(&cfg.adversary_dims(width), stream_seed(cfg.seed, 1))?),
        None => None,
    };
    let mut adv_state = adversary.as_ref().map(AdamState::new);
    let adv_lr = cfg.adversary_lr.unwrap_or(cfg.lr);
    let adversary_active = adversary.is_some() && cfg.alpha != 0.0;

    let y_all: Array1<f64> = train_ds.y.iter().map(|&v| v as f64).collect();
    let d_all: Array1<f64> = train_ds.d.iter().map(|&v| v as f64).collect();
    let mut order: Vec<usize> = (0..train_ds.n_rows()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, 2));

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<((u8, f64), usize, DenseNet, Option<DenseNet>)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut sum_y, mut sum_d, mut batches) = (0.0, 0.0, 0usize);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = train_ds.x.select(Axis(0), idx);
            let y = y_all.select(Axis(0), idx);
            let d = d_all.select(Axis(0), idx);
            let g = batch_gradients(&predictor, adversary.as_ref(), strategy.as_ref(), x.view(), y.view(), d.view(), cfg.alpha)?;
            if !g.loss_y.is_finite() {
                return Err(TrainError::NonFiniteLoss { loss: "L_y", epoch, batch });
            }
            if let Some(ld) = g.loss_d {
                if !ld.is_finite() {
                    return Err(TrainError::NonFiniteLoss { loss: "L_d", epoch, batch });
                }
                sum_d += ld;
            }
            if let (Some(adv), Some(state), Some(grads)) = (adversary.as_mut(), adv_state.as_mut(), g.adversary.as_ref()) {
                adam_step(adv, grads, state, adv_lr)?;
            }
            adam_step(&mut predictor, &g.predictor, &mut pred_state, cfg.lr)?;
            sum_y += g.loss_y;
            batches += 1;
        }
        if predictor.flatten().iter().any(|p| !p.is_finite()) {
            return Err(TrainError::NonFiniteLoss { loss: "predictor parameters", epoch, batch: batches });
        }

        let report = validation_report(&predictor, valid_ds, cfg.threshold)?;
        let key = if adversary_active {
            let gap = strategy.selection_gap(&report).unwrap_or(0.0);
            if gap <= cfg.gap_limit {
                (1, report.auc)
            } else {
                (0, -gap)
            }
        } else {
            (1, report.auc)
        };
        let better = match &best {
            None => true,
            Some((k, ..)) => key.0 > k.0 || (key.0 == k.0 && key.1 > k.1),
        };
        if better {
            best = Some((key, epoch, predictor.clone(), adversary.clone()));
        }
        let record = EpochRecord {
            epoch,
            loss_y: sum_y / batches as f64,
            loss_d: adversary.as_ref().map(|_| sum_d / batches as f64),
            valid: ValidationMetrics::from(&report),
        };
        log::debug!("{} epoch {epoch}: {:?}", strategy.name(), record);
        history.push(record);
    }

    let (_, selected_epoch, predictor, adversary) = best.expect("at least one epoch");
    Ok(TrainedPair {
        mode: strategy.name().to_string(),
        predictor,
        adversary,
        history,
        selected_epoch,
        config: cfg.clone(),
    })
}

fn validation_report(net: &DenseNet, ds: &Dataset, threshold: f64) -> Result<FairnessReport, TrainError> {
    let probs: Vec<f64> = net.logits(ds.x.view())?.iter().map(|&z| sigmoid(z)).collect();
    let gp = GroupedPredictions::new(probs, ds.labels(), ds.groups())?;
    Ok(FairnessReport::evaluate(&gp, threshold, 10)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;
    use crate::nn::{init_network, numeric_gradient};
    use crate::train::{EqualizedOdds, Parity};
    use ndarray::{array, Array2};
    use rand::Rng;

    /// Small synthetic set where the group leaks into the label through x0.
    pub(crate) fn synthetic(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = FeatureSchema::default();
        let width = schema.width();
        let mut x = Array2::zeros((n, width));
        let mut y = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            let g: u8 = rng.gen_range(0..2);
            for j in 0..width {
                x[[i, j]] = rng.gen_range(-1.0..1.0);
            }
            x[[i, 0]] += if g == 1 { 0.8 } else { -0.8 };
            let p = sigmoid(1.5 * x[[i, 0]] - 0.7 * x[[i, 3]]);
            y.push(u8::from(rng.gen::<f64>() < p));
            d.push(g);
        }
        Dataset { x, y, d, compas_decile: vec![None; n], schema }
    }

    fn quick(mode: &str, alpha: f64) -> TrainConfig {
        TrainConfig {
            mode: mode.to_string(),
            alpha,
            lr: 1e-3,
            batch_size: 32,
            epochs: 4,
            seed: 7,
            predictor_hidden: vec![16],
            adversary_hidden: vec![8],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn coupled_loss_arithmetic() {
        assert!((coupled_loss(0.7, 0.6, 1.0) - 0.1).abs() < 1e-15);
        assert_eq!(coupled_loss(0.7, 0.6, 0.0), 0.7);
        assert_eq!(coupled_loss(0.4, 0.4, 1.0), 0.0);
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        let ds = synthetic(24, 1);
        let y: Array1<f64> = ds.y.iter().map(|&v| v as f64).collect();
        let d: Array1<f64> = ds.d.iter().map(|&v| v as f64).collect();
        for (strategy, width) in [(&Parity as &dyn DebiasStrategy, 1usize), (&EqualizedOdds, 2)] {
            let predictor = init_network(&[ds.n_features(), 6, 1], 3).unwrap();
            let adversary = init_network(&[width, 5, 1], 4).unwrap();
            let alpha = 1.7;
            let g = batch_gradients(&predictor, Some(&adversary), strategy, ds.x.view(), y.view(), d.view(), alpha).unwrap();
            let composite = |n: &DenseNet| {
                let logits = n.logits(ds.x.view()).unwrap();
                let ly = bce_loss(logits.mapv(sigmoid).view(), y.view()).unwrap();
                let input = strategy.adversary_input(logits.view(), y.view()).unwrap();
                let q = adversary.logits(input.view()).unwrap().mapv(sigmoid);
                coupled_loss(ly, bce_loss(q.view(), d.view()).unwrap(), alpha)
            };
            let num = numeric_gradient(composite, &predictor, 1e-6).unwrap();
            for (a, b) in g.predictor.flatten().iter().zip(num.flatten()) {
                let err = (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
                assert!(err <= 1e-4, "{} analytic {a} numeric {b}", strategy.name());
            }
        }
    }

    #[test]
    fn adversary_term_is_minus_alpha_times_input_gradient() {
        let ds = synthetic(10, 2);
        let y: Array1<f64> = ds.y.iter().map(|&v| v as f64).collect();
        let d: Array1<f64> = ds.d.iter().map(|&v| v as f64).collect();
        let predictor = init_network(&[ds.n_features(), 4, 1], 5).unwrap();
        let adversary = init_network(&[1, 3, 1], 6).unwrap();
        let base = batch_gradients(&predictor, Some(&adversary), &Parity, ds.x.view(), y.view(), d.view(), 0.0).unwrap();
        let one = batch_gradients(&predictor, Some(&adversary), &Parity, ds.x.view(), y.view(), d.view(), 1.0).unwrap();
        let two = batch_gradients(&predictor, Some(&adversary), &Parity, ds.x.view(), y.view(), d.view(), 2.0).unwrap();
        // gradient is affine in alpha
        for ((b, o), t) in base.predictor.flatten().iter().zip(one.predictor.flatten()).zip(two.predictor.flatten()) {
            assert!(((t - b) - 2.0 * (o - b)).abs() < 1e-12);
        }
        assert_eq!(base.loss_d, one.loss_d);
    }

    #[test]
    fn training_is_deterministic() {
        let tr = synthetic(200, 3);
        let va = synthetic(120, 4);
        let a = train(&tr, &va, &quick("parity", 1.0)).unwrap();
        let b = train(&tr, &va, &quick("parity", 1.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 4);
        assert!(a.adversary.is_some());
    }

    #[test]
    fn alpha_zero_reduces_to_baseline() {
        let tr = synthetic(200, 5);
        let va = synthetic(120, 6);
        let base = train(&tr, &va, &quick("baseline", 0.0)).unwrap();
        for mode in ["parity", "eq_odds"] {
            let adv = train(&tr, &va, &quick(mode, 0.0)).unwrap();
            assert_eq!(adv.predictor, base.predictor, "{mode}");
            assert_eq!(adv.selected_epoch, base.selected_epoch);
            assert!(base.adversary.is_none() && adv.adversary.is_some());
        }
    }

    #[test]
    fn adversary_step_touches_only_adversary() {
        let ds = synthetic(16, 8);
        let y: Array1<f64> = ds.y.iter().map(|&v| v as f64).collect();
        let d: Array1<f64> = ds.d.iter().map(|&v| v as f64).collect();
        let mut predictor = init_network(&[ds.n_features(), 4, 1], 1).unwrap();
        let mut adversary = init_network(&[1, 3, 1], 2).unwrap();
        let g = batch_gradients(&predictor, Some(&adversary), &Parity, ds.x.view(), y.view(), d.view(), 1.0).unwrap();

        let (p0, a0) = (predictor.clone(), adversary.clone());
        let mut a_state = AdamState::new(&adversary);
        adam_step(&mut adversary, g.adversary.as_ref().unwrap(), &mut a_state, 1e-3).unwrap();
        assert_eq!(predictor, p0);
        assert_ne!(adversary, a0);

        let a1 = adversary.clone();
        let mut p_state = AdamState::new(&predictor);
        adam_step(&mut predictor, &g.predictor, &mut p_state, 1e-3).unwrap();
        assert_eq!(adversary, a1);
        assert_ne!(predictor, p0);
    }

    #[test]
    fn predict_batch_equals_rows() {
        let tr = synthetic(150, 9);
        let pair = train(&tr, &tr, &quick("baseline", 0.0)).unwrap();
        let all = pair.predict(tr.x.view()).unwrap();
        for (i, p) in all.iter().enumerate().take(20) {
            let row = tr.x.select(Axis(0), &[i]);
            assert_eq!(pair.predict(row.view()).unwrap(), vec![*p]);
            assert!(*p > 0.0 && *p < 1.0);
        }
        assert!(matches!(pair.predict(array![[1.0, 2.0]].view()), Err(TrainError::SchemaMismatch(_))));
    }

    #[test]
    fn zero_predictor_predicts_half() {
        let tr = synthetic(80, 10);
        let mut pair = train(&tr, &tr, &TrainConfig { epochs: 1, ..quick("baseline", 0.0) }).unwrap();
        pair.predictor = DenseNet::zeros(pair.predictor.dims()).unwrap();
        assert!(pair.predict(tr.x.view()).unwrap().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn rejects_bad_config() {
        let tr = synthetic(20, 11);
        for cfg in [
            TrainConfig { alpha: f64::NAN, ..quick("parity", 1.0) },
            TrainConfig { lr: 0.0, ..quick("parity", 1.0) },
            TrainConfig { batch_size: 0, ..quick("parity", 1.0) },
            TrainConfig { predictor_hidden: vec![0], ..quick("parity", 1.0) },
        ] {
            assert!(matches!(train(&tr, &tr, &cfg), Err(TrainError::InvalidConfig(_))));
        }
        assert!(matches!(train(&tr, &tr, &quick("hidden", 1.0)), Err(TrainError::UnknownMode { .. })));
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut tr = synthetic(20, 12);
        tr.x[[3, 2]] = f64::NAN;
        match train(&tr, &synthetic(20, 13), &quick("parity", 1.0)) {
            Err(TrainError::NonFiniteLoss { epoch: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(stream_seed(0, 0), stream_seed(0, 1));
        assert_ne!(stream_seed(0, 1), stream_seed(1, 1));
    }
}
