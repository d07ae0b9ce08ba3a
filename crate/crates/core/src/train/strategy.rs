use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{stack, Array2, ArrayView1, Axis};

use super::TrainError;
use crate::metrics::FairnessReport;

/// One way of coupling an adversary to the predictor.
///
/// A strategy decides what the adversary sees and which fairness gap drives
/// checkpoint selection. Strategies are looked up by name in a
/// [`StrategyRegistry`].
pub trait DebiasStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Columns in the adversary's input, or `None` when no adversary is trained.
    fn adversary_input_width(&self) -> Option<usize>;

    /// Adversary input rows built from predictor logits and true labels.
    fn adversary_input(&self, logits: ArrayView1<f64>, labels: ArrayView1<f64>) -> Result<Array2<f64>, TrainError>;

    /// Gap that must fall under the selection limit, if this strategy has one.
    fn selection_gap(&self, report: &FairnessReport) -> Option<f64>;
}

impl fmt::Debug for dyn DebiasStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DebiasStrategy({})", self.name())
    }
}

/// Plain predictor, no adversary.
#[derive(Debug, Clone, Copy, Default)]
pub struct Baseline;

impl DebiasStrategy for Baseline {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn description(&self) -> &'static str {
        "predictor trained on recidivism loss alone"
    }

    fn adversary_input_width(&self) -> Option<usize> {
        None
    }

    fn adversary_input(&self, _logits: ArrayView1<f64>, _labels: ArrayView1<f64>) -> Result<Array2<f64>, TrainError> {
        Err(TrainError::NoAdversary)
    }

    fn selection_gap(&self, _report: &FairnessReport) -> Option<f64> {
        None
    }
}

/// Demographic parity: the adversary sees only the logit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parity;

impl DebiasStrategy for Parity {
    fn name(&self) -> &'static str {
        "parity"
    }

    fn description(&self) -> &'static str {
        "adversary predicts the group from the predictor logit"
    }

    fn adversary_input_width(&self) -> Option<usize> {
        Some(1)
    }

    fn adversary_input(&self, logits: ArrayView1<f64>, labels: ArrayView1<f64>) -> Result<Array2<f64>, TrainError> {
        check_lengths(logits, labels)?;
        Ok(logits.to_owned().insert_axis(Axis(1)))
    }

    fn selection_gap(&self, report: &FairnessReport) -> Option<f64> {
        Some(report.high_risk_gap)
    }
}

/// Equalized odds: the adversary sees the logit and the true label.
#[derive(Debug, Clone, Copy, Default)]
pub struct EqualizedOdds;

impl DebiasStrategy for EqualizedOdds {
    fn name(&self) -> &'static str {
        "eq_odds"
    }

    fn description(&self) -> &'static str {
        "adversary predicts the group from the logit and the true label"
    }

    fn adversary_input_width(&self) -> Option<usize> {
        Some(2)
    }

    fn adversary_input(&self, logits: ArrayView1<f64>, labels: ArrayView1<f64>) -> Result<Array2<f64>, TrainError> {
        check_lengths(logits, labels)?;
        Ok(stack(Axis(1), &[logits, labels]).expect("equal lengths"))
    }

    fn selection_gap(&self, report: &FairnessReport) -> Option<f64> {
        Some(report.max_error_gap())
    }
}

fn check_lengths(logits: ArrayView1<f64>, labels: ArrayView1<f64>) -> Result<(), TrainError> {
    if logits.len() != labels.len() {
        return Err(TrainError::LengthMismatch { logits: logits.len(), labels: labels.len() });
    }
    Ok(())
}

/// Name-indexed set of strategies.
#[derive(Clone, Default)]
pub struct StrategyRegistry {
    entries: BTreeMap<&'static str, Arc<dyn DebiasStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry::default()
    }

    /// `baseline`, `parity` and `eq_odds`.
    pub fn builtin() -> Self {
        let mut reg = StrategyRegistry::empty();
        reg.register(Arc::new(Baseline));
        reg.register(Arc::new(Parity));
        reg.register(Arc::new(EqualizedOdds));
        reg
    }

    /// Adds or replaces a strategy under its own name.
    pub fn register(&mut self, strategy: Arc<dyn DebiasStrategy>) {
        self.entries.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn DebiasStrategy>, TrainError> {
        self.entries.get(name).cloned().ok_or_else(|| TrainError::UnknownMode {
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

/// Adversary input for `strategy`; errors for strategies without an adversary.
pub fn adversary_input(
    strategy: &dyn DebiasStrategy,
    logits: ArrayView1<f64>,
    labels: ArrayView1<f64>,
) -> Result<Array2<f64>, TrainError> {
    strategy.adversary_input(logits, labels)
}
