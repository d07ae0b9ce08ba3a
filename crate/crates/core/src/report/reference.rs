/// A published result shown alongside our own numbers. These are cited
/// constants, never recomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub model: &'static str,
    pub accuracy: f64,
    pub fp_gap: f64,
    pub fn_gap: f64,
}

/// Accuracy and error-rate gaps reported by earlier COMPAS debiasing work.
pub const REPORTED_ROWS: [ReferenceRow; 6] = [
    ReferenceRow { model: "Bechavod et al. AVD Penalizers", accuracy: 0.65, fp_gap: 0.02, fn_gap: 0.04 },
    ReferenceRow { model: "Bechavod et al. SD Penalizers", accuracy: 0.66, fp_gap: 0.02, fn_gap: 0.03 },
    ReferenceRow { model: "Bechavod et al. Vanilla Regularized", accuracy: 0.67, fp_gap: 0.20, fn_gap: 0.30 },
    ReferenceRow { model: "Zafar et al.", accuracy: 0.66, fp_gap: 0.03, fn_gap: 0.11 },
    ReferenceRow { model: "Zafar et al. Baseline", accuracy: 0.66, fp_gap: 0.01, fn_gap: 0.09 },
    ReferenceRow { model: "Hardt et al.", accuracy: 0.65, fp_gap: 0.01, fn_gap: 0.01 },
];
