use std::fmt;

use advfair::data::DataError;
use advfair::explain::ExplainError;
use advfair::pipeline::PipelineError;
use advfair::report::ReportError;
use advfair::train::TrainError;

/// Process exit status, by failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Usage = 2,
    Config = 3,
    Data = 4,
    Numeric = 5,
    /// Anything else (output paths not writable, ...).
    Other = 1,
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl Failure {
    pub fn new(class: Class, message: impl Into<String>) -> Self {
        Failure { class, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure::new(Class::Config, message)
    }

    pub fn code(&self) -> i32 {
        self.class as i32
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.class {
            Class::Usage => "usage error",
            Class::Config => "config error",
            Class::Data => "data error",
            Class::Numeric => "numeric failure",
            Class::Other => "error",
        };
        write!(f, "{kind}: {}", self.message)
    }
}

fn train_class(e: &TrainError) -> Class {
    match e {
        TrainError::UnknownMode { .. } | TrainError::InvalidConfig(_) => Class::Config,
        TrainError::EmptyDataset(_) | TrainError::SchemaMismatch(_) | TrainError::Data(_) => Class::Data,
        _ => Class::Numeric,
    }
}

fn report_class(e: &ReportError) -> Class {
    match e {
        ReportError::Config { .. } | ReportError::UnknownFormat(_) => Class::Config,
        ReportError::Io { .. } | ReportError::Json(_) => Class::Other,
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let class = match &e {
            PipelineError::Config(_) => Class::Config,
            PipelineError::Data(_) | PipelineError::Checkpoint(_) => Class::Data,
            PipelineError::Train(t) => train_class(t),
            PipelineError::Metric(_) => Class::Numeric,
            PipelineError::Explain(x) => match x {
                ExplainError::InvalidRepeats => Class::Config,
                ExplainError::EmptyTest | ExplainError::SchemaMismatch(_) => Class::Data,
                ExplainError::Metric(_) => Class::Numeric,
                ExplainError::Train(t) => train_class(t),
            },
            PipelineError::Report(r) => report_class(r),
            PipelineError::Io { .. } => Class::Other,
        };
        Failure::new(class, e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::new(report_class(&e), e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::new(Class::Data, e.to_string())
    }
}

impl From<ExplainError> for Failure {
    fn from(e: ExplainError) -> Self {
        PipelineError::from(e).into()
    }
}
