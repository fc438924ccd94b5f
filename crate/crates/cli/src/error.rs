use ttrals::TtError;

/// Harness-level failures that are not solver errors.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
}

/// Process exit code for an error: 1 usage or input, 2 numerical failure,
/// 3 resource cap exceeded.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<TtError>() {
            return match e {
                TtError::DenseCapExceeded { .. } => 3,
                TtError::Numerical(_) => 2,
                _ => 1,
            };
        }
    }
    1
}
