//! Process exit codes by error class.

use crowdfuse::Error;

pub const OK: i32 = 0;
pub const OTHER: i32 = 1;
pub const INPUT: i32 = 2;
pub const CONFLICT: i32 = 3;
pub const NUMERIC: i32 = 4;

/// 2 for bad input or dimensions, 3 for constraint conflicts, 4 for numeric failure.
pub fn code(err: &anyhow::Error) -> i32 {
    if let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) {
        return match e {
            Error::Conflict { .. } | Error::LabelConflict { .. } => CONFLICT,
            Error::Numeric(_) => NUMERIC,
            _ => INPUT,
        };
    }
    if err.chain().any(|c| c.is::<std::io::Error>() || c.is::<serde_json::Error>() || c.is::<csv::Error>()) {
        return INPUT;
    }
    if err.chain().any(|c| c.is::<UsageError>()) {
        return INPUT;
    }
    OTHER
}

/// Invalid combination of command-line options.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Fails with a [`UsageError`].
#[macro_export]
macro_rules! usage {
    ($($arg:tt)*) => {
        return Err($crate::exit::UsageError(format!($($arg)*)).into())
    };
}
