use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Wall-clock budget plus an optional external stop flag.
#[derive(Debug, Clone, Default)]
pub struct Deadline {
    at: Option<Instant>,
    stop: Option<Arc<AtomicBool>>,
}

impl Deadline {
    pub fn never() -> Self {
        Self::default()
    }

    pub fn after(budget: Duration) -> Self {
        Deadline {
            at: Instant::now().checked_add(budget),
            stop: None,
        }
    }

    pub fn at(instant: Instant) -> Self {
        Deadline {
            at: Some(instant),
            stop: None,
        }
    }

    /// Also expire as soon as `flag` becomes true.
    pub fn with_stop_flag(mut self, flag: Arc<AtomicBool>) -> Self {
        self.stop = Some(flag);
        self
    }

    pub fn expired(&self) -> bool {
        if let Some(flag) = &self.stop {
            if flag.load(Ordering::Relaxed) {
                return true;
            }
        }
        self.at.is_some_and(|at| Instant::now() >= at)
    }
}
