//! Exponential backoff with jitter.

use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total calls allowed, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub multiplier: f64,
    /// Relative jitter: each delay is scaled by a factor in `[1 - j, 1 + j]`.
    pub jitter: f64,
    /// Upper bound on a single delay before jitter.
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay: Duration::from_secs(1), multiplier: 2.0, jitter: 0.2, max_delay: Duration::from_secs(60) }
    }
}

impl RetryPolicy {
    pub fn no_jitter(mut self) -> Self {
        self.jitter = 0.0;
        self
    }

    /// Un-jittered delay before retry number `retry` (0 = first retry).
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        let factor = self.multiplier.powi(retry.min(i32::MAX as u32) as i32);
        let secs = (self.base_delay.as_secs_f64() * factor).min(self.max_delay.as_secs_f64());
        Duration::from_secs_f64(secs.max(0.0))
    }

    pub fn delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let nominal = self.nominal_delay(retry);
        if self.jitter <= 0.0 {
            return nominal;
        }
        let j = self.jitter.min(1.0);
        nominal.mul_f64(rng.gen_range(1.0 - j..=1.0 + j))
    }
}

/// Error classification for [`with_retry`].
pub trait Retryable {
    fn is_retryable(&self) -> bool;

    /// Server-provided wait hint, if any.
    fn retry_after(&self) -> Option<Duration> {
        None
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RetryError<E> {
    #[error("{0}")]
    Fatal(E),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: E },
}

impl<E> RetryError<E> {
    pub fn into_inner(self) -> E {
        match self {
            RetryError::Fatal(e) | RetryError::Exhausted { last: e, .. } => e,
        }
    }
}

pub trait Clock: Send + Sync {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Records requested sleeps instead of blocking.
#[derive(Debug, Default)]
pub struct VirtualClock {
    sleeps: Mutex<Vec<Duration>>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.sleeps.lock().expect("clock lock").clone()
    }

    pub fn elapsed(&self) -> Duration {
        self.sleeps().iter().sum()
    }
}

impl Clock for VirtualClock {
    fn sleep(&self, duration: Duration) {
        self.sleeps.lock().expect("clock lock").push(duration);
    }
}

/// Runs `action` until it succeeds, fails fatally, or the attempt budget is
/// spent. `action` receives the zero-based attempt number.
pub fn with_retry<T, E: Retryable>(
    policy: &RetryPolicy,
    clock: &dyn Clock,
    mut action: impl FnMut(u32) -> Result<T, E>,
) -> Result<T, RetryError<E>> {
    let max = policy.max_attempts.max(1);
    let mut rng = rand::thread_rng();
    let mut attempt = 0;
    loop {
        match action(attempt) {
            Ok(v) => return Ok(v),
            Err(e) if !e.is_retryable() => return Err(RetryError::Fatal(e)),
            Err(e) => {
                attempt += 1;
                if attempt >= max {
                    return Err(RetryError::Exhausted { attempts: attempt, last: e });
                }
                let wait = match e.retry_after() {
                    Some(hint) => hint.min(policy.max_delay),
                    None => policy.delay(attempt - 1, &mut rng),
                };
                tracing::debug!(attempt, ?wait, "retrying");
                clock.sleep(wait);
            }
        }
    }
}
