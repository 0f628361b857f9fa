//! Minimum-interval rate limiter for metered providers.
//!
//! Successive acquisitions are spaced at least `1/rate` seconds apart, so
//! with an integer budget of r requests/second no 1-second window ever sees
//! more than r outbound calls. Timestamps are caller-supplied microseconds,
//! which keeps the window property directly testable with a synthetic
//! clock; [`RateLimiter::acquire_blocking`] drives it from a monotonic
//! clock and sleeps out the waits.

use std::time::Instant;

#[derive(Debug)]
pub struct RateLimiter {
    interval_micros: u64,
    next_allowed: u64,
    started: Instant,
}

impl RateLimiter {
    /// A limiter admitting `rate_per_sec` calls per second. Rates are
    /// clamped to a sane minimum so a zero/negative budget cannot deadlock
    /// the pipeline.
    pub fn new(rate_per_sec: f64) -> Self {
        let rate = if rate_per_sec.is_finite() && rate_per_sec > 0.0 {
            rate_per_sec
        } else {
            1.0
        };
        RateLimiter {
            interval_micros: (1_000_000.0 / rate).ceil() as u64,
            next_allowed: 0,
            started: Instant::now(),
        }
    }

    /// Tries to take one slot at time `now_micros`. On success the next
    /// slot moves `1/rate` into the future; on failure the required wait is
    /// returned.
    pub fn acquire_at(&mut self, now_micros: u64) -> Result<(), u64> {
        if now_micros >= self.next_allowed {
            self.next_allowed = now_micros + self.interval_micros;
            Ok(())
        } else {
            Err(self.next_allowed - now_micros)
        }
    }

    /// Blocks until a slot is available on the real clock.
    pub fn acquire_blocking(&mut self) {
        loop {
            let now = self.started.elapsed().as_micros() as u64;
            match self.acquire_at(now) {
                Ok(()) => return,
                Err(wait) => std::thread::sleep(std::time::Duration::from_micros(wait)),
            }
        }
    }
}
