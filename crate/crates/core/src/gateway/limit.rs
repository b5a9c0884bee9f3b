use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Blocking token bucket: at most `burst + rate * w` acquisitions in any
/// window of length `w`.
#[derive(Debug)]
pub struct TokenBucket {
    rate_per_sec: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    /// `rate_per_sec <= 0` disables limiting. `burst` is raised to at least 1.
    pub fn new(rate_per_sec: f64, burst: u32) -> Self {
        let burst = f64::from(burst.max(1));
        Self { rate_per_sec, burst, state: Mutex::new((burst, Instant::now())) }
    }

    pub fn acquire(&self) {
        if self.rate_per_sec <= 0.0 || !self.rate_per_sec.is_finite() {
            return;
        }
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let (tokens, last) = *state;
                let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.rate_per_sec).min(self.burst);
                if tokens >= 1.0 {
                    *state = (tokens - 1.0, now);
                    return;
                }
                *state = (tokens, now);
                (1.0 - tokens) / self.rate_per_sec
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct InFlightGuard<'a> {
    owner: &'a InFlight,
}

impl InFlight {
    pub fn new(limit: usize) -> Self {
        Self { limit: limit.max(1), active: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        InFlightGuard { owner: self }
    }

    pub fn active(&self) -> usize {
        *self.active.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.owner.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.owner.freed.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn window_bound_holds() {
        let rate = 200.0;
        let burst = 3;
        let bucket = Arc::new(TokenBucket::new(rate, burst));
        let stamps = Arc::new(Mutex::new(Vec::new()));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let bucket = Arc::clone(&bucket);
                let stamps = Arc::clone(&stamps);
                std::thread::spawn(move || {
                    for _ in 0..15 {
                        bucket.acquire();
                        stamps.lock().unwrap().push(Instant::now());
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let mut t = stamps.lock().unwrap().clone();
        t.sort();
        for i in 0..t.len() {
            for j in i..t.len() {
                let w = t[j].duration_since(t[i]).as_secs_f64();
                let allowed = (rate * w).ceil() as usize + burst as usize;
                assert!(j - i < allowed, "{} requests in {w}s", j - i + 1);
            }
        }
    }

    #[test]
    fn unlimited_when_rate_zero() {
        let bucket = TokenBucket::new(0.0, 1);
        let start = Instant::now();
        for _ in 0..1000 {
            bucket.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(100));
    }

    #[test]
    fn inflight_caps_concurrency() {
        let gate = Arc::new(InFlight::new(2));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let gate = Arc::clone(&gate);
                let peak = Arc::clone(&peak);
                std::thread::spawn(move || {
                    let _g = gate.acquire();
                    peak.fetch_max(gate.active(), Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(gate.active(), 0);
    }
}
