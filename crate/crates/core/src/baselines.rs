//! Error-rate-based reference detectors: DDM and the Page-Hinkley test.
//!
//! Both consume the per-instance 0/1 error indicator. They are the
//! head-to-head baselines for the claim that PU-index detection can fire
//! when the error rate carries no drift signal at all.

/// Status reported by a baseline detector after each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectorStatus {
    #[default]
    Stable,
    Warning,
    Drift,
}

/// Drift Detection Method over a Bernoulli error stream.
///
/// Tracks the running error probability `p` and its standard deviation
/// `s = sqrt(p (1 - p) / n)`, remembers the historical minimum of
/// `p + s`, and signals when the current value exceeds the minimum by a
/// multiple of `s_min`. Conventional coefficients: warning at 2, drift
/// at 3, with detection suppressed for the first 30 instances.
#[derive(Debug, Clone)]
pub struct DdmState {
    n: u64,
    p: f64,
    s: f64,
    p_min: f64,
    s_min: f64,
    warn_coeff: f64,
    drift_coeff: f64,
    min_instances: u64,
}

impl Default for DdmState {
    fn default() -> Self {
        Self::new()
    }
}

impl DdmState {
    pub fn new() -> Self {
        Self::with_coefficients(2.0, 3.0)
    }

    pub fn with_coefficients(warn_coeff: f64, drift_coeff: f64) -> Self {
        Self {
            n: 0,
            p: 0.0,
            s: 0.0,
            p_min: f64::MAX,
            s_min: f64::MAX,
            warn_coeff,
            drift_coeff,
            min_instances: 30,
        }
    }

    pub fn error_rate(&self) -> f64 {
        self.p
    }

    pub fn instances(&self) -> u64 {
        self.n
    }

    /// Feeds one error indicator and returns the new status. Minima are
    /// reset when drift is signalled so a fresh baseline is recorded.
    pub fn update(&mut self, error: bool) -> DetectorStatus {
        self.n += 1;
        let e = if error { 1.0 } else { 0.0 };
        self.p += (e - self.p) / self.n as f64;
        self.s = (self.p * (1.0 - self.p) / self.n as f64).sqrt();
        if self.n < self.min_instances {
            return DetectorStatus::Stable;
        }
        if self.p + self.s < self.p_min + self.s_min {
            self.p_min = self.p;
            self.s_min = self.s;
        }
        if self.p + self.s > self.p_min + self.drift_coeff * self.s_min {
            self.p_min = f64::MAX;
            self.s_min = f64::MAX;
            DetectorStatus::Drift
        } else if self.p + self.s > self.p_min + self.warn_coeff * self.s_min {
            DetectorStatus::Warning
        } else {
            DetectorStatus::Stable
        }
    }

    pub fn reset(&mut self) {
        *self = Self::with_coefficients(self.warn_coeff, self.drift_coeff);
    }
}

/// Page-Hinkley test for an upward shift in the error mean.
///
/// Accumulates `m_t += x - mean - delta` and alarms when `m_t` rises more
/// than `lambda` above its historical minimum.
#[derive(Debug, Clone)]
pub struct PageHinkleyState {
    n: u64,
    mean: f64,
    m_t: f64,
    min_m: f64,
    delta: f64,
    lambda: f64,
}

impl Default for PageHinkleyState {
    fn default() -> Self {
        Self::new()
    }
}

impl PageHinkleyState {
    pub fn new() -> Self {
        Self::with_thresholds(0.005, 50.0)
    }

    pub fn with_thresholds(delta: f64, lambda: f64) -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m_t: 0.0,
            min_m: 0.0,
            delta,
            lambda,
        }
    }

    /// Current deviation above the minimum, always non-negative.
    pub fn deviation(&self) -> f64 {
        self.m_t - self.min_m
    }

    pub fn update(&mut self, error: bool) -> DetectorStatus {
        self.n += 1;
        let x = if error { 1.0 } else { 0.0 };
        self.mean += (x - self.mean) / self.n as f64;
        self.m_t += x - self.mean - self.delta;
        if self.m_t < self.min_m {
            self.min_m = self.m_t;
        }
        if self.m_t - self.min_m > self.lambda {
            DetectorStatus::Drift
        } else {
            DetectorStatus::Stable
        }
    }

    pub fn reset(&mut self) {
        *self = Self::with_thresholds(self.delta, self.lambda);
    }
}
