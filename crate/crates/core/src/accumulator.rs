//! Log-space accumulation of determinant products.
//!
//! Products of characteristic polynomials span hundreds of orders of
//! magnitude, so all sums are kept relative to a running max offset:
//! a stored sum S at offset M represents Σ_i sign_i e^{y_i - M}.

/// Sign-aware accumulator of values given as (log magnitude, sign).
#[derive(Debug, Clone)]
pub struct LogProductAccumulator {
    offset: f64,
    sum: f64,
    sum_sq: f64,
    count: usize,
}

impl Default for LogProductAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LogProductAccumulator {
    pub fn new() -> Self {
        Self { offset: f64::NEG_INFINITY, sum: 0.0, sum_sq: 0.0, count: 0 }
    }

    pub fn push(&mut self, log_mag: f64, sign: f64) {
        if log_mag > self.offset {
            let scale = (self.offset - log_mag).exp(); // 0 on the first push
            self.sum *= scale;
            self.sum_sq *= scale * scale;
            self.offset = log_mag;
        }
        let v = (log_mag - self.offset).exp();
        self.sum += sign * v;
        self.sum_sq += v * v;
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn merge(&mut self, other: &LogProductAccumulator) {
        if other.count == 0 {
            return;
        }
        if other.offset > self.offset {
            let scale = (self.offset - other.offset).exp();
            self.sum *= scale;
            self.sum_sq *= scale * scale;
            self.offset = other.offset;
        }
        let scale = (other.offset - self.offset).exp();
        self.sum += other.sum * scale;
        self.sum_sq += other.sum_sq * scale * scale;
        self.count += other.count;
    }

    /// Sample mean, possibly overflowing to ±inf if e^offset does.
    pub fn mean(&self) -> f64 {
        (self.sum / self.count as f64) * self.offset.exp()
    }

    /// (log |mean|, sign of mean) without leaving log space.
    pub fn log_mean(&self) -> (f64, f64) {
        let m = self.sum / self.count as f64;
        (self.offset + m.abs().ln(), m.signum())
    }

    /// Sample variance of the accumulated values (not of the mean).
    pub fn variance(&self) -> f64 {
        let c = self.count as f64;
        let m = self.sum / c;
        let v = (self.sum_sq / c - m * m).max(0.0) * c / (c - 1.0);
        v * (2.0 * self.offset).exp()
    }
}

/// Joint accumulator for a correlated (numerator, denominator) pair of
/// log-space means, as needed by the ratio estimator of F̄₂.
///
/// Tracks Σ N_i, Σ N_i², Σ D_i, Σ D_i², Σ N_i D_i at per-side offsets
/// (cross products at the combined offset), so the delta-method variance
/// of the ratio of means is available at any time.
#[derive(Debug, Clone)]
pub struct RatioAccumulator {
    off_n: f64,
    off_d: f64,
    sn: f64,
    sn2: f64,
    sd: f64,
    sd2: f64,
    snd: f64,
    count: usize,
}

impl Default for RatioAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl RatioAccumulator {
    pub fn new() -> Self {
        Self {
            off_n: f64::NEG_INFINITY,
            off_d: f64::NEG_INFINITY,
            sn: 0.0,
            sn2: 0.0,
            sd: 0.0,
            sd2: 0.0,
            snd: 0.0,
            count: 0,
        }
    }

    fn rescale_n(&mut self, new_off: f64) {
        let s = (self.off_n - new_off).exp();
        self.sn *= s;
        self.sn2 *= s * s;
        self.snd *= s;
        self.off_n = new_off;
    }

    fn rescale_d(&mut self, new_off: f64) {
        let s = (self.off_d - new_off).exp();
        self.sd *= s;
        self.sd2 *= s * s;
        self.snd *= s;
        self.off_d = new_off;
    }

    pub fn push(&mut self, log_n: f64, sign_n: f64, log_d: f64, sign_d: f64) {
        if log_n > self.off_n {
            self.rescale_n(log_n);
        }
        if log_d > self.off_d {
            self.rescale_d(log_d);
        }
        let vn = sign_n * (log_n - self.off_n).exp();
        let vd = sign_d * (log_d - self.off_d).exp();
        self.sn += vn;
        self.sn2 += vn * vn;
        self.sd += vd;
        self.sd2 += vd * vd;
        self.snd += vn * vd;
        self.count += 1;
    }

    /// Merge another accumulator; associative, so per-stream partials can
    /// be combined in fixed stream order for determinism.
    pub fn merge(&mut self, other: &RatioAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        if other.off_n > self.off_n {
            self.rescale_n(other.off_n);
        }
        if other.off_d > self.off_d {
            self.rescale_d(other.off_d);
        }
        let sn_scale = (other.off_n - self.off_n).exp();
        let sd_scale = (other.off_d - self.off_d).exp();
        self.sn += other.sn * sn_scale;
        self.sn2 += other.sn2 * sn_scale * sn_scale;
        self.sd += other.sd * sd_scale;
        self.sd2 += other.sd2 * sd_scale * sd_scale;
        self.snd += other.snd * sn_scale * sd_scale;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Ratio of means: mean(N) / mean(D).
    pub fn ratio(&self) -> f64 {
        (self.sn / self.sd) * (self.off_n - self.off_d).exp()
    }

    /// Delta-method standard error of the ratio of correlated means.
    /// All offset factors cancel inside the relative-variance terms.
    pub fn stderr(&self) -> f64 {
        let c = self.count as f64;
        if c < 2.0 {
            return f64::NAN;
        }
        let mn = self.sn / c;
        let md = self.sd / c;
        let rel_nn = (self.sn2 / c - mn * mn) / (mn * mn);
        let rel_dd = (self.sd2 / c - md * md) / (md * md);
        let rel_nd = (self.snd / c - mn * md) / (mn * md);
        let var = (rel_nn + rel_dd - 2.0 * rel_nd).max(0.0) / (c - 1.0);
        self.ratio().abs() * var.sqrt()
    }

    /// Effective-sample-size diagnostic for the (positive) denominator
    /// weights: mean² / mean-of-squares, in (0, 1].
    pub fn ess_ratio(&self) -> f64 {
        let c = self.count as f64;
        let md = self.sd / c;
        (md * md) / (self.sd2 / c)
    }
}
