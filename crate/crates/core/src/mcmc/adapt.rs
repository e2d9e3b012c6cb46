//! Warmup adaptation: dual averaging for the step size and windowed
//! estimation of the inverse metric.

use alloc::vec;
use alloc::vec::Vec;

/// Nesterov dual averaging on `log(eps)`.
#[derive(Debug, Clone)]
pub struct StepsizeAdapter {
    delta: f64,
    mu: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl StepsizeAdapter {
    pub fn new(delta: f64, eps: f64) -> Self {
        StepsizeAdapter {
            delta,
            mu: libm::log(10.0 * eps),
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn learn(&mut self, accept: f64) -> f64 {
        self.counter += 1.0;
        let a = accept.min(1.0);
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - a);
        let x = self.mu - self.s_bar * libm::sqrt(self.counter) / self.gamma;
        let w = libm::pow(self.counter, -self.kappa);
        self.x_bar = (1.0 - w) * self.x_bar + w * x;
        libm::exp(x)
    }

    /// Final step size after warmup.
    pub fn complete(&self) -> f64 {
        libm::exp(self.x_bar)
    }
}

/// Fast/slow/fast window layout. Metric estimation happens in a series of
/// doubling windows between an initial and a terminal buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSchedule {
    n_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    enabled: bool,
}

impl WindowSchedule {
    pub fn new(n_warmup: usize) -> Self {
        let enabled = n_warmup >= 20;
        let init_buffer = (0.15 * n_warmup as f64) as usize;
        let term_buffer = (0.1 * n_warmup as f64) as usize;
        let window = 25.min(n_warmup - (init_buffer + term_buffer));
        WindowSchedule {
            n_warmup,
            init_buffer,
            term_buffer,
            window_size: window,
            next_window: (init_buffer + window).saturating_sub(1),
            counter: 0,
            enabled,
        }
    }

    pub fn in_window(&self) -> bool {
        self.enabled
            && self.counter >= self.init_buffer
            && self.counter + self.term_buffer < self.n_warmup
            && self.counter != self.n_warmup
    }

    pub fn end_of_window(&self) -> bool {
        self.enabled && self.counter == self.next_window && self.counter != self.n_warmup
    }

    pub fn compute_next_window(&mut self) {
        let last = self.n_warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last {
            let boundary = self.next_window + 2 * self.window_size;
            if boundary >= self.n_warmup - self.term_buffer {
                self.next_window = last;
            }
        }
    }

    pub fn advance(&mut self) {
        self.counter += 1;
    }
}

/// Welford running variance.
#[derive(Debug, Clone)]
pub struct VarEstimator {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VarEstimator {
    pub fn new(dim: usize) -> Self {
        VarEstimator { n: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1.0;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Sample variance shrunk towards `1e-3`.
    pub fn regularized(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|m| {
                let v = if n > 1.0 { m / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Welford running covariance, row-major.
#[derive(Debug, Clone)]
pub struct CovEstimator {
    n: f64,
    dim: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl CovEstimator {
    pub fn new(dim: usize) -> Self {
        CovEstimator { n: 0.0, dim, mean: vec![0.0; dim], m2: vec![0.0; dim * dim] }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1.0;
        let d = self.dim;
        let delta: Vec<f64> = (0..d).map(|i| x[i] - self.mean[i]).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / self.n;
        }
        for i in 0..d {
            for j in 0..d {
                self.m2[i * d + j] += (x[i] - self.mean[i]) * delta[j];
            }
        }
    }

    pub fn regularized(&self) -> Vec<f64> {
        let n = self.n;
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let c = if n > 1.0 { self.m2[i * d + j] / (n - 1.0) } else if i == j { 1.0 } else { 0.0 };
                out[i * d + j] = (n / (n + 5.0)) * c + if i == j { 1e-3 * (5.0 / (n + 5.0)) } else { 0.0 };
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_ends(n: usize) -> Vec<usize> {
        let mut s = WindowSchedule::new(n);
        let mut ends = Vec::new();
        for i in 0..n {
            if s.end_of_window() {
                ends.push(i);
                s.compute_next_window();
            }
            s.advance();
        }
        ends
    }

    #[test]
    fn default_windows_for_1000() {
        // 150 + 25, 50, 100, then the rest up to the terminal buffer
        assert_eq!(window_ends(1000), vec![174, 224, 324, 899]);
    }

    #[test]
    fn short_warmup_uses_proportional_buffers() {
        let s = WindowSchedule::new(100);
        assert_eq!((s.init_buffer, s.term_buffer, s.window_size), (15, 10, 25));
        assert_eq!(window_ends(100), vec![39, 89]);
        assert!(window_ends(10).is_empty());
    }

    #[test]
    fn dual_averaging_moves_towards_target() {
        let mut a = StepsizeAdapter::new(0.8, 1.0);
        // always accepting pushes the step size up
        let mut e = 0.0;
        for _ in 0..50 {
            e = a.learn(1.0);
        }
        assert!(e > 1.0);
        let mut b = StepsizeAdapter::new(0.8, 1.0);
        for _ in 0..50 {
            e = b.learn(0.1);
        }
        assert!(e < 1.0);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.5], [2.0, 4.0]];
        let mut v = VarEstimator::new(2);
        let mut c = CovEstimator::new(2);
        for x in &xs {
            v.add(x);
            c.add(x);
        }
        let n = xs.len() as f64;
        let m0 = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let m1 = xs.iter().map(|x| x[1]).sum::<f64>() / n;
        let v0 = xs.iter().map(|x| (x[0] - m0).powi(2)).sum::<f64>() / (n - 1.0);
        let c01 = xs.iter().map(|x| (x[0] - m0) * (x[1] - m1)).sum::<f64>() / (n - 1.0);
        let w = n / (n + 5.0);
        let reg = 1e-3 * 5.0 / (n + 5.0);
        assert!((v.regularized()[0] - (w * v0 + reg)).abs() < 1e-12);
        let cr = c.regularized();
        assert!((cr[0] - (w * v0 + reg)).abs() < 1e-12);
        assert!((cr[1] - w * c01).abs() < 1e-12);
        assert!((cr[1] - cr[2]).abs() < 1e-12);
    }
}
