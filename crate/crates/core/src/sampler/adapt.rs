//! Warmup adaptation: dual averaging of the step size and a diagonal
//! metric estimated over doubling windows.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;

const GAMMA: f64 = 0.05;
const KAPPA: f64 = 0.75;
const T0: f64 = 10.0;

const INIT_BUFFER: usize = 75;
const TERM_BUFFER: usize = 50;
const BASE_WINDOW: usize = 25;

/// Nesterov dual averaging towards a target acceptance statistic.
#[derive(Debug, Clone)]
pub(crate) struct DualAveraging {
    delta: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub(crate) fn new(delta: f64) -> Self {
        Self { delta, mu: 0.0, counter: 0.0, s_bar: 0.0, x_bar: 0.0 }
    }

    /// Restarts the averages around `log(10 ε)`.
    pub(crate) fn restart(&mut self, step_size: f64) {
        self.mu = (10.0 * step_size).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    pub(crate) fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / GAMMA;
        let x_eta = self.counter.powf(-KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    pub(crate) fn averaged(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Welford running mean and variance.
#[derive(Debug, Clone)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    fn restart(&mut self) {
        self.n = 0;
        self.mean.iter_mut().for_each(|m| *m = 0.0);
        self.m2.iter_mut().for_each(|m| *m = 0.0);
    }
}

/// Three-phase warmup: a fast initial buffer, slow doubling windows that
/// estimate the metric, and a fast terminal buffer.
#[derive(Debug, Clone)]
pub(crate) struct WindowedAdapter {
    num_warmup: usize,
    adapt_metric: bool,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    estimator: Welford,
    step: DualAveraging,
    learned: bool,
}

impl WindowedAdapter {
    pub(crate) fn new(num_warmup: usize, dim: usize, target_accept: f64) -> Self {
        let (mut init_buffer, mut term_buffer, mut base) = (INIT_BUFFER, TERM_BUFFER, BASE_WINDOW);
        let adapt_metric = num_warmup >= 20;
        if adapt_metric && init_buffer + base + term_buffer > num_warmup {
            init_buffer = (0.15 * num_warmup as f64) as usize;
            term_buffer = (0.1 * num_warmup as f64) as usize;
            base = num_warmup - (init_buffer + term_buffer);
        }
        Self {
            num_warmup,
            adapt_metric,
            init_buffer,
            term_buffer,
            window_size: base,
            next_window: init_buffer + base - 1,
            counter: 0,
            estimator: Welford::new(dim),
            step: DualAveraging::new(target_accept),
            learned: false,
        }
    }

    pub(crate) fn set_mu(&mut self, step_size: f64) {
        self.step.restart(step_size);
    }

    pub(crate) fn learn_step_size(&mut self, accept_stat: f64) -> f64 {
        self.learned = true;
        self.step.learn(accept_stat)
    }

    /// Averaged step size to use after warmup.
    pub(crate) fn final_step_size(&self) -> Option<f64> {
        self.learned.then(|| self.step.averaged())
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.num_warmup - self.term_buffer
            && self.counter != self.num_warmup
    }

    fn window_end(&self) -> bool {
        self.counter == self.next_window && self.counter != self.num_warmup
    }

    fn compute_next_window(&mut self) {
        let last = self.num_warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last && self.next_window + 2 * self.window_size >= self.num_warmup - self.term_buffer {
            self.next_window = last;
        }
    }

    /// Feeds one warmup draw; returns true when the metric was updated.
    pub(crate) fn learn_variance(&mut self, inv_metric: &mut [f64], q: &[f64]) -> bool {
        if !self.adapt_metric {
            return false;
        }
        if self.in_window() {
            self.estimator.add(q);
        }
        let updated = self.window_end();
        if updated {
            self.compute_next_window();
            let n = self.estimator.n as f64;
            for (m, &s) in inv_metric.iter_mut().zip(&self.estimator.m2) {
                let var = s / (n - 1.0);
                *m = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
            }
            self.estimator.restart();
        }
        self.counter += 1;
        updated
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_ends(num_warmup: usize) -> Vec<usize> {
        let mut a = WindowedAdapter::new(num_warmup, 1, 0.8);
        let mut m = [1.0];
        (0..num_warmup).filter(|&t| a.learn_variance(&mut m, &[t as f64])).collect()
    }

    #[test]
    fn default_schedule() {
        assert_eq!(window_ends(1000), [99, 149, 249, 449, 949]);
    }

    #[test]
    fn short_warmup_schedule() {
        // 15% / 75% / 10%: a single slow window
        assert_eq!(window_ends(100), [89]);
        assert!(window_ends(10).is_empty());
    }

    #[test]
    fn regularized_variance() {
        let mut a = WindowedAdapter::new(100, 1, 0.8);
        let mut m = [1.0];
        for t in 0..100 {
            a.learn_variance(&mut m, &[(t % 2) as f64]);
        }
        // 75 window draws alternating 1,0 from t = 15 (start 1)
        let n = 75.0;
        let mean = 38.0 / n;
        let var = (38.0 * (1.0 - mean) * (1.0 - mean) + 37.0 * mean * mean) / (n - 1.0);
        let expected = n / (n + 5.0) * var + 1e-3 * 5.0 / (n + 5.0);
        assert!((m[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_averaging_moves_against_acceptance() {
        let mut d = DualAveraging::new(0.8);
        d.restart(1.0);
        let up = d.learn(1.0);
        d.restart(1.0);
        let down = d.learn(0.0);
        assert!(up > down);
    }
}
