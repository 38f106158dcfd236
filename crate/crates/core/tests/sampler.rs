use crowdirt_core::sampler::{run_chains, Algorithm, LogDensity, SamplerConfig};
use crowdirt_core::{Error, Result};

/// Independent Gaussian with per-coordinate scales.
struct Gaussian {
    scales: Vec<f64>,
}

impl LogDensity for Gaussian {
    fn dim(&self) -> usize {
        self.scales.len()
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut lp = 0.0;
        for ((g, &xi), &s) in grad.iter_mut().zip(x).zip(&self.scales) {
            lp -= 0.5 * xi * xi / (s * s);
            *g = -xi / (s * s);
        }
        Ok(lp)
    }
}

/// Bivariate Gaussian with correlation `rho`.
struct Correlated {
    rho: f64,
}

impl LogDensity for Correlated {
    fn dim(&self) -> usize {
        2
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let d = 1.0 - self.rho * self.rho;
        let (a, b) = (x[0], x[1]);
        grad[0] = -(a - self.rho * b) / d;
        grad[1] = -(b - self.rho * a) / d;
        Ok(-0.5 * (a * a - 2.0 * self.rho * a * b + b * b) / d)
    }
}

struct Nowhere;

impl LogDensity for Nowhere {
    fn dim(&self) -> usize {
        3
    }

    fn log_density_and_grad(&self, _: &[f64], _: &mut [f64]) -> Result<f64> {
        Err(Error::NonFinite("log density"))
    }
}

fn config(seed: u64) -> SamplerConfig {
    SamplerConfig { seed, ..SamplerConfig::default() }
}

#[test]
fn standard_gaussian_moments() {
    let target = Gaussian { scales: vec![1.0; 5] };
    let draws = run_chains(&target, &config(11)).unwrap();
    assert_eq!(draws.total(), 4000);
    for d in 0..5 {
        let xs: Vec<f64> = draws.iter().map(|q| q[d]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let cols = draws.column(d);
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let ess = crowdirt_core::sampler::ess_bulk(&refs).unwrap();
        let mcse = (var / ess).sqrt();
        assert!(mean.abs() < 4.0 * mcse, "coord {d}: mean {mean}, mcse {mcse}");
        assert!((var - 1.0).abs() < 0.1, "coord {d}: var {var}");
    }
    assert_eq!(draws.divergences(), 0);
}

#[test]
fn scaled_gaussian_adapts_metric() {
    let target = Gaussian { scales: vec![0.01, 1.0, 100.0] };
    let draws = run_chains(&target, &config(5)).unwrap();
    let metric = &draws.adaptation[0].inv_metric;
    assert!(metric[2] / metric[0] > 1e6);
    for (d, s) in [0.01, 1.0, 100.0].iter().enumerate() {
        let xs: Vec<f64> = draws.iter().map(|q| q[d]).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var / (s * s) - 1.0).abs() < 0.15, "coord {d}: {var}");
    }
}

#[test]
fn correlated_covariance_converges() {
    let target = Correlated { rho: 0.8 };
    for seed in 0..3 {
        let cfg = SamplerConfig { chains: 4, sampling_iters: 2000, ..config(seed) };
        let draws = run_chains(&target, &cfg).unwrap();
        let n = draws.total() as f64;
        let mut c = [[0.0; 2]; 2];
        for q in draws.iter() {
            for a in 0..2 {
                for b in 0..2 {
                    c[a][b] += q[a] * q[b] / n;
                }
            }
        }
        let truth = [[1.0, 0.8], [0.8, 1.0]];
        let frob: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| (c[a][b] - truth[a][b]).powi(2)).sum::<f64>().sqrt();
        assert!(frob < 0.1, "seed {seed}: {frob}");
    }
}

#[test]
fn same_seed_same_draws() {
    let target = Gaussian { scales: vec![1.0, 2.0] };
    let cfg = SamplerConfig { warmup_iters: 200, sampling_iters: 100, ..config(9) };
    let a = run_chains(&target, &cfg).unwrap();
    let b = run_chains(&target, &cfg).unwrap();
    assert_eq!(a, b);
    let c = run_chains(&target, &SamplerConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.values(), c.values());
}

#[test]
fn chains_use_distinct_streams() {
    let target = Gaussian { scales: vec![1.0] };
    let cfg = SamplerConfig { chains: 2, warmup_iters: 50, sampling_iters: 50, ..config(1) };
    let draws = run_chains(&target, &cfg).unwrap();
    assert_ne!(draws.column(0)[0], draws.column(0)[1]);
}

#[test]
fn static_hmc_fallback_samples_gaussian() {
    let target = Gaussian { scales: vec![1.0; 3] };
    let cfg = SamplerConfig { algorithm: Algorithm::StaticHmc { steps: 10 }, ..config(3) };
    let draws = run_chains(&target, &cfg).unwrap();
    let xs: Vec<f64> = draws.iter().map(|q| q[0]).collect();
    let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    assert!((var - 1.0).abs() < 0.15, "{var}");
}

#[test]
fn initialization_failure() {
    let err = run_chains(&Nowhere, &config(0)).unwrap_err();
    assert_eq!(err, Error::InitializationFailed { attempts: 100 });
}

#[test]
fn invalid_configs() {
    let target = Gaussian { scales: vec![1.0] };
    for cfg in [
        SamplerConfig { chains: 0, ..config(0) },
        SamplerConfig { sampling_iters: 0, ..config(0) },
        SamplerConfig { target_accept: 1.0, ..config(0) },
    ] {
        assert!(matches!(run_chains(&target, &cfg), Err(Error::InvalidConfig(_))));
    }
}

#[test]
fn tiny_warmup_still_samples() {
    let target = Gaussian { scales: vec![1.0] };
    let cfg = SamplerConfig { warmup_iters: 5, sampling_iters: 20, ..config(2) };
    let draws = run_chains(&target, &cfg).unwrap();
    assert_eq!(draws.adaptation[0].inv_metric, vec![1.0]);
}
