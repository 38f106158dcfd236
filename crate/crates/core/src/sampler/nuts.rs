//! Multinomial no-U-turn transitions and the static HMC fallback.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Algorithm, LogDensity, SamplerConfig};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;

const MAX_DELTA_H: f64 = 1000.0;

/// Phase-space point: position, momentum, log density and its gradient.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub g: Vec<f64>,
    pub lp: f64,
}

impl Point {
    pub(crate) fn new(q: Vec<f64>, g: Vec<f64>, lp: f64) -> Self {
        let p = vec![0.0; q.len()];
        Self { q, p, g, lp }
    }

    fn copy_state(&mut self, other: &Point) {
        self.q.copy_from_slice(&other.q);
        self.p.copy_from_slice(&other.p);
        self.g.copy_from_slice(&other.g);
        self.lp = other.lp;
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TransitionInfo {
    pub accept_stat: f64,
    pub depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

pub(crate) struct Sampler<'a, T> {
    target: &'a T,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    max_depth: usize,
    algorithm: Algorithm,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
}

fn sum_of(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Generalized U-turn check: keep going while both ends still point along `rho`.
fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

/// Mutable bookkeeping shared across one trajectory.
struct Trajectory {
    h0: f64,
    eps: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

impl<'a, T: LogDensity> Sampler<'a, T> {
    pub(crate) fn new(target: &'a T, config: &SamplerConfig) -> Self {
        Self {
            target,
            step_size: 1.0,
            inv_metric: vec![1.0; target.dim()],
            max_depth: config.max_tree_depth,
            algorithm: config.algorithm,
        }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| m * p * p).sum::<f64>()
    }

    fn hamiltonian(&self, z: &Point) -> f64 {
        let h = -z.lp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(p, m)| m * p).collect()
    }

    fn sample_momentum<R: Rng>(&self, z: &mut Point, rng: &mut R) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        match self.target.log_density_and_grad(&z.q, &mut z.g) {
            Ok(lp) if lp.is_finite() => z.lp = lp,
            _ => {
                z.lp = f64::NEG_INFINITY;
                return;
            }
        }
        for (p, g) in z.p.iter_mut().zip(&z.g) {
            *p += 0.5 * eps * g;
        }
    }

    /// Heuristic initial step size: double or halve until one leapfrog step
    /// crosses an acceptance probability of 0.8.
    pub(crate) fn init_step_size<R: Rng>(&mut self, z: &mut Point, rng: &mut R) -> Result<()> {
        let start = z.clone();
        let threshold = 0.8f64.ln();
        let mut direction = 0i32;
        loop {
            z.copy_state(&start);
            self.sample_momentum(z, rng);
            let h0 = self.hamiltonian(z);
            self.leapfrog(z, self.step_size);
            let delta_h = h0 - self.hamiltonian(z);
            if direction == 0 {
                direction = if delta_h > threshold { 1 } else { -1 };
            } else if (direction == 1 && !(delta_h > threshold)) || (direction == -1 && !(delta_h < threshold)) {
                break;
            }
            self.step_size = if direction == 1 { 2.0 * self.step_size } else { 0.5 * self.step_size };
            if self.step_size > 1e7 {
                return Err(Error::StepSize("diverged to infinity; posterior may be improper"));
            }
            if self.step_size == 0.0 {
                return Err(Error::StepSize("collapsed to zero; log density may be discontinuous"));
            }
        }
        z.copy_state(&start);
        Ok(())
    }

    pub(crate) fn transition<R: Rng>(&self, z: &mut Point, rng: &mut R) -> TransitionInfo {
        match self.algorithm {
            Algorithm::Nuts => self.nuts_transition(z, rng),
            Algorithm::StaticHmc { steps } => self.static_transition(z, rng, steps),
        }
    }

    fn static_transition<R: Rng>(&self, z: &mut Point, rng: &mut R, steps: usize) -> TransitionInfo {
        let start = z.clone();
        self.sample_momentum(z, rng);
        let h0 = self.hamiltonian(z);
        let mut divergent = false;
        for _ in 0..steps {
            self.leapfrog(z, self.step_size);
            if self.hamiltonian(z) - h0 > MAX_DELTA_H {
                divergent = true;
                break;
            }
        }
        let h = self.hamiltonian(z);
        let accept_stat = if divergent { 0.0 } else { (h0 - h).exp().min(1.0) };
        if divergent || rng.random::<f64>() >= accept_stat {
            *z = start;
            z.p.iter_mut().for_each(|p| *p = 0.0);
        }
        TransitionInfo { accept_stat, depth: 0, n_leapfrog: steps, divergent, energy: self.hamiltonian(z) }
    }

    fn nuts_transition<R: Rng>(&self, z: &mut Point, rng: &mut R) -> TransitionInfo {
        self.sample_momentum(z, rng);
        let dim = z.q.len();
        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let p_sharp0 = self.p_sharp(&z.p);
        let mut p_fwd_fwd = z.p.clone();
        let mut p_sharp_fwd_fwd = p_sharp0.clone();
        let mut p_fwd_bck = z.p.clone();
        let mut p_sharp_fwd_bck = p_sharp0.clone();
        let mut p_bck_fwd = z.p.clone();
        let mut p_sharp_bck_fwd = p_sharp0.clone();
        let mut p_bck_bck = z.p.clone();
        let mut p_sharp_bck_bck = p_sharp0;

        let mut rho = z.p.clone();
        let mut log_sum_weight = 0.0;
        let mut traj = Trajectory {
            h0: self.hamiltonian(z),
            eps: self.step_size,
            n_leapfrog: 0,
            sum_metro_prob: 0.0,
            divergent: false,
        };
        let mut depth = 0;

        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut log_sum_weight_subtree = f64::NEG_INFINITY;
            let valid = if rng.random::<f64>() > 0.5 {
                rho_bck.copy_from_slice(&rho);
                p_bck_fwd.copy_from_slice(&p_fwd_bck);
                p_sharp_bck_fwd.copy_from_slice(&p_sharp_fwd_bck);
                traj.eps = self.step_size;
                self.build_tree(
                    depth,
                    &mut z_fwd,
                    &mut z_propose,
                    &mut p_sharp_fwd_bck,
                    &mut p_sharp_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    &mut log_sum_weight_subtree,
                    &mut traj,
                    rng,
                )
            } else {
                rho_fwd.copy_from_slice(&rho);
                p_fwd_bck.copy_from_slice(&p_bck_fwd);
                p_sharp_fwd_bck.copy_from_slice(&p_sharp_bck_fwd);
                traj.eps = -self.step_size;
                self.build_tree(
                    depth,
                    &mut z_bck,
                    &mut z_propose,
                    &mut p_sharp_bck_fwd,
                    &mut p_sharp_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    &mut log_sum_weight_subtree,
                    &mut traj,
                    rng,
                )
            };
            if !valid {
                break;
            }
            depth += 1;

            if log_sum_weight_subtree > log_sum_weight {
                z_sample.copy_state(&z_propose);
            } else {
                let accept_prob = (log_sum_weight_subtree - log_sum_weight).exp();
                if rng.random::<f64>() < accept_prob {
                    z_sample.copy_state(&z_propose);
                }
            }
            log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

            rho = sum_of(&rho_bck, &rho_fwd);
            let mut persist = no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            let rho_extended = sum_of(&rho_bck, &p_fwd_bck);
            persist &= no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_extended);
            let rho_extended = sum_of(&rho_fwd, &p_bck_fwd);
            persist &= no_u_turn(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_extended);
            if !persist {
                break;
            }
        }

        z.copy_state(&z_sample);
        let accept_stat = if traj.n_leapfrog > 0 { traj.sum_metro_prob / traj.n_leapfrog as f64 } else { 0.0 };
        TransitionInfo {
            accept_stat,
            depth,
            n_leapfrog: traj.n_leapfrog,
            divergent: traj.divergent,
            energy: self.hamiltonian(&z_sample),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree<R: Rng>(
        &self,
        depth: usize,
        z: &mut Point,
        z_propose: &mut Point,
        p_sharp_beg: &mut [f64],
        p_sharp_end: &mut [f64],
        rho: &mut [f64],
        p_beg: &mut [f64],
        p_end: &mut [f64],
        log_sum_weight: &mut f64,
        traj: &mut Trajectory,
        rng: &mut R,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, traj.eps);
            traj.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - traj.h0 > MAX_DELTA_H {
                traj.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, traj.h0 - h);
            traj.sum_metro_prob += if traj.h0 - h > 0.0 { 1.0 } else { (traj.h0 - h).exp() };
            z_propose.copy_state(z);
            let ps = self.p_sharp(&z.p);
            p_sharp_beg.copy_from_slice(&ps);
            p_sharp_end.copy_from_slice(&ps);
            add_into(rho, &z.p);
            p_beg.copy_from_slice(&z.p);
            p_end.copy_from_slice(&z.p);
            return !traj.divergent;
        }
        let dim = z.q.len();

        // Initial subtree
        let mut log_sum_weight_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        if !self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            &mut log_sum_weight_init,
            traj,
            rng,
        ) {
            return false;
        }

        // Final subtree
        let mut z_propose_final = z.clone();
        let mut log_sum_weight_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            &mut log_sum_weight_final,
            traj,
            rng,
        ) {
            return false;
        }

        // Multinomial sample from the right subtree
        let log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, log_sum_weight_subtree);
        if log_sum_weight_final > log_sum_weight_subtree {
            z_propose.copy_state(&z_propose_final);
        } else {
            let accept_prob = (log_sum_weight_final - log_sum_weight_subtree).exp();
            if rng.random::<f64>() < accept_prob {
                z_propose.copy_state(&z_propose_final);
            }
        }

        let rho_subtree = sum_of(&rho_init, &rho_final);
        add_into(rho, &rho_subtree);
        let mut persist = no_u_turn(p_sharp_beg, p_sharp_end, &rho_subtree);
        let rho_extended = sum_of(&rho_init, &p_final_beg);
        persist &= no_u_turn(p_sharp_beg, &p_sharp_final_beg, &rho_extended);
        let rho_extended = sum_of(&rho_final, &p_init_end);
        persist &= no_u_turn(&p_sharp_init_end, p_sharp_end, &rho_extended);
        persist
    }
}
