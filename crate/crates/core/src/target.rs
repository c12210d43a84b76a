//! Particle target distribution built around a reference trajectory.
//!
//! Each particle follows an Euler–Maruyama discretization of
//!
//! ```text
//! dq = [kappa(theta) (x*(q) - q) + alpha(theta) grad log p(q)] dt
//!      + sqrt(2 D_par(theta)) T dW + sqrt(2 D_perp(theta)) (I - T) dW
//! ```
//!
//! where `x*(q)` is the nearest reference state, `p` is a squared-exponential
//! density over the reference states and `T = t t^T` projects onto the local
//! tangent. At `theta = 0` only the drift acts and particles contract onto the
//! reference; at `theta = 1` only diffusion acts. After every step the
//! orthogonal offset is bounded by a Laplacian envelope centred on the robot's
//! own arc-length coordinate, and particles are kept inside the unit box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, dot, nearest_index, norm, tangent_at, State, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeParams {
    pub n_particles: usize,
    pub kappa0: f64,
    pub alpha0: f64,
    pub d_par0: f64,
    pub d_perp0: f64,
    /// Heat-kernel bandwidth.
    pub h: f64,
    /// Envelope amplitude `A`.
    pub amplitude: f64,
    pub b0: f64,
    pub gamma: f64,
    pub rho_max: f64,
    pub sde_steps: usize,
    pub sde_dt: f64,
    /// Re-seed particles on the reference every planning cycle instead of
    /// warm-starting from the previous set.
    pub reinit_each_cycle: bool,
}

impl Default for SdeParams {
    fn default() -> Self {
        SdeParams {
            n_particles: 200,
            kappa0: 8.0,
            alpha0: 0.05,
            d_par0: 0.002,
            d_perp0: 0.02,
            h: 0.03,
            amplitude: 1.0,
            b0: 0.1,
            gamma: 0.05,
            rho_max: 0.15,
            sde_steps: 20,
            sde_dt: 0.01,
            reinit_each_cycle: true,
        }
    }
}

impl SdeParams {
    pub fn validate(&self) -> Result<()> {
        let non_neg = [
            ("sde.kappa0", self.kappa0),
            ("sde.alpha0", self.alpha0),
            ("sde.d_par0", self.d_par0),
            ("sde.d_perp0", self.d_perp0),
            ("sde.gamma", self.gamma),
        ];
        for (name, v) in non_neg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        let pos = [
            ("sde.h", self.h),
            ("sde.amplitude", self.amplitude),
            ("sde.b0", self.b0),
            ("sde.rho_max", self.rho_max),
            ("sde.sde_dt", self.sde_dt),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        if self.d_perp0 < self.d_par0 {
            return Err(Error::invalid("sde.d_perp0", "must be >= d_par0"));
        }
        if self.n_particles == 0 {
            return Err(Error::invalid("sde.n_particles", "must be positive"));
        }
        if self.sde_steps == 0 {
            return Err(Error::invalid("sde.sde_steps", "must be positive"));
        }
        Ok(())
    }

    /// Drift and diffusion gains at temperature `theta`.
    pub fn schedule(&self, theta: f64) -> Schedule {
        Schedule {
            kappa: self.kappa0 * (1.0 - theta),
            alpha: self.alpha0 * (1.0 - theta),
            d_par: self.d_par0 * theta,
            d_perp: self.d_perp0 * theta,
        }
    }

    /// Envelope decay after `c` stagnating steps.
    pub fn b_eff(&self, c: u32) -> f64 {
        self.b0 * (1.0 + self.gamma * c as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kappa: f64,
    pub alpha: f64,
    pub d_par: f64,
    pub d_perp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    dim: usize,
    points: Vec<f64>,
    pub seed: u64,
    pub theta_used: f64,
}

impl ParticleSet {
    pub fn from_flat(dim: usize, points: Vec<f64>, seed: u64) -> Self {
        assert!(dim > 0 && points.len() % dim == 0);
        ParticleSet {
            dim,
            points,
            seed,
            theta_used: 0.0,
        }
    }

    pub fn from_states(states: &[State], seed: u64) -> Self {
        let dim = states.first().map_or(1, State::dim);
        let points = states.iter().flat_map(|s| s.iter().copied()).collect();
        Self::from_flat(dim, points, seed)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }
}

/// Independent stream per (seed, particle).
fn particle_rng(seed: u64, j: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    rng
}

fn clamp_unit(q: &mut [f64]) {
    for v in q.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Places particles at reference states drawn uniformly with replacement and
/// jitters them with isotropic Gaussian noise.
pub fn init_particles(traj: &Trajectory, n: usize, jitter_std: f64, seed: u64) -> Result<ParticleSet> {
    if n == 0 {
        return Err(Error::invalid("n_particles", "must be positive"));
    }
    let dim = traj.dim();
    let mut points = Vec::with_capacity(n * dim);
    for j in 0..n {
        let mut rng = particle_rng(seed, j);
        let k = rng.gen_range(0..traj.len());
        let start = points.len();
        points.extend_from_slice(traj.state(k));
        for v in &mut points[start..] {
            let z: f64 = rng.sample(StandardNormal);
            *v += jitter_std * z;
        }
        clamp_unit(&mut points[start..]);
    }
    Ok(ParticleSet::from_flat(dim, points, seed))
}

/// Squared-exponential kernel, the heat kernel on Euclidean space.
pub fn heat_kernel(q: &[f64], x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", "bandwidth must be positive"));
    }
    Ok((-dist_sq(q, x) / (2.0 * h * h)).exp())
}

/// Score of the kernel density over the trajectory states at `q`.
pub fn kernel_score(q: &[f64], traj: &Trajectory, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", "bandwidth must be positive"));
    }
    let mut out = vec![0.0; q.len()];
    score_into(q, traj, h, &mut out);
    Ok(out)
}

fn score_into(q: &[f64], traj: &Trajectory, h: f64, out: &mut [f64]) {
    let inv_h2 = 1.0 / (h * h);
    out.fill(0.0);
    let mut total = 0.0;
    for x in traj.states() {
        let w = (-0.5 * dist_sq(q, x) * inv_h2).exp();
        total += w;
        for ((o, xa), qa) in out.iter_mut().zip(x).zip(q) {
            *o += w * (xa - qa);
        }
    }
    if total > 0.0 {
        for o in out.iter_mut() {
            *o *= inv_h2 / total;
        }
    } else {
        // Far field: the nearest component dominates the mixture.
        let (k, _) = nearest_index(q, traj);
        for ((o, xa), qa) in out.iter_mut().zip(traj.state(k)).zip(q) {
            *o = (xa - qa) * inv_h2;
        }
    }
}

/// kappa * (x*(q) - q).
pub fn attraction_drift(q: &[f64], traj: &Trajectory, kappa: f64) -> Vec<f64> {
    let (k, _) = nearest_index(q, traj);
    traj.state(k).iter().zip(q).map(|(x, qa)| kappa * (x - qa)).collect()
}

/// Diffusion increment split along and across the local tangent.
pub fn anisotropic_increment<R: Rng + ?Sized>(
    q: &[f64],
    traj: &Trajectory,
    d_par: f64,
    d_perp: f64,
    dt: f64,
    rng: &mut R,
) -> Vec<f64> {
    let (k, _) = nearest_index(q, traj);
    let tangent = tangent_at(traj, k).ok();
    let mut out = vec![0.0; q.len()];
    increment_into(tangent.as_deref(), d_par, d_perp, dt, rng, &mut out);
    out
}

fn increment_into<R: Rng + ?Sized>(
    tangent: Option<&[f64]>,
    d_par: f64,
    d_perp: f64,
    dt: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    let sd = dt.sqrt();
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = sd * z;
    }
    let perp = (2.0 * d_perp).sqrt();
    match tangent {
        Some(t) => {
            let par = (2.0 * d_par).sqrt();
            let along = dot(t, out);
            for (o, ta) in out.iter_mut().zip(t) {
                let tangential = along * ta;
                *o = par * tangential + perp * (*o - tangential);
            }
        }
        None => out.iter_mut().for_each(|o| *o *= perp),
    }
}

/// Laplacian envelope `A / (2b) * exp(-|s| / b)`.
pub fn envelope(s: f64, amplitude: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::invalid("b", "envelope decay must be positive"));
    }
    Ok(amplitude / (2.0 * b) * (-s.abs() / b).exp())
}

/// Allowed orthogonal deviation at arc length `s`: the envelope centred on
/// `s_star`, rescaled so that its peak equals `rho_max`.
pub fn envelope_radius(s: f64, s_star: f64, b_eff: f64, rho_max: f64) -> f64 {
    rho_max * (-(s - s_star).abs() / b_eff).exp()
}

/// Precomputed tangents of a reference trajectory.
#[derive(Debug, Clone)]
pub struct Reference<'a> {
    pub traj: &'a Trajectory,
    tangents: Vec<Option<Vec<f64>>>,
}

impl<'a> Reference<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        let tangents = (0..traj.len()).map(|k| tangent_at(traj, k).ok()).collect();
        Reference { traj, tangents }
    }

    pub fn tangent(&self, k: usize) -> Option<&[f64]> {
        self.tangents[k].as_deref()
    }

    /// Nearest index, tangential coordinate and orthogonal offset of `q`.
    pub fn offsets(&self, q: &[f64]) -> (usize, f64, Vec<f64>) {
        let (k, _) = nearest_index(q, self.traj);
        let x = self.traj.state(k);
        let v: Vec<f64> = q.iter().zip(x).map(|(a, b)| a - b).collect();
        match self.tangent(k) {
            Some(t) => {
                let along = dot(&v, t);
                let n = v.iter().zip(t).map(|(va, ta)| va - along * ta).collect();
                (k, along, n)
            }
            None => (k, 0.0, v),
        }
    }

    /// Length of the orthogonal offset of `q` and its envelope radius.
    pub fn deviation(&self, q: &[f64], s_star: f64, b_eff: f64, rho_max: f64) -> (f64, f64) {
        let (k, _, n) = self.offsets(q);
        let rho = envelope_radius(self.traj.arc().at(k), s_star, b_eff, rho_max);
        (norm(&n), rho)
    }

    fn bound_into(&self, q: &mut [f64], s_star: f64, b_eff: f64, rho_max: f64) -> bool {
        let (k, along, n) = self.offsets(q);
        let rho = envelope_radius(self.traj.arc().at(k), s_star, b_eff, rho_max);
        let len = norm(&n);
        if len <= rho {
            return false;
        }
        let scale = if 2.0 * rho > len {
            (2.0 * rho - len) / len
        } else {
            rho / len
        };
        let x = self.traj.state(k);
        let tangent = self.tangent(k);
        for a in 0..q.len() {
            let t = tangent.map_or(0.0, |t| along * t[a]);
            q[a] = x[a] + t + n[a] * scale;
        }
        true
    }
}

/// Reflects the orthogonal offset of `q` back inside the envelope.
pub fn apply_envelope_bound(q: &[f64], traj: &Trajectory, s_star: f64, b_eff: f64, rho_max: f64) -> State {
    let reference = Reference::new(traj);
    let mut out = q.to_vec();
    reference.bound_into(&mut out, s_star, b_eff, rho_max);
    State::new(out)
}

/// Envelope then box; repeats until the particle satisfies both, since a
/// reflected point may project onto a different reference state.
fn enforce_bounds(reference: &Reference<'_>, q: &mut [f64], s_star: f64, b_eff: f64, rho_max: f64) {
    for _ in 0..4 {
        reference.bound_into(q, s_star, b_eff, rho_max);
        clamp_unit(q);
        let (len, rho) = reference.deviation(q, s_star, b_eff, rho_max);
        if len <= rho {
            return;
        }
    }
    let (k, _) = nearest_index(q, reference.traj);
    q.copy_from_slice(reference.traj.state(k));
}

/// Evolves every particle `params.sde_steps` Euler–Maruyama steps.
///
/// Particle `j` draws its noise from stream `j` of `seed`, so the result does
/// not depend on the order in which particles are processed.
pub fn evolve(
    ps: &ParticleSet,
    traj: &Trajectory,
    theta: f64,
    c: u32,
    s_star: f64,
    params: &SdeParams,
    seed: u64,
) -> ParticleSet {
    let theta = theta.clamp(0.0, 1.0);
    let gains = params.schedule(theta);
    let b_eff = params.b_eff(c);
    let dt = params.sde_dt;
    let reference = Reference::new(traj);
    let dim = ps.dim();
    let mut points = ps.as_flat().to_vec();
    let mut score = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    let noisy = gains.d_par > 0.0 || gains.d_perp > 0.0;
    for (j, q) in points.chunks_exact_mut(dim).enumerate() {
        let mut rng = particle_rng(seed, j);
        for _ in 0..params.sde_steps {
            let (k, _) = nearest_index(q, traj);
            if gains.alpha > 0.0 {
                score_into(q, traj, params.h, &mut score);
            } else {
                score.fill(0.0);
            }
            if noisy {
                increment_into(
                    reference.tangent(k),
                    gains.d_par,
                    gains.d_perp,
                    dt,
                    &mut rng,
                    &mut noise,
                );
            }
            let x = traj.state(k);
            for a in 0..dim {
                let drift = gains.kappa * (x[a] - q[a]) + gains.alpha * score[a];
                q[a] += drift * dt + if noisy { noise[a] } else { 0.0 };
            }
            enforce_bounds(&reference, q, s_star, b_eff, params.rho_max);
        }
    }
    ParticleSet {
        dim,
        points,
        seed,
        theta_used: theta,
    }
}

/// Mean orthogonal offset of the particles from their reference projection.
pub fn mean_orthogonal_spread(ps: &ParticleSet, traj: &Trajectory) -> f64 {
    let reference = Reference::new(traj);
    ps.iter().map(|q| norm(&reference.offsets(q).2)).sum::<f64>() / ps.len() as f64
}

/// Mean distance from particles to their nearest reference state.
pub fn mean_distance(ps: &ParticleSet, traj: &Trajectory) -> f64 {
    ps.iter().map(|q| nearest_index(q, traj).1.sqrt()).sum::<f64>() / ps.len() as f64
}
