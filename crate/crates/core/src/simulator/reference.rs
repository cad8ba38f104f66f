//! Per-particle continuous-time simulator.
//!
//! Keeps every particle's position in a vector and picks the jumping particle
//! uniformly. It is O(particles) per advance and exists to cross-check
//! [`super::run_continuous`] statistically.

use rand::{Rng, RngCore};
use rand_distr::Exp1;

use crate::model::{record_checkpoint, ModelParams, ParticleField, TimeMode, Trajectory};
use crate::{Error, Result};

fn as_field(positions: &[usize], front: usize, x_max: usize, lost: u64, dead: u64, initial_mass: u64) -> ParticleField {
    let mut counts = vec![0u32; x_max + 1];
    for &p in positions {
        counts[p] += 1;
    }
    ParticleField { front, counts, lost, dead, initial_mass }
}

pub fn run_continuous_naive<R: RngCore>(field: &ParticleField, params: &ModelParams, run_id: u64, rng: &mut R) -> Result<Trajectory> {
    if params.time_mode != TimeMode::Continuous {
        return Err(Error::invalid("reference simulator is continuous-time only"));
    }
    params.validate()?;
    let x_max = field.x_max();
    let mut positions: Vec<usize> = Vec::with_capacity(field.initial_mass as usize);
    for (site, &n) in field.counts.iter().enumerate() {
        positions.extend(std::iter::repeat_n(site, n as usize));
    }
    let (mut front, mut lost, mut dead) = (field.front, field.lost, field.dead);
    let initial = field.initial_mass;

    let mut traj = Trajectory::new(run_id, params.clone());
    record_checkpoint(field, 0.0, &mut traj)?;
    let checkpoints: Vec<f64> = params.checkpoints.iter().copied().filter(|&t| t > 0.0).collect();
    let mut next_cp = 0;
    let mut t = 0.0;
    while !positions.is_empty() {
        let wait: f64 = rng.sample::<f64, _>(Exp1) / positions.len() as f64;
        let t_next = t + wait;
        while next_cp < checkpoints.len() && checkpoints[next_cp] < t_next {
            let snap = as_field(&positions, front, x_max, lost, dead, initial);
            record_checkpoint(&snap, checkpoints[next_cp], &mut traj)?;
            next_cp += 1;
        }
        if t_next > params.horizon {
            break;
        }
        t = t_next;
        let k = rng.random_range(0..positions.len());
        let left: bool = rng.random();
        let p = positions[k];
        if left {
            if p == front + 1 {
                let before = positions.len();
                positions.retain(|&q| q != p);
                let swallowed = (before - positions.len()) as u64;
                front = p;
                dead += swallowed;
                lost += swallowed - 1;
            } else {
                positions[k] = p - 1;
            }
        } else if p < x_max {
            positions[k] = p + 1;
        }
    }
    let snap = as_field(&positions, front, x_max, lost, dead, initial);
    for &cp in &checkpoints[next_cp..] {
        record_checkpoint(&snap, cp, &mut traj)?;
    }
    Ok(traj)
}
