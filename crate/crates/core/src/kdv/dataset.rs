use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KdvConfig, KdvError, KdvStepper};
use crate::koopman::SnapshotSet;

/// Attempts per trajectory before giving up on resampling.
const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub trajectories: usize,
    pub rows: usize,
    /// Trajectories that blew up and were redrawn.
    pub discarded: usize,
}

struct Trajectory {
    states: Vec<Vec<f64>>,
    inputs: Vec<Vec<f64>>,
    discarded: usize,
}

/// Random-excitation dataset: `n_traj` trajectories of `traj_len` states.
///
/// Initial states are `Σ aᵢvᵢ` with `aᵢ ~ U[−1, 1]`; inputs are i.i.d.
/// `U[−1, 1]` per step. Trajectory `j` draws from ChaCha stream `j` of
/// `seed`, so the output does not depend on thread scheduling.
pub fn generate_dataset(
    cfg: &KdvConfig,
    n_traj: usize,
    traj_len: usize,
    seed: u64,
) -> Result<(SnapshotSet, DatasetStats), KdvError> {
    cfg.validate()?;
    if n_traj == 0 || traj_len < 2 {
        return Err(KdvError::Config(format!(
            "need at least one trajectory of length >= 2, got {n_traj} x {traj_len}"
        )));
    }
    let trajectories: Vec<Trajectory> = (0..n_traj)
        .into_par_iter()
        .map(|j| simulate_one(cfg, traj_len, seed, j))
        .collect::<Result<_, _>>()?;

    let n = cfg.n_grid;
    let nu = cfg.n_inputs();
    let rows = n_traj * (traj_len - 1);
    let mut x = Vec::with_capacity(rows * n);
    let mut xp = Vec::with_capacity(rows * n);
    let mut u = Vec::with_capacity(rows * nu);
    let mut traj_ids = Vec::with_capacity(rows);
    let mut discarded = 0;
    for (j, t) in trajectories.iter().enumerate() {
        discarded += t.discarded;
        for k in 0..traj_len - 1 {
            x.extend_from_slice(&t.states[k]);
            xp.extend_from_slice(&t.states[k + 1]);
            u.extend_from_slice(&t.inputs[k]);
            traj_ids.push(j);
        }
    }
    if discarded > 0 {
        log::warn!("{discarded} trajectories blew up and were resampled");
    }
    let set = SnapshotSet::new(
        DMatrix::from_row_slice(rows, n, &x),
        DMatrix::from_row_slice(rows, nu, &u),
        DMatrix::from_row_slice(rows, n, &xp),
        traj_ids,
    )?;
    Ok((
        set,
        DatasetStats {
            trajectories: n_traj,
            rows,
            discarded,
        },
    ))
}

fn simulate_one(cfg: &KdvConfig, len: usize, seed: u64, index: usize) -> Result<Trajectory, KdvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut stepper = KdvStepper::new(cfg)?;
    let nu = cfg.n_inputs();
    'attempt: for attempt in 0..MAX_ATTEMPTS {
        let a: Vec<f64> = (0..nu).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let mut y: Vec<f64> = cfg.combine_profiles(&a).iter().copied().collect();
        let mut states = Vec::with_capacity(len);
        let mut inputs = Vec::with_capacity(len - 1);
        states.push(y.clone());
        for _ in 1..len {
            let u: Vec<f64> = (0..nu).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            if stepper.step(&mut y, &u).is_err() {
                continue 'attempt;
            }
            inputs.push(u);
            states.push(y.clone());
        }
        return Ok(Trajectory {
            states,
            inputs,
            discarded: attempt,
        });
    }
    Err(KdvError::ResampleLimit {
        trajectory: index,
        attempts: MAX_ATTEMPTS,
    })
}
