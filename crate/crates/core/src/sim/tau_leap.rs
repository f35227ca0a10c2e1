use std::collections::VecDeque;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use super::{check_counts, PoissonSkeleton, RecordMode, Recorder, SimOptions, SkeletonInterval, Trajectory};
use crate::error::SimError;
use crate::network::{ParamVector, ReactionNetwork};

/// Halvings of a single leap before giving up.
const MAX_HALVINGS: u32 = 64;

/// A drawn but unconsumed piece of a unit-rate process.
#[derive(Debug, Clone, Copy)]
struct Piece {
    length: f64,
    count: u64,
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Take `length` units of internal time from the front of reaction `j`'s
/// process: pending pieces first (split binomially when only part is
/// needed), then fresh Poisson draws.
fn consume<R: Rng + ?Sized>(pending: &mut VecDeque<Piece>, length: f64, rng: &mut R, out: &mut Vec<Piece>) {
    let mut remaining = length;
    while remaining > 0.0 {
        let Some(front) = pending.pop_front() else {
            out.push(Piece { length: remaining, count: poisson(remaining, rng) });
            return;
        };
        if front.length <= remaining {
            remaining -= front.length;
            out.push(front);
        } else {
            let k = binomial(front.count, remaining / front.length, rng);
            out.push(Piece { length: remaining, count: k });
            pending.push_front(Piece { length: front.length - remaining, count: front.count - k });
            return;
        }
    }
}

fn next_grid_after(opts: &SimOptions, t: f64) -> Option<f64> {
    match &opts.record {
        RecordMode::Grid(g) => g.get(g.partition_point(|&s| s <= t)).copied(),
        RecordMode::Full => None,
    }
}

/// Fixed-step tau-leaping with a recorded Poisson skeleton.
///
/// Steps are cut short at observation times and the horizon. A leap that
/// would make a count negative is retried with half the step, splitting the
/// already drawn counts binomially so the skeleton still describes one
/// underlying unit-rate process per reaction.
pub fn tau_leap_simulate<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    theta: &ParamVector,
    tau: f64,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<(Trajectory, PoissonSkeleton), SimError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(SimError::InvalidStep(tau));
    }
    let start = Instant::now();
    let kin = net.bind(theta)?;
    let m = kin.reaction_count();
    let horizon = kin.horizon;
    let mut x = kin.initial_state.clone();
    let mut rec = Recorder::new(opts, &x);
    let mut skeleton = PoissonSkeleton::new(m);
    let mut pending: Vec<VecDeque<Piece>> = vec![VecDeque::new(); m];
    let mut drawn: Vec<Vec<Piece>> = vec![Vec::new(); m];
    let mut v = vec![0.0; m];
    let mut trial = x.clone();
    let mut t = 0.0;
    let mut work = 0u64;

    while t < horizon {
        kin.propensities(&x, &mut v);
        let boundary = next_grid_after(opts, t).map_or(horizon, |cp| cp.min(horizon));
        // snap to the boundary when round-off would leave a sliver step
        let mut end = if t + tau >= boundary - 1e-9 * tau { boundary } else { t + tau };
        let mut h = end - t;
        let mut halvings = 0;
        loop {
            trial.copy_from_slice(&x);
            for j in 0..m {
                drawn[j].clear();
                consume(&mut pending[j], h * v[j], rng, &mut drawn[j]);
                let fired: u64 = drawn[j].iter().map(|p| p.count).sum();
                if fired > 0 {
                    for (xi, c) in trial.iter_mut().zip(&kin.changes[j]) {
                        *xi += c * fired as i64;
                    }
                }
            }
            work += m as u64;
            if trial.iter().all(|&c| c >= 0) {
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(SimError::StepUnderflow { time: t });
            }
            for j in 0..m {
                for p in drawn[j].drain(..).rev() {
                    pending[j].push_front(p);
                }
            }
            h *= 0.5;
            end = t + h;
        }
        let leap = skeleton.leaps.len();
        skeleton.leaps.push(h);
        for j in 0..m {
            skeleton.reactions[j].extend(drawn[j].iter().map(|p| SkeletonInterval {
                length: p.length,
                count: p.count,
                leap: Some(leap),
            }));
        }
        let changed = trial != x;
        if changed {
            rec.before_jump(end, &x);
            x.copy_from_slice(&trial);
            check_counts(&x, kin.count_limit, end)?;
            rec.after_jump(end, &x);
        }
        t = end;
    }
    for j in 0..m {
        skeleton.reactions[j].extend(pending[j].iter().map(|p| SkeletonInterval {
            length: p.length,
            count: p.count,
            leap: None,
        }));
    }
    let traj = rec.finish(horizon, &x, start.elapsed().as_secs_f64(), work);
    Ok((traj, skeleton))
}
