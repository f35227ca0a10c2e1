use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{apply, check_counts, Recorder, SimOptions, Trajectory};
use crate::error::SimError;
use crate::network::{ParamVector, ReactionNetwork};

/// Gillespie's direct method on `[0, horizon]`.
pub fn ssa_simulate<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    theta: &ParamVector,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<Trajectory, SimError> {
    let start = Instant::now();
    let kin = net.bind(theta)?;
    let horizon = kin.horizon;
    let mut x = kin.initial_state.clone();
    let mut rec = Recorder::new(opts, &x);
    let mut v = vec![0.0; kin.reaction_count()];
    let mut t = 0.0;
    let mut events = 0u64;
    loop {
        kin.propensities(&x, &mut v);
        let total: f64 = v.iter().sum();
        if total <= 0.0 {
            break;
        }
        let e: f64 = Exp1.sample(rng);
        let t_next = t + e / total;
        if t_next > horizon {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut fired = v.len() - 1;
        for (j, &a) in v.iter().enumerate() {
            acc += a;
            if target < acc {
                fired = j;
                break;
            }
        }
        // guard against round-off selecting a disabled channel
        while v[fired] == 0.0 {
            fired -= 1;
        }
        rec.before_jump(t_next, &x);
        apply(&mut x, &kin.changes[fired]);
        t = t_next;
        check_counts(&x, kin.count_limit, t)?;
        rec.after_jump(t, &x);
        events += 1;
    }
    let work = events * kin.reaction_count() as u64;
    Ok(rec.finish(horizon, &x, start.elapsed().as_secs_f64(), work))
}
