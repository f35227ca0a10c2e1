use std::time::Instant;

use rand::Rng;

use super::{apply, check_counts, Recorder, SimOptions, Trajectory, UnitPoissonProcess};
use crate::error::{ModelError, SimError};
use crate::network::{BoundLaw, Kinetics, ParamVector, ReactionNetwork};

/// Time for the deterministic relaxation of the fast species to move it by
/// one molecule toward its quasi-steady mean.
///
/// With `delta = k_prod * catalyst / k_decay - fast`, the relaxed path is
/// `mean - delta * exp(-k_decay t)`, which covers one molecule after
/// `-ln(1 - 1/|delta|) / k_decay`. Returns `None` when `|delta| <= 1`.
pub fn hybrid_deterministic_wait(k_prod: f64, k_decay: f64, catalyst: f64, fast: f64) -> Option<f64> {
    if k_decay <= 0.0 {
        return None;
    }
    let delta = k_prod * catalyst / k_decay - fast;
    if delta.abs() <= 1.0 {
        return None;
    }
    Some(-(1.0 - 1.0 / delta.abs()).ln() / k_decay)
}

/// The pair of fast reactions: production of `fast` catalysed by
/// `catalyst`, and first-order decay of `fast`.
#[derive(Debug, Clone, Copy)]
struct FastPair {
    fast: usize,
    catalyst: usize,
    k_prod: f64,
    k_decay: f64,
}

fn fast_pair(net: &ReactionNetwork, kin: &Kinetics) -> Result<FastPair, ModelError> {
    let fast = net.fast_reactions();
    let unsupported = |why: &str| ModelError::UnsupportedHybrid(format!("{}: {why}", net.name));
    if fast.len() != 2 {
        return Err(unsupported("expected exactly two fast reactions"));
    }
    let unit_change = |j: usize| -> Option<(usize, i64)> {
        let nz: Vec<_> = kin.changes[j].iter().enumerate().filter(|(_, &c)| c != 0).collect();
        match nz.as_slice() {
            [(s, &c)] if c.abs() == 1 => Some((*s, c)),
            _ => None,
        }
    };
    let mut prod = None;
    let mut decay = None;
    for &j in &fast {
        let (s, c) = unit_change(j).ok_or_else(|| unsupported("fast reactions must change one species by one"))?;
        let BoundLaw::MassAction { k, reactants } = kin.law(j) else {
            return Err(unsupported("fast reactions must be mass action"));
        };
        match (c, reactants.as_slice()) {
            (1, [(cat, 1)]) if *cat != s => prod = Some((s, *cat, *k)),
            (-1, [(r, 1)]) if *r == s => decay = Some((s, *k)),
            _ => return Err(unsupported("fast reactions must be catalysed production and first-order decay")),
        }
    }
    match (prod, decay) {
        (Some((s, catalyst, k_prod)), Some((s2, k_decay))) if s == s2 => {
            Ok(FastPair { fast: s, catalyst, k_prod, k_decay })
        }
        _ => Err(unsupported("fast production and decay must act on the same species")),
    }
}

/// Hybrid simulation: slow reactions fire exactly, the fast species follows
/// its deterministic relaxation in unit steps.
///
/// Each slow reaction runs on its own unit-rate Poisson process through an
/// internal clock, so a pending wait is rescaled automatically when the
/// propensity changes. The returned process holds every unit event time used
/// by the slow reactions (including the next pending one); fast channels are
/// empty and are filled in by the exact simulator when coupled.
pub fn hybrid_viral_simulate<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    theta: &ParamVector,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<(Trajectory, UnitPoissonProcess), SimError> {
    let start = Instant::now();
    let kin = net.bind(theta)?;
    let fp = fast_pair(net, &kin)?;
    let m = kin.reaction_count();
    let slow: Vec<usize> = (0..m).filter(|j| !net.reactions[*j].fast).collect();
    let horizon = kin.horizon;
    let mut x = kin.initial_state.clone();
    let mut rec = Recorder::new(opts, &x);
    let mut process = UnitPoissonProcess::empty(m);
    let mut next = vec![0usize; m];
    let mut clock = vec![0.0f64; m];
    let mut v = vec![0.0; m];
    let mut t = 0.0;
    let mut work = 0u64;
    let det_wait =
        |x: &[i64]| hybrid_deterministic_wait(fp.k_prod, fp.k_decay, x[fp.catalyst] as f64, x[fp.fast] as f64);
    let mut det = det_wait(&x);

    loop {
        for &j in &slow {
            v[j] = kin.propensity(j, &x);
        }
        let mut wait = det.unwrap_or(f64::INFINITY);
        let mut fired = None;
        for &j in &slow {
            if v[j] <= 0.0 {
                continue;
            }
            work += process.extend_to(j, next[j], rng) as u64;
            let tau = ((process.events[j][next[j]] - clock[j]) / v[j]).max(0.0);
            if tau < wait {
                wait = tau;
                fired = Some(j);
            }
        }
        if !wait.is_finite() || t + wait > horizon {
            break;
        }
        t += wait;
        for &j in &slow {
            clock[j] += wait * v[j];
        }
        rec.before_jump(t, &x);
        let (cat_before, fast_before) = (x[fp.catalyst], x[fp.fast]);
        match fired {
            Some(j) => {
                clock[j] = process.events[j][next[j]];
                next[j] += 1;
                apply(&mut x, &kin.changes[j]);
            }
            None => {
                let mean = fp.k_prod * x[fp.catalyst] as f64 / fp.k_decay;
                x[fp.fast] += if mean > x[fp.fast] as f64 { 1 } else { -1 };
            }
        }
        check_counts(&x, kin.count_limit, t)?;
        rec.after_jump(t, &x);
        work += slow.len() as u64;
        det = if fired.is_none() || x[fp.catalyst] != cat_before || x[fp.fast] != fast_before {
            det_wait(&x)
        } else {
            det.map(|d| d - wait)
        };
    }
    Ok((rec.finish(horizon, &x, start.elapsed().as_secs_f64(), work), process))
}
