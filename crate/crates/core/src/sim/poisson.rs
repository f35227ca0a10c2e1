use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{apply, check_counts, Recorder, SimOptions, Trajectory};
use crate::error::SimError;
use crate::network::{ParamVector, ReactionNetwork};

/// One consecutive piece of a unit-rate Poisson process: `count` events in
/// an internal-time interval of length `length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonInterval {
    pub length: f64,
    pub count: u64,
    /// Tau-leap step that consumed this piece; `None` for pieces drawn but
    /// not consumed before the horizon.
    pub leap: Option<usize>,
}

/// Coarse record of the per-reaction unit-rate Poisson processes driving a
/// tau-leap run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoissonSkeleton {
    pub reactions: Vec<Vec<SkeletonInterval>>,
    /// Step length of every leap, in order.
    pub leaps: Vec<f64>,
}

#[derive(Serialize)]
struct SkeletonJson<'a> {
    reactions: Vec<ReactionJson>,
    leaps: &'a [f64],
}

#[derive(Serialize)]
struct ReactionJson {
    #[serde(rename = "D")]
    d: Vec<f64>,
    #[serde(rename = "P")]
    p: Vec<u64>,
}

impl PoissonSkeleton {
    pub fn new(reactions: usize) -> Self {
        Self { reactions: vec![Vec::new(); reactions], leaps: vec![] }
    }

    /// Build from bare `(D, P)` arrays per reaction.
    pub fn from_arrays(d: Vec<Vec<f64>>, p: Vec<Vec<u64>>) -> Self {
        let reactions = d
            .into_iter()
            .zip(p)
            .map(|(ds, ps)| {
                ds.into_iter().zip(ps).map(|(length, count)| SkeletonInterval { length, count, leap: None }).collect()
            })
            .collect();
        Self { reactions, leaps: vec![] }
    }

    /// Total internal time covered per reaction.
    pub fn internal_time(&self, j: usize) -> f64 {
        self.reactions[j].iter().map(|s| s.length).sum()
    }

    /// JSON dump with arrays `D` and `P` per reaction.
    pub fn to_json(&self) -> serde_json::Result<String> {
        let doc = SkeletonJson {
            reactions: self
                .reactions
                .iter()
                .map(|r| ReactionJson {
                    d: r.iter().map(|s| s.length).collect(),
                    p: r.iter().map(|s| s.count).collect(),
                })
                .collect(),
            leaps: &self.leaps,
        };
        serde_json::to_string(&doc)
    }
}

/// Fully described unit-rate Poisson processes, one per reaction; event
/// times are in internal (unit-rate) time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitPoissonProcess {
    pub events: Vec<Vec<f64>>,
}

impl UnitPoissonProcess {
    pub fn empty(reactions: usize) -> Self {
        Self { events: vec![Vec::new(); reactions] }
    }

    /// Ensure reaction `j` has at least `k + 1` events, appending `Exp(1)`
    /// increments after the last known one.
    pub fn extend_to<R: Rng + ?Sized>(&mut self, j: usize, k: usize, rng: &mut R) -> usize {
        let ev = &mut self.events[j];
        let mut drawn = 0;
        while ev.len() <= k {
            let last = ev.last().copied().unwrap_or(0.0);
            let e: f64 = Exp1.sample(rng);
            ev.push(last + e);
            drawn += 1;
        }
        drawn
    }
}

/// Place the `P_ij` events of every skeleton interval uniformly on
/// `(D, D + D_ij]` and concatenate the intervals per reaction.
pub fn complete_poisson<R: Rng + ?Sized>(skeleton: &PoissonSkeleton, rng: &mut R) -> UnitPoissonProcess {
    let events = skeleton
        .reactions
        .iter()
        .map(|intervals| {
            let total: u64 = intervals.iter().map(|s| s.count).sum();
            let mut out = Vec::with_capacity(total as usize);
            let mut offset = 0.0;
            for s in intervals {
                let start = out.len();
                for _ in 0..s.count {
                    // 1 - U lies in (0, 1]
                    let u = 1.0 - rng.random::<f64>();
                    out.push(offset + s.length * u);
                }
                out[start..].sort_unstable_by(f64::total_cmp);
                offset += s.length;
            }
            out
        })
        .collect();
    UnitPoissonProcess { events }
}

/// Random time change: map per-reaction unit-rate processes to an exact
/// trajectory. Reaction `j` fires at the real time when its integrated
/// propensity reaches the next unit-time event; exhausted processes are
/// extended with fresh `Exp(1)` increments.
pub fn map_to_exact<R: Rng + ?Sized>(
    process: &mut UnitPoissonProcess,
    net: &ReactionNetwork,
    theta: &ParamVector,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<Trajectory, SimError> {
    let start = Instant::now();
    let kin = net.bind(theta)?;
    let m = kin.reaction_count();
    if process.events.len() < m {
        process.events.resize(m, Vec::new());
    }
    let horizon = kin.horizon;
    let mut x = kin.initial_state.clone();
    let mut rec = Recorder::new(opts, &x);
    let mut v = vec![0.0; m];
    let mut next = vec![0usize; m];
    let mut clock = vec![0.0f64; m];
    let mut t = 0.0;
    let mut work = 0u64;
    loop {
        kin.propensities(&x, &mut v);
        let mut fired = None;
        let mut wait = f64::INFINITY;
        for j in 0..m {
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
        let Some(jf) = fired else { break };
        if t + wait > horizon {
            break;
        }
        t += wait;
        for j in 0..m {
            clock[j] += wait * v[j];
        }
        clock[jf] = process.events[jf][next[jf]];
        next[jf] += 1;
        rec.before_jump(t, &x);
        apply(&mut x, &kin.changes[jf]);
        check_counts(&x, kin.count_limit, t)?;
        rec.after_jump(t, &x);
        work += m as u64;
    }
    Ok(rec.finish(horizon, &x, start.elapsed().as_secs_f64(), work))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::birth_death_model;
    use crate::rng::stream_rng;
    use crate::stats::ks_one_sample_uniform;

    #[test]
    fn empty_interval_gives_empty_process() {
        let sk = PoissonSkeleton::from_arrays(vec![vec![1.0]], vec![vec![0]]);
        let p = complete_poisson(&sk, &mut stream_rng(1, "c", 0));
        assert!(p.events[0].is_empty());
    }

    #[test]
    fn completion_respects_support_and_order() {
        let sk = PoissonSkeleton::from_arrays(vec![vec![2.0, 0.5, 1.0]], vec![vec![3, 2, 0]]);
        for i in 0..200 {
            let p = complete_poisson(&sk, &mut stream_rng(2, "c", i));
            let ev = &p.events[0];
            assert_eq!(ev.len(), 5);
            assert!(ev[..3].iter().all(|&d| d > 0.0 && d <= 2.0));
            assert!(ev[3..].iter().all(|&d| d > 2.0 && d <= 2.5));
            assert!(ev.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn completion_is_conditionally_uniform() {
        // Pool positions of a 4-event interval of length 3; under the
        // conditional law they are i.i.d. Unif(0, 3).
        let sk = PoissonSkeleton::from_arrays(vec![vec![3.0]], vec![vec![4]]);
        let mut pooled = Vec::new();
        for i in 0..10_000 {
            let p = complete_poisson(&sk, &mut stream_rng(3, "ks", i));
            // one randomly labelled point per replication keeps samples independent
            pooled.push(p.events[0][(i % 4) as usize] / 3.0);
        }
        // order statistic k of 4 uniforms is Beta(k, 5-k); mixing the labels
        // uniformly over k recovers Unif(0,1)
        let pval = ks_one_sample_uniform(&pooled);
        assert!(pval > 0.01, "p = {pval}");
    }

    #[test]
    fn constant_propensity_time_change() {
        // 0 -> X at rate 2; unit events at 0.3 and 1.0 fire at 0.15 and 0.5.
        let net = birth_death_model(2.0, 0.0, 0, 0.6);
        let mut proc = UnitPoissonProcess { events: vec![vec![0.3, 1.0, 5.0], vec![]] };
        let tr =
            map_to_exact(&mut proc, &net, &ParamVector::empty(), &SimOptions::default(), &mut stream_rng(1, "m", 0))
                .unwrap();
        assert_eq!(tr.times.len(), 4);
        assert!((tr.times[1] - 0.15).abs() < 1e-15);
        assert!((tr.times[2] - 0.5).abs() < 1e-15);
        assert_eq!(tr.final_state(), &[2]);
    }

    #[test]
    fn death_process_two_step_time_change() {
        // X0 = 2, v = x: first event 0.4 / 2 = 0.2, then clock 0.4 and the
        // next event at 0.9 needs (0.9 - 0.4) / 1 = 0.5 more: t = 0.7.
        let net = birth_death_model(0.0, 1.0, 2, 10.0);
        let mut proc = UnitPoissonProcess { events: vec![vec![], vec![0.4, 0.9]] };
        let tr =
            map_to_exact(&mut proc, &net, &ParamVector::empty(), &SimOptions::default(), &mut stream_rng(1, "m", 1))
                .unwrap();
        assert!((tr.times[1] - 0.2).abs() < 1e-12);
        assert!((tr.times[2] - 0.7).abs() < 1e-12);
        assert_eq!(tr.final_state(), &[0]);
    }

    #[test]
    fn exhausted_process_is_extended() {
        let net = birth_death_model(3.0, 0.0, 0, 50.0);
        let mut proc = UnitPoissonProcess { events: vec![vec![0.5], vec![]] };
        let tr =
            map_to_exact(&mut proc, &net, &ParamVector::empty(), &SimOptions::default(), &mut stream_rng(5, "m", 2))
                .unwrap();
        assert_eq!(*tr.times.last().unwrap(), 50.0);
        assert!(tr.final_state()[0] > 50, "expected ~150 events");
        // the process now extends beyond internal time 3 * 50
        assert!(*proc.events[0].last().unwrap() > 150.0);
        assert!(proc.events[0].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn skeleton_json_has_d_and_p() {
        let sk = PoissonSkeleton::from_arrays(vec![vec![1.5, 2.0]], vec![vec![1, 0]]);
        let v: serde_json::Value = serde_json::from_str(&sk.to_json().unwrap()).unwrap();
        assert_eq!(v["reactions"][0]["D"], serde_json::json!([1.5, 2.0]));
        assert_eq!(v["reactions"][0]["P"], serde_json::json!([1, 0]));
    }
}
