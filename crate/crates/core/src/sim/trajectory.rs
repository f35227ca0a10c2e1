use std::io::Write;

use serde::{Deserialize, Serialize};

/// What a simulator stores along the path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    /// Every event, plus the state at the horizon.
    #[default]
    Full,
    /// Only the state at the given (sorted) observation times.
    Grid(Vec<f64>),
}

/// First time `x[species] > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Watch {
    pub species: usize,
    pub threshold: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub record: RecordMode,
    pub watch: Option<Watch>,
}

impl SimOptions {
    pub fn grid(times: Vec<f64>) -> Self {
        Self { record: RecordMode::Grid(times), watch: None }
    }

    pub fn with_watch(mut self, watch: Watch) -> Self {
        self.watch = Some(watch);
        self
    }
}

/// A piecewise-constant sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<i64>>,
    pub first_exceed: Option<f64>,
    /// Measured simulation time in seconds.
    pub wall_cost: f64,
    /// Machine-independent work units (events, leaps x channels, draws).
    pub work: u64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[i64] {
        self.states.last().expect("trajectory has at least one state")
    }

    /// State at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> &[i64] {
        let i = self.times.partition_point(|&s| s <= t);
        &self.states[i.saturating_sub(1)]
    }

    /// Grid-recorded states flattened time-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.states.iter().flatten().map(|&v| v as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, species: &[String]) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(species.iter().cloned());
        w.write_record(&header)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut rec = vec![t.to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Collects states according to [`SimOptions`].
pub(crate) struct Recorder<'a> {
    opts: &'a SimOptions,
    next_grid: usize,
    times: Vec<f64>,
    states: Vec<Vec<i64>>,
    first_exceed: Option<f64>,
}

impl<'a> Recorder<'a> {
    pub fn new(opts: &'a SimOptions, x0: &[i64]) -> Self {
        let mut r = Self { opts, next_grid: 0, times: vec![], states: vec![], first_exceed: None };
        if let RecordMode::Full = opts.record {
            r.times.push(0.0);
            r.states.push(x0.to_vec());
        }
        r.watch(0.0, x0);
        r
    }

    fn flush_grid(&mut self, before: f64, x: &[i64], inclusive: bool) {
        if let RecordMode::Grid(g) = &self.opts.record {
            while let Some(&tg) = g.get(self.next_grid) {
                if tg < before || (inclusive && tg <= before) {
                    self.times.push(tg);
                    self.states.push(x.to_vec());
                    self.next_grid += 1;
                } else {
                    break;
                }
            }
        }
    }

    fn watch(&mut self, t: f64, x: &[i64]) {
        if self.first_exceed.is_none() {
            if let Some(w) = self.opts.watch {
                if x[w.species] > w.threshold {
                    self.first_exceed = Some(t);
                }
            }
        }
    }

    /// Called with the pre-event state before a jump at `t`.
    pub fn before_jump(&mut self, t: f64, x: &[i64]) {
        self.flush_grid(t, x, false);
    }

    /// Called with the post-event state after a jump at `t`.
    pub fn after_jump(&mut self, t: f64, x: &[i64]) {
        if let RecordMode::Full = self.opts.record {
            self.times.push(t);
            self.states.push(x.to_vec());
        }
        self.watch(t, x);
    }

    pub fn finish(mut self, horizon: f64, x: &[i64], wall_cost: f64, work: u64) -> Trajectory {
        match self.opts.record {
            RecordMode::Full => {
                if self.times.last().is_none_or(|&t| t < horizon) {
                    self.times.push(horizon);
                    self.states.push(x.to_vec());
                }
            }
            RecordMode::Grid(_) => self.flush_grid(horizon, x, true),
        }
        Trajectory {
            times: self.times,
            states: self.states,
            first_exceed: self.first_exceed,
            wall_cost: wall_cost.max(f64::MIN_POSITIVE),
            work: work.max(1),
        }
    }
}
