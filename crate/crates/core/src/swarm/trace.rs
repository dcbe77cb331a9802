//! Energy traces: one row per initialization or fusion step.

use std::fmt::Write as _;
use std::time::Instant;

use parking_lot::Mutex;

use crate::error::{Error, Result};
use crate::model::from_fixed;

pub const CSV_HEADER: &str = "elapsed_ms,worker,iteration,energy,best_energy";

/// One trace row. Iteration 0 marks a worker's initial labeling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub elapsed_ms: f64,
    pub worker: usize,
    pub iteration: usize,
    /// Energy the worker published.
    pub energy: f64,
    /// Best pool energy once this row was appended.
    pub best_energy: f64,
}

/// Append-only energy log of a swarm run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    records: Vec<TraceRecord>,
}

impl EnergyTrace {
    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Lowest value of the best-energy column.
    pub fn final_best(&self) -> Option<f64> {
        self.records.iter().map(|r| r.best_energy).reduce(f64::min)
    }

    /// First timestamp at which the best energy reached `target`.
    pub fn time_to_target(&self, target: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.best_energy <= target)
            .map(|r| r.elapsed_ms)
    }

    /// Rows of one worker, in order.
    pub fn worker(&self, worker: usize) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.worker == worker)
    }

    pub fn workers(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.records.iter().map(|r| r.worker).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    /// Rows past initialization.
    pub fn fusion_rows(&self) -> usize {
        self.records.iter().filter(|r| r.iteration > 0).count()
    }

    /// CSV text with [`CSV_HEADER`]; energies carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{:.3},{},{},{:.16e},{:.16e}",
                r.elapsed_ms, r.worker, r.iteration, r.energy, r.best_energy
            );
        }
        out
    }

    /// Parses CSV written by [`EnergyTrace::to_csv`]. Errors carry 1-based
    /// line numbers.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            Some((_, h)) => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{CSV_HEADER}`, found `{}`", h.trim()),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 5 fields, found {}", fields.len()),
                });
            }
            let bad = |name: &str, v: &str| Error::Parse {
                line: line_no,
                message: format!("invalid {name} `{v}`"),
            };
            let float = |name: &str, v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(name, v))
            };
            records.push(TraceRecord {
                elapsed_ms: float("elapsed_ms", fields[0])?,
                worker: fields[1].parse().map_err(|_| bad("worker", fields[1]))?,
                iteration: fields[2].parse().map_err(|_| bad("iteration", fields[2]))?,
                energy: float("energy", fields[3])?,
                best_energy: float("best_energy", fields[4])?,
            });
        }
        Ok(Self { records })
    }
}

/// Serialized appender shared by the workers of one run.
pub(crate) struct TraceRecorder {
    start: Instant,
    inner: Mutex<(Vec<TraceRecord>, i64)>,
}

impl TraceRecorder {
    pub(crate) fn new(start: Instant) -> Self {
        Self {
            start,
            inner: Mutex::new((Vec::new(), i64::MAX)),
        }
    }

    /// Appends a row and returns whether it lowered the best energy.
    pub(crate) fn record(&self, worker: usize, iteration: usize, energy: i64) -> bool {
        let mut g = self.inner.lock();
        let elapsed_ms = self.start.elapsed().as_secs_f64() * 1e3;
        let improved = energy < g.1;
        g.1 = g.1.min(energy);
        let best_energy = from_fixed(g.1);
        g.0.push(TraceRecord {
            elapsed_ms,
            worker,
            iteration,
            energy: from_fixed(energy),
            best_energy,
        });
        improved
    }

    pub(crate) fn finish(self) -> EnergyTrace {
        EnergyTrace {
            records: self.inner.into_inner().0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EnergyTrace {
        EnergyTrace::from_records(vec![
            TraceRecord {
                elapsed_ms: 0.0,
                worker: 0,
                iteration: 0,
                energy: 10.5,
                best_energy: 10.5,
            },
            TraceRecord {
                elapsed_ms: 2.25,
                worker: 1,
                iteration: 1,
                energy: 0.1 + 0.2,
                best_energy: 0.1 + 0.2,
            },
        ])
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        assert_eq!(EnergyTrace::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn parse_errors_report_line() {
        let text = format!("{CSV_HEADER}\n0.0,0,0,1.0,1.0\n1.0,0,x,1.0,1.0\n");
        assert_eq!(
            EnergyTrace::from_csv(&text),
            Err(Error::Parse {
                line: 3,
                message: "invalid iteration `x`".into()
            })
        );
        assert!(matches!(
            EnergyTrace::from_csv("a,b\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn time_to_target() {
        let t = sample();
        assert_eq!(t.time_to_target(10.5), Some(0.0));
        assert_eq!(t.time_to_target(1.0), Some(2.25));
        assert_eq!(t.time_to_target(0.1), None);
        assert_eq!(t.final_best(), Some(0.1 + 0.2));
    }

    #[test]
    fn recorder_keeps_running_minimum() {
        let r = TraceRecorder::new(Instant::now());
        assert!(r.record(0, 0, 5_000_000));
        assert!(!r.record(1, 0, 7_000_000));
        assert!(r.record(1, 1, 4_000_000));
        let t = r.finish();
        let best: Vec<f64> = t.records().iter().map(|r| r.best_energy).collect();
        assert_eq!(best, vec![5.0, 5.0, 4.0]);
    }
}
