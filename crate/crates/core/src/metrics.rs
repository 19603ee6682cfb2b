//! Experiment metrics: settling time, tracking RMSE, and the report that
//! every experiment emits alongside its CSV.

use std::fmt;

use crate::real::{to_f64, Real};

/// 5% settling verdict for one step transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Settling {
    /// Seconds from the step to the last entry into the band.
    Settled(f64),
    DidNotSettle,
}

impl Settling {
    pub fn settled_within(&self, bound: f64) -> bool {
        matches!(self, Settling::Settled(t) if *t <= bound)
    }
}

impl fmt::Display for Settling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Settling::Settled(t) => write!(f, "{t:.3} s"),
            Settling::DidNotSettle => write!(f, "did-not-settle"),
        }
    }
}

/// First time (relative to `times[0]`) after which `values` stays within
/// `band_frac * |amplitude|` of `target` for the remainder of the window.
/// `None` when the signal is still outside the band at the final sample.
pub fn settling_time<T: Real>(
    times: &[T],
    values: &[T],
    target: T,
    amplitude: T,
    band_frac: T,
) -> Option<T> {
    assert_eq!(times.len(), values.len());
    assert!(!times.is_empty(), "settling_time needs a nonempty series");
    let band = band_frac * amplitude.abs();
    // Scan backwards for the last sample outside the band.
    let mut last_outside = None;
    for (i, &v) in values.iter().enumerate().rev() {
        if (v - target).abs() > band {
            last_outside = Some(i);
            break;
        }
    }
    match last_outside {
        None => Some(T::zero()),
        Some(i) if i + 1 < times.len() => Some(times[i + 1] - times[0]),
        Some(_) => None,
    }
}

/// Root-mean-square of a residual series.
pub fn rms<T: Real>(residuals: impl Iterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut n = 0usize;
    for r in residuals {
        sum += r * r;
        n += 1;
    }
    if n == 0 {
        return T::zero();
    }
    (sum / crate::real::real::<T>(n as f64)).sqrt()
}

/// Everything an experiment reports. Fields outside an experiment's scope
/// stay `None`/empty.
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    pub kind: String,
    pub profile: String,
    pub duration_s: f64,
    /// Per transition: label and 5% settling verdict (worst joint).
    pub settling_5pct: Vec<(String, Settling)>,
    /// Whole-run joint tracking RMSE, degrees.
    pub joint_rmse_deg: Option<f64>,
    /// Whole-run end-effector tracking RMSE, mm.
    pub end_effector_rmse_mm: Option<f64>,
    /// Per waypoint: index and last-two-seconds RMSE, mm.
    pub waypoint_errors_mm: Vec<(usize, f64)>,
    /// Mean of the per-waypoint RMSEs, mm.
    pub aggregate_waypoint_rmse_mm: Option<f64>,
    /// Simulated seconds until the supply failed (or the run cap).
    pub endurance_s: Option<f64>,
    pub waypoints_completed: Option<usize>,
    pub supply_depleted: Option<bool>,
    /// Per payload: kg and steady tip deviation from the unloaded case, mm.
    pub droop_mm: Vec<(f64, f64)>,
    /// Soft/stiff tip displacement ratio of the compliance demo.
    pub displacement_ratio: Option<f64>,
    /// Eigenvalues of the task-space compliance at the demo posture, m/N.
    pub compliance_eigenvalues: Vec<f64>,
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn new(kind: &str, profile: &str) -> Self {
        MetricsReport {
            kind: kind.to_string(),
            profile: profile.to_string(),
            ..Default::default()
        }
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment: {}", self.kind)?;
        writeln!(f, "profile: {}", self.profile)?;
        writeln!(f, "simulated duration: {:.3} s", self.duration_s)?;
        for (label, s) in &self.settling_5pct {
            writeln!(f, "settling(5%) {label}: {s}")?;
        }
        if let Some(v) = self.joint_rmse_deg {
            writeln!(f, "joint tracking RMSE: {v:.4} deg")?;
        }
        if let Some(v) = self.end_effector_rmse_mm {
            writeln!(f, "end-effector tracking RMSE: {v:.3} mm")?;
        }
        for (i, e) in &self.waypoint_errors_mm {
            writeln!(f, "waypoint {i} RMSE (last 2 s): {e:.3} mm")?;
        }
        if let Some(v) = self.aggregate_waypoint_rmse_mm {
            writeln!(f, "aggregate waypoint RMSE: {v:.3} mm")?;
        }
        if let Some(v) = self.endurance_s {
            writeln!(f, "endurance: {v:.1} s")?;
        }
        if let Some(v) = self.waypoints_completed {
            writeln!(f, "waypoints completed: {v}")?;
        }
        if let Some(v) = self.supply_depleted {
            writeln!(f, "supply depleted: {v}")?;
        }
        for (kg, mm) in &self.droop_mm {
            writeln!(f, "droop at {kg:.2} kg: {mm:.2} mm")?;
        }
        if let Some(v) = self.displacement_ratio {
            writeln!(f, "soft/stiff displacement ratio: {v:.3}")?;
        }
        if !self.compliance_eigenvalues.is_empty() {
            write!(f, "compliance eigenvalues (m/N):")?;
            for e in &self.compliance_eigenvalues {
                write!(f, " {e:.3e}")?;
            }
            writeln!(f)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// Convenience: settling verdict as the enum, from an f64 series.
pub fn settling_verdict(times: &[f64], values: &[f64], target: f64, amplitude: f64) -> Settling {
    match settling_time(times, values, target, amplitude, 0.05) {
        Some(t) => Settling::Settled(to_f64(t)),
        None => Settling::DidNotSettle,
    }
}
