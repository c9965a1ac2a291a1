use std::fmt;

use super::{SimError, Trajectory};

/// Transient figures of merit of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Per node, max |dω/dt| (rad/s²).
    pub rocof_max: Vec<f64>,
    /// Per node, max |ω| (rad/s).
    pub omega_overshoot: Vec<f64>,
    /// Per node, first time after which `|ω - ω_final|` stays inside the band;
    /// `None` if only the final sample is inside it.
    pub settling_time: Vec<Option<f64>>,
    pub omega_avg_final: f64,
    /// Least-squares slope of the average angle over the final 20% of samples.
    pub theta_avg_ramp_rate: f64,
}

/// Derivative by central differences, second-order one-sided at both ends.
fn derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h)
            } else {
                (y[i + 1] - y[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Computes [`Metrics`]; `band` is relative to each node's max |ω|.
pub fn compute_metrics(traj: &Trajectory, band: f64) -> Result<Metrics, SimError> {
    if traj.len() < 3 {
        return Err(SimError::TooShort {
            len: traj.len(),
            needed: 3,
        });
    }
    let h = traj.times[1] - traj.times[0];
    let n = traj.node_count();
    let mut rocof_max = Vec::with_capacity(n);
    let mut omega_overshoot = Vec::with_capacity(n);
    let mut settling_time = Vec::with_capacity(n);
    for node in 0..n {
        let w = traj.omega(node);
        rocof_max.push(derivative(&w, h).iter().fold(0.0, |a: f64, b| a.max(b.abs())));
        let peak = w.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        omega_overshoot.push(peak);
        let last = *w.last().unwrap();
        let limit = band * peak;
        settling_time.push(match w.iter().rposition(|x| (x - last).abs() > limit) {
            None => Some(0.0),
            Some(i) if i + 2 >= w.len() => None,
            Some(i) => Some(traj.times[i + 1]),
        });
    }

    let start = ((traj.len() - 1) as f64 * 0.8).floor() as usize;
    let start = start.min(traj.len() - 2);
    let theta_avg = traj.theta_avg();
    let theta_avg_ramp_rate = ls_slope(&traj.times[start..], &theta_avg[start..]);
    let omega_avg_final = *traj.omega_avg().last().unwrap();

    Ok(Metrics {
        rocof_max,
        omega_overshoot,
        settling_time,
        omega_avg_final,
        theta_avg_ramp_rate,
    })
}

/// Recorded quantity used when comparing trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Theta,
    Omega,
    Vm,
    P,
    Q,
    VDc,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Theta,
        Component::Omega,
        Component::Vm,
        Component::P,
        Component::Q,
        Component::VDc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Theta => "theta",
            Component::Omega => "omega",
            Component::Vm => "vm",
            Component::P => "p",
            Component::Q => "q",
            Component::VDc => "vdc",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentDeviation {
    pub component: Component,
    /// `None` when either trajectory lacks the component at some node.
    pub max_abs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub components: Vec<ComponentDeviation>,
    pub max_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

impl DeviationReport {
    pub fn get(&self, component: Component) -> Option<f64> {
        self.components
            .iter()
            .find(|c| c.component == component)
            .and_then(|c| c.max_abs)
    }
}

fn sample(traj: &Trajectory, i: usize, node: usize, c: Component) -> Option<f64> {
    let s = &traj.states[i][node];
    match c {
        Component::Theta => Some(s.theta),
        Component::Omega => Some(s.omega),
        Component::Vm => Some(s.vm),
        Component::P => Some(traj.flows[i].p[node]),
        Component::Q => Some(traj.flows[i].q[node]),
        Component::VDc => s.v_dc,
    }
}

/// Max absolute deviation per component over all samples and nodes.
pub fn compare_trajectories(
    a: &Trajectory,
    b: &Trajectory,
    components: &[Component],
    tol: f64,
) -> Result<DeviationReport, SimError> {
    if a.len() != b.len() {
        return Err(SimError::GridMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.node_count() != b.node_count() {
        return Err(SimError::GridMismatch(format!(
            "{} vs {} nodes",
            a.node_count(),
            b.node_count()
        )));
    }
    if let Some(i) = (0..a.len()).find(|&i| a.times[i] != b.times[i]) {
        return Err(SimError::GridMismatch(format!(
            "sample {i}: t = {} vs {}",
            a.times[i], b.times[i]
        )));
    }

    let n = a.node_count();
    let mut deviations = Vec::with_capacity(components.len());
    for &component in components {
        let mut worst = Some(0.0f64);
        'outer: for i in 0..a.len() {
            for node in 0..n {
                match (sample(a, i, node, component), sample(b, i, node, component)) {
                    (Some(x), Some(y)) => {
                        worst = worst.map(|w| w.max((x - y).abs()));
                    }
                    _ => {
                        worst = None;
                        break 'outer;
                    }
                }
            }
        }
        deviations.push(ComponentDeviation {
            component,
            max_abs: worst,
        });
    }
    let max_deviation = deviations
        .iter()
        .filter_map(|c| c.max_abs)
        .fold(0.0, f64::max);
    Ok(DeviationReport {
        components: deviations,
        max_deviation,
        tol,
        passed: max_deviation <= tol,
    })
}
