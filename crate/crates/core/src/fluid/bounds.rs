//! Closed forms: stability conditions, queue-length lower bounds, and the
//! synchronized greenwave schedule with its long-run averages.

use super::{FluidError, FluidParams, Schedule};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeStability {
    /// G_n / U_n, must be >= lambda0 for the avenue queue.
    pub avenue_ratio: f64,
    /// R_n / U_n, must be >= lambda_n for the cross queue.
    pub cross_ratio: f64,
    pub avenue_ok: bool,
    pub cross_ok: bool,
    pub avenue_margin: f64,
    pub cross_margin: f64,
    /// Minimum feasible cycle `(Y+O) / (1 - lambda0 - lambda_n)`.
    pub min_cycle: f64,
    pub min_cycle_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub per_node: Vec<NodeStability>,
}

impl StabilityReport {
    pub fn all_stable(&self) -> bool {
        self.per_node.iter().all(|n| n.avenue_ok && n.cross_ok)
    }
}

fn check_lengths(params: &FluidParams, schedule: &Schedule) -> Result<(), FluidError> {
    if params.nodes() != schedule.nodes() {
        return Err(FluidError::InvalidParameter(format!(
            "params cover {} nodes, schedule {}",
            params.nodes(),
            schedule.nodes()
        )));
    }
    if params.yellow != schedule.yellow || params.orange != schedule.orange {
        return Err(FluidError::InvalidParameter(
            "schedule yellow/orange differ from params".into(),
        ));
    }
    Ok(())
}

/// Per-node stability of a schedule: the green share must cover the avenue
/// rate and the red share the cross rate.
pub fn check_stability(
    params: &FluidParams,
    schedule: &Schedule,
) -> Result<StabilityReport, FluidError> {
    check_lengths(params, schedule)?;
    let per_node = (0..params.nodes())
        .map(|n| {
            let u = schedule.cycle(n);
            let avenue_ratio = schedule.green[n] / u;
            let cross_ratio = schedule.red[n] / u;
            let min_cycle = params.switch_time() / (1.0 - params.lambda0 - params.lambda[n]);
            NodeStability {
                avenue_ratio,
                cross_ratio,
                avenue_ok: avenue_ratio >= params.lambda0,
                cross_ok: cross_ratio >= params.lambda[n],
                avenue_margin: avenue_ratio - params.lambda0,
                cross_margin: cross_ratio - params.lambda[n],
                min_cycle,
                min_cycle_ok: u >= min_cycle,
            }
        })
        .collect();
    Ok(StabilityReport { per_node })
}

/// Schedule-free window bounds at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Bounds {
    pub p: f64,
    pub q: f64,
    /// Lower bound on `(G_n + Y + O)^2 / U_n`, from the avenue stability
    /// condition: `lambda0 (p+1)^2 (Y+O) / p`. Feeds the cross-queue bound.
    pub avenue_bound: f64,
    /// Lower bound on `(R_n + Y + O)^2 / U_n`, from the cross stability
    /// condition: `lambda_n (q+1)^2 (Y+O) / q`. Feeds the avenue-queue bound.
    pub cross_bound: f64,
    /// The avenue-side bound is strict unless `G_n = p (Y+O)`.
    pub avenue_tight: bool,
    /// The cross-side bound is strict unless `R_n = q (Y+O)`.
    pub cross_tight: bool,
}

const TIGHT_EPS: f64 = 1e-9;

/// Window bounds of Lemma 1 at `node`, with tightness flags evaluated
/// against the given schedule.
pub fn lemma1_bounds(
    params: &FluidParams,
    schedule: &Schedule,
    node: usize,
) -> Result<Lemma1Bounds, FluidError> {
    check_lengths(params, schedule)?;
    let (l0, ln) = (params.lambda0, params.lambda[node]);
    let yo = params.switch_time();
    let slack = 1.0 - l0 - ln;
    let p = (l0 / slack).max(1.0);
    let q = (ln / slack).max(1.0);
    Ok(Lemma1Bounds {
        p,
        q,
        avenue_bound: l0 * (p + 1.0) * (p + 1.0) * yo / p,
        cross_bound: ln * (q + 1.0) * (q + 1.0) * yo / q,
        avenue_tight: (schedule.green[node] - p * yo).abs() <= TIGHT_EPS * yo,
        cross_tight: (schedule.red[node] - q * yo).abs() <= TIGHT_EPS * yo,
    })
}

/// Long-run average queue lower bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Bounds {
    /// Avenue queue at node 1: `lambda0 (R_1+Y+O)^2 / (2 (1-lambda0) U_1)`.
    pub phi1: f64,
    /// Cross queue at node n: `lambda_n (G_n+Y+O)^2 / (2 (1-lambda_n) U_n)`.
    pub psi: Vec<f64>,
    /// Schedule-free avenue bound: the red-window bound of Lemma 1 at node 1
    /// substituted into `phi1`.
    pub phi1_free: f64,
    /// Schedule-free cross bounds: the green-window bound of Lemma 1 at
    /// node n substituted into `psi[n]`.
    pub psi_free: Vec<f64>,
}

/// Evaluates the lower bounds on the long-run average avenue queue at node 1
/// and cross queues at every node, both for the given schedule and in the
/// schedule-free form.
pub fn prop1_lower_bounds(
    params: &FluidParams,
    schedule: &Schedule,
) -> Result<Prop1Bounds, FluidError> {
    check_lengths(params, schedule)?;
    let l0 = params.lambda0;
    let yo = params.switch_time();
    let u1 = schedule.cycle(0);
    let r1yo = schedule.red[0] + yo;
    let phi1 = l0 * r1yo * r1yo / (2.0 * (1.0 - l0) * u1);

    let mut psi = Vec::with_capacity(params.nodes());
    let mut psi_free = Vec::with_capacity(params.nodes());
    for n in 0..params.nodes() {
        let ln = params.lambda[n];
        let u = schedule.cycle(n);
        let gyo = schedule.green[n] + yo;
        psi.push(ln * gyo * gyo / (2.0 * (1.0 - ln) * u));
        let windows = lemma1_bounds(params, schedule, n)?;
        psi_free.push(ln * windows.avenue_bound / (2.0 * (1.0 - ln)));
    }
    let windows1 = lemma1_bounds(params, schedule, 0)?;
    let phi1_free = l0 * windows1.cross_bound / (2.0 * (1.0 - l0));
    Ok(Prop1Bounds {
        phi1,
        psi,
        phi1_free,
        psi_free,
    })
}

/// Whether the greenwave at `delta = 0` attains the schedule-free bounds:
/// uniform cross rates with both Lemma 1 minimizers interior, i.e.
/// `lambda0 + 2 lambda1 >= 1` and `2 lambda0 + lambda1 >= 1`.
pub fn free_bounds_tight_at_zero(params: &FluidParams) -> bool {
    if !params.is_uniform() {
        return false;
    }
    let (l0, l1) = (params.lambda0, params.lambda[0]);
    l0 + 2.0 * l1 >= 1.0 && 2.0 * l0 + l1 >= 1.0
}

/// The synchronized greenwave schedule: common green and red periods scaled
/// by `1 + delta` above the minimal stable timings, all offsets zero.
pub fn greenwave_schedule(params: &FluidParams, delta: f64) -> Result<Schedule, FluidError> {
    if !(delta >= 0.0) {
        return Err(FluidError::InvalidParameter("delta must be >= 0".into()));
    }
    let l0 = params.lambda0;
    let lm = params.lambda_max();
    if l0 <= 0.0 || lm <= 0.0 {
        return Err(FluidError::InvalidParameter(
            "greenwave timings need positive avenue and cross rates".into(),
        ));
    }
    let yo = params.switch_time();
    let slack = 1.0 - l0 - lm;
    let green = l0 * (1.0 + delta) * yo / slack;
    let red = lm * (1.0 + delta) * yo / slack;
    Schedule::uniform(green, red, vec![0.0; params.nodes()], params.yellow, params.orange)
}

/// Greenwave timings and long-run average queue lengths at slack `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenwaveDerived {
    pub delta: f64,
    pub green: f64,
    pub red: f64,
    /// Common cycle `U(delta)`.
    pub cycle: f64,
    /// Long-run average avenue queue at node 1; zero at every node n >= 2.
    pub phi1: f64,
    /// Long-run average cross queue per node.
    pub psi: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Closed-form long-run averages under the greenwave schedule.
pub fn greenwave_averages(
    params: &FluidParams,
    delta: f64,
) -> Result<GreenwaveDerived, FluidError> {
    let schedule = greenwave_schedule(params, delta)?;
    let l0 = params.lambda0;
    let lm = params.lambda_max();
    let yo = params.switch_time();
    let slack = 1.0 - l0 - lm;
    let scale = 1.0 + delta * (l0 + lm);
    let cycle = scale * yo / slack;

    let phi1_num = 1.0 - l0 + delta * lm;
    let phi1 = l0 * phi1_num * phi1_num * yo / (2.0 * (1.0 - l0) * slack * scale);
    let psi = params
        .lambda
        .iter()
        .map(|&ln| {
            let num = 1.0 + delta * l0 - lm;
            ln * num * num * yo / (2.0 * (1.0 - ln) * slack * scale)
        })
        .collect();
    let (mut p, mut q) = (Vec::new(), Vec::new());
    for n in 0..params.nodes() {
        let w = lemma1_bounds(params, &schedule, n)?;
        p.push(w.p);
        q.push(w.q);
    }
    Ok(GreenwaveDerived {
        delta,
        green: schedule.green[0],
        red: schedule.red[0],
        cycle,
        phi1,
        psi,
        p,
        q,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityGap {
    pub phi1: f64,
    pub psi: Vec<f64>,
}

/// Relative excess of the greenwave averages at `delta` over their
/// `delta = 0` limits.
pub fn optimality_gap(params: &FluidParams, delta: f64) -> Result<OptimalityGap, FluidError> {
    let at_delta = greenwave_averages(params, delta)?;
    let at_zero = greenwave_averages(params, 0.0)?;
    let rel = |v: f64, v0: f64| {
        if v0 == 0.0 {
            0.0
        } else {
            (v - v0) / v0
        }
    };
    Ok(OptimalityGap {
        phi1: rel(at_delta.phi1, at_zero.phi1),
        psi: at_delta
            .psi
            .iter()
            .zip(&at_zero.psi)
            .map(|(&a, &b)| rel(a, b))
            .collect(),
    })
}
