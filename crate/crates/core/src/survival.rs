//! Cumulative hazards and proportional-hazards regression on pseudotime.
//!
//! Subjects that never experience the event are censored at their own
//! pseudotime. A subject lying on several trajectories enters the risk set
//! of each one.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::stats::special::{chi2_sf, normal_two_sided_p};
use crate::dataset::Num;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTable {
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    /// Cause of each event; `None` for censored subjects.
    pub cause: Vec<Option<String>>,
    /// Declared causes, including ones that never occur.
    pub cause_levels: Vec<String>,
    pub covariate_names: Vec<String>,
    /// One row of covariates per subject.
    pub covariates: Vec<Vec<f64>>,
}

impl EventTable {
    pub fn new(time: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        if time.len() != event.len() {
            return Err(Error::DimensionMismatch {
                expected: time.len(),
                found: event.len(),
            });
        }
        if let Some(t) = time.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::InvalidArgument(format!("event time {t} must be finite and non-negative")));
        }
        let n = time.len();
        Ok(EventTable {
            time,
            event,
            cause: vec![None; n],
            cause_levels: Vec::new(),
            covariate_names: Vec::new(),
            covariates: vec![Vec::new(); n],
        })
    }

    pub fn with_causes(mut self, cause: Vec<Option<String>>, levels: Vec<String>) -> Result<Self> {
        if cause.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: cause.len(),
            });
        }
        for (i, c) in cause.iter().enumerate() {
            match c {
                Some(c) if !self.event[i] => {
                    return Err(Error::InvalidArgument(format!("subject {i} is censored but has cause {c}")))
                }
                Some(c) if !levels.contains(c) => return Err(Error::UnknownCause(c.clone())),
                None if self.event[i] => {
                    return Err(Error::InvalidArgument(format!("subject {i} has an event without a cause")))
                }
                _ => {}
            }
        }
        self.cause = cause;
        self.cause_levels = levels;
        Ok(self)
    }

    pub fn with_covariates(mut self, names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: rows.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != names.len()) {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                found: r.len(),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::MissingValues);
        }
        self.covariate_names = names;
        self.covariates = rows;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|e| **e).count()
    }

    pub fn subset(&self, rows: &[usize]) -> EventTable {
        EventTable {
            time: rows.iter().map(|&i| self.time[i]).collect(),
            event: rows.iter().map(|&i| self.event[i]).collect(),
            cause: rows.iter().map(|&i| self.cause[i].clone()).collect(),
            cause_levels: self.cause_levels.clone(),
            covariate_names: self.covariate_names.clone(),
            covariates: rows.iter().map(|&i| self.covariates[i].clone()).collect(),
        }
    }
}

/// Step function of the Nelson-Aalen estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardCurve {
    /// Event times, ascending.
    pub times: Vec<f64>,
    pub cumhaz: Vec<f64>,
    pub variance: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl HazardCurve {
    /// H(t), zero before the first event.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumhaz[k - 1]
        }
    }

    pub fn variance_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.variance[k - 1]
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "t,H,var").map_err(io)?;
        for k in 0..self.times.len() {
            writeln!(w, "{},{},{}", Num(self.times[k]), Num(self.cumhaz[k]), Num(self.variance[k])).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn nelson_aalen_where(table: &EventTable, counts: impl Fn(usize) -> bool) -> HazardCurve {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table.time[a].total_cmp(&table.time[b]));
    let mut curve = HazardCurve {
        times: Vec::new(),
        cumhaz: Vec::new(),
        variance: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
    };
    let (mut h, mut var) = (0.0, 0.0);
    let mut k = 0;
    while k < order.len() {
        let t = table.time[order[k]];
        let at_risk = order.len() - k;
        let mut d = 0;
        let mut j = k;
        while j < order.len() && table.time[order[j]] == t {
            if table.event[order[j]] && counts(order[j]) {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            let (df, nf) = (d as f64, at_risk as f64);
            h += df / nf;
            var += df / (nf * nf);
            curve.times.push(t);
            curve.cumhaz.push(h);
            curve.variance.push(var);
            curve.at_risk.push(at_risk);
            curve.events.push(d);
        }
        k = j;
    }
    curve
}

/// Nelson-Aalen cumulative hazard over all events.
pub fn nelson_aalen(table: &EventTable) -> Result<HazardCurve> {
    if table.is_empty() {
        return Err(Error::InsufficientData("event table is empty".into()));
    }
    Ok(nelson_aalen_where(table, |_| true))
}

/// Cumulative hazard of each cause, counting other causes as censoring.
pub fn cause_specific_hazards(table: &EventTable, causes: &[String]) -> Result<BTreeMap<String, HazardCurve>> {
    if table.is_empty() {
        return Err(Error::InsufficientData("event table is empty".into()));
    }
    if table.cause_levels.is_empty() {
        return Err(Error::InvalidArgument("event table has no cause labels".into()));
    }
    let mut out = BTreeMap::new();
    for c in causes {
        if !table.cause_levels.contains(c) {
            return Err(Error::UnknownCause(c.clone()));
        }
        let curve = nelson_aalen_where(table, |i| table.cause[i].as_deref() == Some(c.as_str()));
        out.insert(c.clone(), curve);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ridge penalty applied; non-zero only after separation.
    pub ridge: f64,
}

const SEPARATION_RIDGE: f64 = 1.0;
const MAX_COEFFICIENT: f64 = 20.0;

struct CoxState {
    ll: f64,
    grad: DVector<f64>,
    info: DMatrix<f64>,
}

/// Breslow partial likelihood, gradient and observed information.
fn cox_state(order: &[usize], table: &EventTable, beta: &DVector<f64>, ridge: f64) -> CoxState {
    let p = beta.len();
    let mut ll = 0.0;
    let mut grad = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut k = 0;
    // order is by descending time, so risk sets grow as we go
    while k < order.len() {
        let t = table.time[order[k]];
        let mut j = k;
        let mut d = 0.0;
        let mut xsum = DVector::zeros(p);
        let mut eta_sum = 0.0;
        while j < order.len() && table.time[order[j]] == t {
            let i = order[j];
            let x = DVector::from_column_slice(&table.covariates[i]);
            let eta = x.dot(beta);
            let w = eta.exp();
            s0 += w;
            s1.axpy(w, &x, 1.0);
            s2.ger(w, &x, &x, 1.0);
            if table.event[i] {
                d += 1.0;
                xsum += &x;
                eta_sum += eta;
            }
            j += 1;
        }
        if d > 0.0 {
            let mean = &s1 / s0;
            ll += eta_sum - d * s0.ln();
            grad += xsum - &mean * d;
            info += (&s2 / s0 - &mean * mean.transpose()) * d;
        }
        k = j;
    }
    ll -= 0.5 * ridge * beta.norm_squared();
    grad -= beta * ridge;
    for a in 0..p {
        info[(a, a)] += ridge;
    }
    CoxState { ll, grad, info }
}

fn newton(order: &[usize], table: &EventTable, ridge: f64) -> (DVector<f64>, CoxState, usize, bool) {
    let p = table.covariate_names.len();
    let mut beta = DVector::zeros(p);
    let mut state = cox_state(order, table, &beta, ridge);
    for it in 1..=100 {
        if state.grad.norm() < 1e-8 {
            return (beta, state, it - 1, true);
        }
        let step = match state.info.clone().cholesky() {
            Some(c) => c.solve(&state.grad),
            None => match state.info.clone().lu().solve(&state.grad) {
                Some(s) => s,
                None => return (beta, state, it, false),
            },
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + &step * scale;
            let cs = cox_state(order, table, &cand, ridge);
            if cs.ll.is_finite() && cs.ll >= state.ll - 1e-12 * state.ll.abs().max(1.0) {
                beta = cand;
                state = cs;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || beta.amax() > MAX_COEFFICIENT {
            return (beta, state, it, false);
        }
    }
    let ok = state.grad.norm() < 1e-8;
    (beta, state, 100, ok)
}

fn check_collinearity(table: &EventTable) -> Result<()> {
    let n = table.len();
    let p = table.covariate_names.len();
    let mut x = DMatrix::zeros(n, p);
    for (i, row) in table.covariates.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            x[(i, k)] = *v;
        }
    }
    for k in 0..p {
        let mean = x.column(k).mean();
        x.column_mut(k).add_scalar_mut(-mean);
    }
    let svd = x.svd(false, true);
    let smax = svd.singular_values.max();
    let vt = svd.v_t.expect("requested V^T");
    for (r, &s) in svd.singular_values.iter().enumerate() {
        if s <= 1e-10 * smax.max(1e-300) {
            let involved: Vec<String> = (0..p)
                .filter(|&k| vt[(r, k)].abs() > 1e-6)
                .map(|k| table.covariate_names[k].clone())
                .collect();
            return Err(Error::Collinear(involved.join(", ")));
        }
    }
    if p > n {
        return Err(Error::Collinear(table.covariate_names.join(", ")));
    }
    Ok(())
}

/// Cox proportional-hazards regression with Breslow ties. If the partial
/// likelihood is monotone (separation), a ridge-damped fit is returned and
/// `converged` is false.
pub fn cox_fit(table: &EventTable) -> Result<CoxFit> {
    let p = table.covariate_names.len();
    if p == 0 {
        return Err(Error::InvalidArgument("no covariates to fit".into()));
    }
    let mut event_times: Vec<f64> = (0..table.len()).filter(|&i| table.event[i]).map(|i| table.time[i]).collect();
    event_times.sort_by(|a, b| a.total_cmp(b));
    event_times.dedup();
    if event_times.len() < 2 {
        return Err(Error::InsufficientData("Cox regression needs at least 2 distinct event times".into()));
    }
    check_collinearity(table)?;
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table.time[b].total_cmp(&table.time[a]));
    let (mut beta, mut state, mut iterations, mut converged) = newton(&order, table, 0.0);
    let mut ridge = 0.0;
    if !converged {
        log::warn!("Cox partial likelihood did not converge (separation?); refitting with ridge {SEPARATION_RIDGE}");
        ridge = SEPARATION_RIDGE;
        let (b, s, it, _) = newton(&order, table, ridge);
        beta = b;
        state = s;
        iterations = it;
        converged = false;
    }
    let cov = state
        .info
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Collinear(table.covariate_names.join(", ")))?;
    let se: Vec<f64> = (0..p).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();
    let p_values = beta
        .iter()
        .zip(&se)
        .map(|(b, s)| if *s > 0.0 { normal_two_sided_p(b / s) } else { 1.0 })
        .collect();
    Ok(CoxFit {
        names: table.covariate_names.clone(),
        coefficients: beta.iter().copied().collect(),
        standard_errors: se,
        p_values,
        log_likelihood: state.ll + 0.5 * ridge * beta.norm_squared(),
        iterations,
        converged,
        ridge,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group0: HazardCurve,
    pub group1: HazardCurve,
    pub statistic: f64,
    pub p_value: f64,
}

/// Nelson-Aalen curve per group and the log-rank test between them.
pub fn group_cumhazard_compare(table: &EventTable, group: &[bool]) -> Result<GroupComparison> {
    if group.len() != table.len() {
        return Err(Error::DimensionMismatch {
            expected: table.len(),
            found: group.len(),
        });
    }
    let g1: Vec<usize> = (0..table.len()).filter(|&i| group[i]).collect();
    let g0: Vec<usize> = (0..table.len()).filter(|&i| !group[i]).collect();
    if g0.is_empty() || g1.is_empty() {
        return Err(Error::InvalidArgument("both groups must be non-empty".into()));
    }
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table.time[a].total_cmp(&table.time[b]));
    let mut n = table.len() as f64;
    let mut n1 = g1.len() as f64;
    let (mut o_minus_e, mut v) = (0.0, 0.0);
    let mut k = 0;
    while k < order.len() {
        let t = table.time[order[k]];
        let (mut d, mut d1, mut leaving, mut leaving1) = (0.0, 0.0, 0.0, 0.0);
        let mut j = k;
        while j < order.len() && table.time[order[j]] == t {
            let i = order[j];
            if table.event[i] {
                d += 1.0;
                if group[i] {
                    d1 += 1.0;
                }
            }
            leaving += 1.0;
            if group[i] {
                leaving1 += 1.0;
            }
            j += 1;
        }
        if d > 0.0 {
            o_minus_e += d1 - d * n1 / n;
            if n > 1.0 {
                v += d * (n1 / n) * (1.0 - n1 / n) * (n - d) / (n - 1.0);
            }
        }
        n -= leaving;
        n1 -= leaving1;
        k = j;
    }
    let (statistic, p_value) = if v > 0.0 {
        let s = o_minus_e * o_minus_e / v;
        (s, chi2_sf(s, 1.0))
    } else {
        log::warn!("log-rank test has no information (no events); reporting p = 1");
        (0.0, 1.0)
    };
    Ok(GroupComparison {
        group0: nelson_aalen_where(&table.subset(&g0), |_| true),
        group1: nelson_aalen_where(&table.subset(&g1), |_| true),
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
    })
}
