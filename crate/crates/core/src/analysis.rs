//! Subspace analysis of trained agents: PCA of `W`, unit-circle sampling of
//! `Φ` and CSV export/import of the compositional matrix.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::envs::TaskSpec;
use crate::error::{Error, Result};
use crate::sac::SacAgent;
use crate::trainer::{rollout_summary, RolloutSummary};

const JACOBI_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric `n × n` row-major matrix by cyclic
/// Jacobi rotations.
///
/// Returns eigenvalues in nonincreasing order and the matching unit
/// eigenvectors.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if a.len() != n * n {
        return Err(Error::dim("symmetric_eigen", &[n, n], &[a.len()]));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Analysis("matrix has non-finite entries".into()));
    }
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale * 1e-3 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    Ok((values, vectors))
}

/// Flips `v` so that its largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Principal components of the task vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// Unit principal directions, strongest first.
    pub directions: Vec<Vec<f64>>,
    /// Per-task coordinates along `directions`.
    pub coordinates: Vec<Vec<f64>>,
    /// Covariance eigenvalue of each direction.
    pub variances: Vec<f64>,
    /// `variance / total variance`; all zero for a degenerate cloud.
    pub explained_ratio: Vec<f64>,
}

impl PcaProjection {
    /// `mean + Σ_c coordinate_c · direction_c` for every task.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        self.coordinates
            .iter()
            .map(|coords| {
                let mut x = self.mean.clone();
                for (c, dir) in coords.iter().zip(&self.directions) {
                    for (xi, di) in x.iter_mut().zip(dir) {
                        *xi += c * di;
                    }
                }
                x
            })
            .collect()
    }
}

/// PCA of `vectors` keeping `components` directions.
///
/// The covariance is `(1/T) Σ (w_τ - μ)(w_τ - μ)ᵀ`.
pub fn pca_with(vectors: &[Vec<f64>], components: usize) -> Result<PcaProjection> {
    let t = vectors.len();
    if t < 2 {
        return Err(Error::Analysis(format!("PCA needs at least 2 task vectors, got {t}")));
    }
    let k = vectors[0].len();
    if k < 2 {
        return Err(Error::Analysis(format!("PCA needs K >= 2, got K = {k}")));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != k) {
        return Err(Error::dim("pca", &[k], &[v.len()]));
    }
    if components == 0 || components > k {
        return Err(Error::Analysis(format!("cannot keep {components} of {k} components")));
    }
    // Mean accumulated relative to the first vector.
    let origin = &vectors[0];
    let mut mean = vec![0.0; k];
    for v in vectors {
        for ((m, x), o) in mean.iter_mut().zip(v).zip(origin) {
            *m += x - o;
        }
    }
    for (m, o) in mean.iter_mut().zip(origin) {
        *m = o + *m / t as f64;
    }
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![0.0; k * k];
    for c in &centered {
        for i in 0..k {
            for j in 0..k {
                cov[i * k + j] += c[i] * c[j];
            }
        }
    }
    cov.iter_mut().for_each(|x| *x /= t as f64);
    let (values, mut vectors_e) = symmetric_eigen(&cov, k)?;
    for v in vectors_e.iter_mut() {
        fix_sign(v);
    }
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let variances: Vec<f64> = values.iter().take(components).map(|v| v.max(0.0)).collect();
    let explained_ratio = variances
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    let directions: Vec<Vec<f64>> = vectors_e.into_iter().take(components).collect();
    let coordinates = centered
        .iter()
        .map(|c| directions.iter().map(|d| c.iter().zip(d).map(|(a, b)| a * b).sum()).collect())
        .collect();
    Ok(PcaProjection {
        mean,
        directions,
        coordinates,
        variances,
        explained_ratio,
    })
}

/// Two-component PCA of `W`.
pub fn pca(vectors: &[Vec<f64>]) -> Result<PcaProjection> {
    pca_with(vectors, 2)
}

/// `task,pc1,pc2,...` rows of projected coordinates.
pub fn pca_csv(p: &PcaProjection, task_names: &[String]) -> String {
    let mut out = String::from("task");
    for c in 0..p.directions.len() {
        let _ = write!(out, ",pc{}", c + 1);
    }
    out.push('\n');
    for (name, coords) in task_names.iter().zip(&p.coordinates) {
        out.push_str(name);
        for c in coords {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    out
}

/// `component,variance,explained_ratio,<direction entries>` rows.
pub fn pca_components_csv(p: &PcaProjection) -> String {
    let k = p.mean.len();
    let mut out = String::from("component,variance,explained_ratio");
    for i in 0..k {
        let _ = write!(out, ",w{}", i + 1);
    }
    out.push('\n');
    let _ = write!(out, "mean,,");
    for m in &p.mean {
        let _ = write!(out, ",{m}");
    }
    out.push('\n');
    for (c, dir) in p.directions.iter().enumerate() {
        let _ = write!(out, "pc{},{},{}", c + 1, p.variances[c], p.explained_ratio[c]);
        for d in dir {
            let _ = write!(out, ",{d}");
        }
        out.push('\n');
    }
    out
}

/// `(cos θ, sin θ)`, exact at multiples of π/2.
pub fn unit_circle_point(angle: f64) -> [f64; 2] {
    let quarter = angle / FRAC_PI_2;
    let nearest = quarter.round();
    if (quarter - nearest).abs() <= 4.0 * f64::EPSILON * quarter.abs().max(1.0) {
        return match (nearest as i64).rem_euclid(4) {
            0 => [1.0, 0.0],
            1 => [0.0, 1.0],
            2 => [-1.0, 0.0],
            _ => [0.0, -1.0],
        };
    }
    [angle.cos(), angle.sin()]
}

/// `n` evenly spaced angles on `[0, 2π)`.
pub fn angle_sweep(n: usize) -> Vec<f64> {
    (0..n).map(|i| 4.0 * FRAC_PI_2 * i as f64 / n as f64).collect()
}

/// Angle of a 2-D vector in `[0, 2π)`.
pub fn angle_of(w: &[f64]) -> f64 {
    let a = w[1].atan2(w[0]);
    if a < 0.0 {
        a + 4.0 * FRAC_PI_2
    } else {
        a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSample {
    pub angle: f64,
    pub w: [f64; 2],
    /// `cos θ · φ_1 + sin θ · φ_2`.
    pub theta: Vec<f64>,
    /// One summary per evaluated task spec.
    pub rollouts: Vec<RolloutSummary>,
}

/// Composes a policy at each angle and rolls it out on every spec.
pub fn subspace_sample(
    agent: &SacAgent,
    specs: &[TaskSpec],
    angles: &[f64],
    episodes: usize,
    seed: u64,
) -> Result<Vec<SubspaceSample>> {
    let cfg = agent.config();
    if cfg.k != 2 {
        return Err(Error::Analysis(format!(
            "unit-circle sampling needs K = 2, the checkpoint has K = {}",
            cfg.k
        )));
    }
    if !cfg.normalize_w {
        return Err(Error::Analysis(
            "unit-circle sampling needs a checkpoint trained with normalized w".into(),
        ));
    }
    angles
        .iter()
        .map(|&angle| {
            let w = unit_circle_point(angle);
            let theta = crate::compose::compose(agent.phi(), &w)?.theta;
            let policy = agent.policy_for_w(&w)?;
            let rollouts = specs
                .iter()
                .map(|spec| rollout_summary(&policy, spec, episodes, seed))
                .collect::<Result<Vec<_>>>()?;
            Ok(SubspaceSample {
                angle,
                w,
                theta,
                rollouts,
            })
        })
        .collect()
}

/// `angle,w1,w2,success_<task>,return_<task>...` rows.
pub fn subspace_csv(samples: &[SubspaceSample], task_names: &[String]) -> String {
    let mut out = String::from("angle,w1,w2");
    for n in task_names {
        let _ = write!(out, ",success_{n}");
    }
    for n in task_names {
        let _ = write!(out, ",return_{n}");
    }
    out.push('\n');
    for s in samples {
        let _ = write!(out, "{},{},{}", s.angle, s.w[0], s.w[1]);
        for r in &s.rollouts {
            let _ = write!(out, ",{}", r.success);
        }
        for r in &s.rollouts {
            let _ = write!(out, ",{}", r.mean_return);
        }
        out.push('\n');
    }
    out
}

/// `W` as a `K × T` CSV: header `component,<task names>`, one row per
/// component. Values use shortest round-trip formatting.
pub fn export_w_csv(vectors: &[Vec<f64>], task_names: &[String]) -> Result<String> {
    if vectors.len() != task_names.len() {
        return Err(Error::dim("export_w", &[vectors.len()], &[task_names.len()]));
    }
    if let Some(name) = task_names.iter().find(|n| n.contains(',') || n.contains('\n')) {
        return Err(Error::Analysis(format!("task name '{name}' cannot be written to CSV")));
    }
    let k = vectors.first().map_or(0, |v| v.len());
    let mut out = String::from("component");
    for n in task_names {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for i in 0..k {
        let _ = write!(out, "{}", i + 1);
        for v in vectors {
            let _ = write!(out, ",{}", v[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses [`export_w_csv`] output back into task names and vectors.
pub fn import_w_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Analysis("empty W file".into()))?;
    let mut cols = header.split(',');
    if cols.next() != Some("component") {
        return Err(Error::Analysis("W file must start with a 'component' column".into()));
    }
    let names: Vec<String> = cols.map(str::to_string).collect();
    let mut vectors = vec![Vec::new(); names.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() + 1 {
            return Err(Error::Analysis(format!(
                "W row {} has {} fields, expected {}",
                row + 1,
                fields.len(),
                names.len() + 1
            )));
        }
        for (v, f) in vectors.iter_mut().zip(&fields[1..]) {
            let x: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Analysis(format!("bad number '{f}' in W row {}", row + 1)))?;
            v.push(x);
        }
    }
    Ok((names, vectors))
}
