//! Conservation diagnostics, electric-energy trace, error norms and
//! convergence rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{ElementTables, ReferenceElement};
use crate::mesh::{TensorMesh, MAX_DIM};

/// Value reported for `ln ‖E‖` when the field vanishes.
pub const LOG_ENERGY_FLOOR: f64 = -100.0;

/// `ln (∫ E²)^{1/2}` from the field energy `∫ E²`.
pub fn electric_energy_log(field_energy: f64) -> f64 {
    if field_energy > 0.0 {
        (0.5 * field_energy.ln()).max(LOG_ENERGY_FLOOR)
    } else {
        LOG_ENERGY_FLOOR
    }
}

/// One row of the time-series output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub momentum: f64,
    pub kinetic_energy: f64,
    /// `½ ∫ E²`
    pub electric_energy: f64,
    pub total_energy: f64,
    /// `(∫ f²)^{1/2}`
    pub l2norm: f64,
    #[serde(rename = "Ee_log")]
    pub ee_log: f64,
    pub max_eps_x: f64,
    pub max_eps_v: f64,
}

impl SeriesRow {
    pub const COLUMNS: [&'static str; 11] = [
        "t",
        "dt",
        "mass",
        "momentum",
        "kinetic_energy",
        "electric_energy",
        "total_energy",
        "l2norm",
        "Ee_log",
        "max_eps_x",
        "max_eps_v",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.t,
            self.dt,
            self.mass,
            self.momentum,
            self.kinetic_energy,
            self.electric_energy,
            self.total_energy,
            self.l2norm,
            self.ee_log,
            self.max_eps_x,
            self.max_eps_v,
        ]
    }
}

/// `(q(t) − q(0)) / q(0)` for every entry.
pub fn relative_deviation(series: &[f64]) -> Vec<f64> {
    let Some(&q0) = series.first() else {
        return Vec::new();
    };
    series.iter().map(|q| (q - q0) / q0).collect()
}

/// `(q(t) − q(0)) / scale`, for quantities whose initial value may vanish.
pub fn scaled_deviation(series: &[f64], scale: f64) -> Vec<f64> {
    let Some(&q0) = series.first() else {
        return Vec::new();
    };
    series.iter().map(|q| (q - q0) / scale).collect()
}

/// Deviation series of the conserved quantities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Deviations {
    pub mass: Vec<f64>,
    /// Absolute momentum change divided by the initial mass.
    pub momentum: Vec<f64>,
    pub total_energy: Vec<f64>,
    pub l2norm: Vec<f64>,
}

pub fn deviations(rows: &[SeriesRow]) -> Deviations {
    let col = |f: fn(&SeriesRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let mass = col(|r| r.mass);
    let m0 = mass.first().copied().unwrap_or(1.0);
    Deviations {
        mass: relative_deviation(&mass),
        momentum: scaled_deviation(&col(|r| r.momentum), m0),
        total_energy: relative_deviation(&col(|r| r.total_energy)),
        l2norm: relative_deviation(&col(|r| r.l2norm)),
    }
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Interior local maxima `(t_i, y_i)` of a sampled signal.
pub fn local_maxima(t: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .map(|i| (t[i], y[i]))
        .collect()
}

/// Least-squares slope and intercept.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Config("line fit needs at least two points".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Singular("line fit through coincident abscissae".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Damping rate `−slope` of a line through the first `count` local maxima of `E_e(t)`.
pub fn damping_rate(t: &[f64], ee: &[f64], count: usize) -> Result<f64> {
    let peaks: Vec<(f64, f64)> = local_maxima(t, ee).into_iter().take(count).collect();
    if peaks.len() < count {
        return Err(Error::Config(format!(
            "only {} local maxima available, {count} requested",
            peaks.len()
        )));
    }
    Ok(-linear_fit(&peaks)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Norms of `f_h − g` and of `g` by element quadrature; `L∞` is taken over
/// the quadrature points.
fn norms_by_quadrature<G>(mesh: &TensorMesh, f: &[f64], points: usize, exact: G) -> (ErrorNorms, ErrorNorms)
where
    G: Fn(&[f64]) -> f64,
{
    let el = ReferenceElement::with_quadrature(mesh.degree(), points);
    let tables = ElementTables::new(mesh, &el);
    let mut local = vec![0.0; mesh.n_local()];
    let mut err = ErrorNorms::default();
    let mut size = ErrorNorms::default();
    let mut x = [0.0; MAX_DIM];
    for e in 0..mesh.n_elements() {
        for (l, &g) in local.iter_mut().zip(mesh.element_dofs(e)) {
            *l = f[g];
        }
        let origin = mesh.element_origin(e);
        for q in 0..tables.n_qp {
            for ax in 0..mesh.dim() {
                x[ax] = origin[ax] + tables.offsets[q][ax];
            }
            let g = exact(&x[..mesh.dim()]);
            let d = tables.interpolate(q, &local) - g;
            let w = tables.weights[q];
            err.l1 += w * d.abs();
            err.l2 += w * d * d;
            err.linf = err.linf.max(d.abs());
            size.l1 += w * g.abs();
            size.l2 += w * g * g;
            size.linf = size.linf.max(g.abs());
        }
    }
    err.l2 = err.l2.sqrt();
    size.l2 = size.l2.sqrt();
    (err, size)
}

/// Norms of `f − reference` for two nodal fields on the same mesh.
pub fn error_norms(f: &[f64], reference: &[f64], mesh: &TensorMesh) -> Result<ErrorNorms> {
    for len in [f.len(), reference.len()] {
        if len != mesh.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_nodes(),
                got: len,
            });
        }
    }
    let diff: Vec<f64> = f.iter().zip(reference).map(|(a, b)| a - b).collect();
    let (mut n, _) = norms_by_quadrature(mesh, &diff, mesh.degree() + 2, |_| 0.0);
    n.linf = max_abs(&diff);
    Ok(n)
}

fn check_len(f: &[f64], mesh: &TensorMesh) -> Result<()> {
    if f.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Norms of `f_h − g` for a nodal field and a closed-form function, all
/// three evaluated with a `k + 4` point rule.
pub fn error_vs_function<G>(f: &[f64], mesh: &TensorMesh, g: G) -> Result<ErrorNorms>
where
    G: Fn(&[f64]) -> f64,
{
    check_len(f, mesh)?;
    Ok(norms_by_quadrature(mesh, f, mesh.degree() + 4, g).0)
}

/// [`error_vs_function`] with each norm divided by the same norm of `g`.
pub fn relative_error_vs_function<G>(f: &[f64], mesh: &TensorMesh, g: G) -> Result<ErrorNorms>
where
    G: Fn(&[f64]) -> f64,
{
    check_len(f, mesh)?;
    let (e, s) = norms_by_quadrature(mesh, f, mesh.degree() + 4, g);
    if !(s.l1 > 0.0 && s.l2 > 0.0 && s.linf > 0.0) {
        return Err(Error::Config("relative error against a vanishing function".into()));
    }
    Ok(ErrorNorms {
        l1: e.l1 / s.l1,
        l2: e.l2 / s.l2,
        linf: e.linf / s.linf,
    })
}

/// `rate_i = log₂(e_{i−1} / e_i)`.
pub fn convergence_rates(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::Config("convergence rates need at least two errors".into()));
    }
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Config("convergence rates need positive errors".into()));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_rates() {
        let r = convergence_rates(&[4e-2, 1e-2]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-14);
        let r = convergence_rates(&[8e-3, 1e-3]).unwrap();
        assert!((r[0] - 3.0).abs() < 1e-14);
        assert!(convergence_rates(&[1.0, 0.0]).is_err());
        assert!(convergence_rates(&[1.0]).is_err());
    }

    #[test]
    fn floor_for_zero_field() {
        assert_eq!(electric_energy_log(0.0), LOG_ENERGY_FLOOR);
        assert!((electric_energy_log(std::f64::consts::PI) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_slope() {
        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| -0.2 * t + (2.0 * t).sin()).collect();
        let peaks = local_maxima(&t, &y);
        assert!(peaks.len() >= 5);
        // Peaks of sin(2t) − 0.2t lie on a line of slope −0.2.
        assert!((damping_rate(&t, &y, 5).unwrap() - 0.2).abs() < 1e-2);
    }

    #[test]
    fn constant_series_has_zero_deviation() {
        assert!(relative_deviation(&[2.0, 2.0, 2.0]).iter().all(|&d| d == 0.0));
    }
}
