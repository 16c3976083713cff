//! Per-step certificate time series as CSV.

use std::io::{self, Write};

use crate::certificates::total_energy;
use crate::fem::divergence_residual;
use crate::mesh::TriMesh;
use crate::state::{DiscreteState, PhysParams, StepCertificate};

pub const TIMESERIES_COLUMNS: [&str; 26] = [
    "step",
    "t",
    "energy",
    "viscous",
    "director",
    "drift",
    "charge",
    "dissipation",
    "damping",
    "stabilization",
    "residual",
    "max_norm_violation",
    "n_plus_min",
    "n_plus_max",
    "n_minus_min",
    "n_minus_max",
    "charge_change_plus",
    "charge_change_minus",
    "divergence",
    "m_matrix_plus",
    "m_matrix_minus",
    "fp_iters",
    "newton_iters",
    "fp_increment",
    "energy_before",
    "certified",
];

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn audit(a: Option<bool>) -> &'static str {
    match a {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "na",
    }
}

/// Streams one row per step; rows are flushed as they are written.
pub struct TimeseriesWriter<W: Write> {
    out: W,
}

impl<W: Write> TimeseriesWriter<W> {
    /// Writes the header.
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{}", TIMESERIES_COLUMNS.join(","))?;
        out.flush()?;
        Ok(TimeseriesWriter { out })
    }

    fn row(&mut self, fields: &[String]) -> io::Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        self.out.flush()
    }

    /// Row for the initial state: energy and invariants, no dissipation.
    pub fn initial(&mut self, state: &DiscreteState, mesh: &TriMesh, params: &PhysParams) -> io::Result<()> {
        let e = total_energy(state, mesh, params).total;
        let (np, nm) = (range(&state.n_plus.values), range(&state.n_minus.values));
        let div = divergence_residual(mesh, &state.velocity)
            .iter()
            .fold(0.0f64, |a, b| a.max(b.abs()));
        let f = |v: f64| format!("{v:.16e}");
        let mut fields = vec![state.step_index.to_string(), f(state.t), f(e)];
        fields.extend(std::iter::repeat_n(f(0.0), 8));
        fields.extend([
            f(state.director.max_norm_deviation().0),
            f(np.0),
            f(np.1),
            f(nm.0),
            f(nm.1),
            f(0.0),
            f(0.0),
            f(div),
            "na".into(),
            "na".into(),
            "0".into(),
            "0".into(),
            f(0.0),
            f(e),
            "false".into(),
        ]);
        self.row(&fields)
    }

    pub fn push(&mut self, c: &StepCertificate) -> io::Result<()> {
        let f = |v: f64| format!("{v:.16e}");
        let law = c.energy_law.as_ref();
        let t = law.map(|l| l.terms).unwrap_or_default();
        let (mp, mm) = c.m_matrix_pass();
        let fields = vec![
            c.step.to_string(),
            f(c.t),
            f(c.energy_after),
            f(t.viscous),
            f(t.director),
            f(t.drift),
            f(t.charge),
            f(law.map_or(0.0, |l| l.dissipation)),
            f(law.map_or(0.0, |l| l.damping)),
            f(law.map_or(0.0, |l| l.stabilization)),
            f(c.energy_residual()),
            f(c.max_norm_violation),
            f(c.n_plus_range.0),
            f(c.n_plus_range.1),
            f(c.n_minus_range.0),
            f(c.n_minus_range.1),
            f(c.charge_mass_change.0),
            f(c.charge_mass_change.1),
            f(c.divergence_norm),
            audit(mp).into(),
            audit(mm).into(),
            c.fixed_point_iters.to_string(),
            c.newton_iters.to_string(),
            f(c.fixed_point_increment),
            f(c.energy_before),
            law.is_some().to_string(),
        ];
        self.row(&fields)
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Writes a complete series: header, initial row, one row per certificate.
pub fn write_timeseries<W: Write>(
    out: W,
    initial: &DiscreteState,
    certificates: &[StepCertificate],
    mesh: &TriMesh,
    params: &PhysParams,
) -> io::Result<W> {
    let mut w = TimeseriesWriter::new(out)?;
    w.initial(initial, mesh, params)?;
    for c in certificates {
        w.push(c)?;
    }
    Ok(w.into_inner())
}
