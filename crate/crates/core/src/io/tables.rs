use std::io::Write;

use crate::analysis::{ConstantsReport, DecayReport, GrowthReport, ProbeReport};
use crate::carrier::{CarrierReport, Certification};
use crate::discretization::{MmsStudy, NormTable};
use crate::error::{Error, Result};
use crate::solver::IterationRecord;

/// A CSV report: fixed header, one row per record.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest representation that round-trips.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record(r).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

/// `name, value, tolerance, pass`
pub fn carrier_table(report: &CarrierReport, flux: f64) -> Table {
    let mut t = Table::new(&["name", "value", "tolerance", "pass"]);
    for c in report.checks(flux) {
        t.push(vec![c.name, num(c.value), num(c.tolerance), c.pass.to_string()]);
    }
    t
}

/// `epsilon, dist, max_ratio, threshold, certified, chosen`
pub fn certification_table(cert: &Certification) -> Table {
    let mut t = Table::new(&["epsilon", "dist", "max_ratio", "threshold", "certified", "chosen"]);
    for p in &cert.points {
        let chosen = cert.chosen == Some((p.epsilon, p.dist));
        t.push(vec![
            num(p.epsilon),
            num(p.dist),
            num(p.max_ratio),
            num(cert.threshold),
            p.certified.to_string(),
            chosen.to_string(),
        ]);
    }
    t
}

/// `iteration, increment, residual, damping, flux_leak`
pub fn history_table(history: &[IterationRecord]) -> Table {
    let mut t = Table::new(&["iteration", "increment", "residual", "damping", "flux_leak"]);
    for r in history {
        t.push(vec![r.iteration.to_string(), num(r.increment), num(r.residual), num(r.damping), num(r.flux_leak)]);
    }
    t
}

/// `quantity, station, value`: the norms followed by one row per flux station.
pub fn norms_table(n: &NormTable) -> Table {
    let mut t = Table::new(&["quantity", "station", "value"]);
    for (name, v) in [
        ("area", n.area),
        ("l2", n.l2),
        ("l4", n.l4),
        ("h1_semi", n.h1_semi),
        ("h1", n.h1()),
        ("strain", n.strain),
        ("divergence", n.divergence),
    ] {
        t.push(vec![name.into(), String::new(), num(v)]);
    }
    for &(x, q) in &n.fluxes {
        t.push(vec!["flux".into(), num(x), num(q)]);
    }
    t
}

/// `name, value, provenance`
pub fn constants_table(c: &ConstantsReport) -> Table {
    let mut t = Table::new(&["name", "value", "provenance"]);
    let rows = [
        ("M1", Some(c.m1), "Poincaré: Lanczos on the zero-flux slip space"),
        ("M4", Some(c.m4), "L4 embedding: lower bound from random stream fields with local ascent"),
        ("M5", Some(c.m5), "Bogovskii: max ratio over the unit-slab battery"),
        ("korn_c", Some(c.korn_c), "Korn: Lanczos quotient certified by Cholesky bracketing"),
        ("coercivity_margin", c.coercivity_margin, "korn_c/2 minus the certified smallness ratio"),
        ("apriori_constant", Some(c.apriori_constant()), "2(1 + M1^2)/korn_c"),
    ];
    for (name, v, p) in rows {
        t.push(vec![name.into(), opt(v), p.into()]);
    }
    for e in &c.empirical {
        t.push(vec![e.name.clone(), opt(e.value), e.provenance.clone()]);
    }
    t
}

/// `t, y_plus, y_minus`, then fit rows `quantity, value` appended as
/// `t = <quantity>` rows with the value in `y_plus`.
pub fn decay_table(d: &DecayReport) -> Table {
    let mut t = Table::new(&["t", "y_plus", "y_minus"]);
    for ((x, yp), ym) in d.t_grid.iter().zip(&d.y_plus).zip(&d.y_minus) {
        t.push(vec![num(*x), num(*yp), num(*ym)]);
    }
    let fit = d.fit;
    for (name, v) in [
        ("fitted_rate", fit.map(|f| f.rate)),
        ("r_squared", fit.map(|f| f.r_squared)),
        ("fit_window_start", fit.map(|f| f.window.0)),
        ("fit_window_end", fit.map(|f| f.window.1)),
        ("fitted_rate_minus", d.fit_minus.map(|f| f.rate)),
        ("C4_empirical", d.c4_empirical),
        ("C5_empirical", d.c5_empirical),
        ("derivative_defect", Some(d.derivative_defect)),
    ] {
        t.push(vec![name.into(), opt(v), String::new()]);
    }
    t.push(vec!["verdict".into(), format!("{:?}", d.verdict), String::new()]);
    t
}

/// `t, slab_h1, slab_l4, slab_sum, cumulative_grad, normalized`
pub fn growth_table(g: &GrowthReport) -> Table {
    let mut t = Table::new(&["t", "slab_h1", "slab_l4", "slab_sum", "cumulative_grad", "normalized"]);
    for r in &g.rows {
        t.push(vec![
            num(r.t),
            num(r.slab_h1),
            num(r.slab_l4),
            num(r.slab_h1 + r.slab_l4),
            num(r.cumulative_grad),
            num(r.cumulative_grad / (1.0 + r.t.sqrt())),
        ]);
    }
    t
}

/// `section, key, value, detail`
pub fn probe_table(p: &ProbeReport) -> Table {
    let mut t = Table::new(&["section", "key", "value", "detail"]);
    for (i, r) in p.runs.iter().enumerate() {
        t.push(vec![
            "run".into(),
            i.to_string(),
            r.converged.to_string(),
            format!(
                "{} iterations={} contraction={} v_h1={}{}",
                r.label,
                r.iterations,
                num(r.contraction_estimate),
                num(r.v_h1),
                r.error.as_ref().map_or_else(String::new, |e| format!(" error={e}"))
            ),
        ]);
    }
    for (i, row) in p.distances.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            if j > i {
                t.push(vec!["distance".into(), format!("{i}-{j}"), num(*d), String::new()]);
            }
        }
    }
    for &(x, y) in &p.growth {
        t.push(vec!["growth".into(), num(x), num(y), num(y / x.powi(3))]);
    }
    t.push(vec!["summary".into(), "contraction_estimate".into(), num(p.contraction_estimate), String::new()]);
    t.push(vec!["summary".into(), "threshold".into(), num(p.threshold), String::new()]);
    t.push(vec!["summary".into(), "tail_max".into(), num(p.tail_max), String::new()]);
    if let Some(sv) = &p.saint_venant {
        t.push(vec!["summary".into(), "saint_venant".into(), sv.verdict.name().into(), String::new()]);
    }
    t.push(vec!["summary".into(), "verdict".into(), p.verdict.name().into(), String::new()]);
    t
}

/// `h, velocity_dofs, velocity_h1_error, pressure_l2_error, velocity_order, pressure_order`
pub fn mms_table(s: &MmsStudy) -> Table {
    let mut t = Table::new(&[
        "h",
        "velocity_dofs",
        "velocity_h1_error",
        "pressure_l2_error",
        "velocity_order",
        "pressure_order",
    ]);
    for (k, l) in s.levels.iter().enumerate() {
        let order = |o: &[f64]| if k == 0 { String::new() } else { num(o[k - 1]) };
        t.push(vec![
            num(l.h),
            l.velocity_dofs.to_string(),
            num(l.velocity_h1),
            num(l.pressure_l2),
            order(&s.velocity_orders),
            order(&s.pressure_orders),
        ]);
    }
    t
}
