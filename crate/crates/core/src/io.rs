//! CSV and JSON artifacts. Numeric CSV files may start with a
//! `# config-hash: <hex>` comment line.

use crate::domain::{Field2, Grid, TransverseBasis};
use crate::error::{Error, Result};
use crate::freeflow::ModeEvolution;
use crate::synthesis::{ControlSignal, FlatOutput, ReachCoefficients};
use ndarray::Array2;
use serde::Serialize;
use std::io::{Read, Write};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn start<W: Write>(mut w: W, hash: Option<&str>, header: &[&str]) -> Result<csv::Writer<W>> {
    if let Some(h) = hash {
        writeln!(w, "# config-hash: {h}")?;
    }
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    Ok(out)
}

fn row<W: Write>(w: &mut csv::Writer<W>, values: &[f64]) -> Result<()> {
    w.write_record(values.iter().map(|v| v.to_string())).map_err(csv_err)
}

/// Columns `j, t, x, value`, every `stride`-th time node.
pub fn write_snapshots_csv<W: Write>(w: W, evs: &[ModeEvolution], stride: usize, hash: Option<&str>) -> Result<()> {
    let mut out = start(w, hash, &["j", "t", "x", "value"])?;
    for ev in evs {
        for k in (0..ev.times.len()).step_by(stride.max(1)) {
            for (x, v) in ev.op.x.iter().zip(ev.snapshots[k].iter()) {
                row(&mut out, &[ev.j() as f64, ev.times[k], *x, *v])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Columns `t, y, h`.
pub fn write_control_csv<W: Write>(w: W, c: &ControlSignal, hash: Option<&str>) -> Result<()> {
    let mut out = start(w, hash, &["t", "y", "h"])?;
    for (it, t) in c.t.iter().enumerate() {
        for (iy, y) in c.y.iter().enumerate() {
            row(&mut out, &[*t, *y, c.h[(it, iy)]])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads `t, y, h` rows (time-major, the same `y` nodes at every time) and
/// projects each time slice on the sine modes of `basis`.
pub fn read_control_csv<R: Read>(r: R, basis: &TransverseBasis) -> Result<ControlSignal> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "y", "h"] {
        return Err(Error::Parse(format!("expected header t,y,h, found {:?}", headers)));
    }
    let mut t: Vec<f64> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut iy = 0;
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Parse("short row".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(e.to_string()))
        };
        let (tv, yv, hv) = (parse(0)?, parse(1)?, parse(2)?);
        if t.last() != Some(&tv) {
            if !t.is_empty() && iy != y.len() {
                return Err(Error::Parse(format!("time {} has {iy} y samples, expected {}", t.last().unwrap(), y.len())));
            }
            t.push(tv);
            iy = 0;
        }
        if t.len() == 1 {
            y.push(yv);
        } else if y.get(iy) != Some(&yv) {
            return Err(Error::Parse(format!("inconsistent y node at t = {tv}")));
        }
        iy += 1;
        values.push(hv);
    }
    if t.is_empty() || iy != y.len() {
        return Err(Error::Parse("control file is empty or truncated".into()));
    }
    let h = Array2::from_shape_vec((t.len(), y.len()), values).map_err(|e| Error::Parse(e.to_string()))?;
    let mut modes = Array2::zeros((basis.j_max, t.len()));
    for it in 0..t.len() {
        for (jm, c) in basis.analyze(&y, h.row(it))?.into_iter().enumerate() {
            modes[(jm, it)] = c;
        }
    }
    Ok(ControlSignal {
        t,
        y,
        h,
        modes,
        modes_dt: None,
        tau: 0.0,
        kind: None,
    })
}

/// Columns `x, y, value`.
pub fn write_field_csv<W: Write>(w: W, f: &Field2, grid: &Grid, hash: Option<&str>) -> Result<()> {
    f.check_shape(grid)?;
    let mut out = start(w, hash, &["x", "y", "value"])?;
    for (ix, x) in grid.x.iter().enumerate() {
        for (iy, y) in grid.y.iter().enumerate() {
            row(&mut out, &[*x, *y, f.values[(ix, iy)]])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Two-column series such as a norm history.
pub fn write_series_csv<W: Write>(w: W, names: [&str; 2], rows: &[(f64, f64)], hash: Option<&str>) -> Result<()> {
    let mut out = start(w, hash, &names)?;
    for (a, b) in rows {
        row(&mut out, &[*a, *b])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ModeSeries<'a> {
    j: usize,
    values: &'a [f64],
}

#[derive(Serialize)]
struct ControlModesDoc<'a> {
    kind: Option<crate::synthesis::FlatKind>,
    tau: f64,
    t: &'a [f64],
    modes: Vec<ModeSeries<'a>>,
}

/// Mode view `{kind, tau, t, modes: [{j, values}]}` of a control.
pub fn control_modes_json(c: &ControlSignal) -> Result<String> {
    let rows: Vec<Vec<f64>> = c.modes.outer_iter().map(|r| r.to_vec()).collect();
    let doc = ControlModesDoc {
        kind: c.kind,
        tau: c.tau,
        t: &c.t,
        modes: rows.iter().enumerate().map(|(jm, v)| ModeSeries { j: jm + 1, values: v }).collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

#[derive(Serialize)]
struct FlatEntry {
    j: usize,
    i: usize,
    samples: Vec<f64>,
}

#[derive(Serialize)]
struct FlatDoc {
    kind: crate::synthesis::FlatKind,
    t: Vec<f64>,
    entries: Vec<FlatEntry>,
}

/// `z_j^{(i)}` for `i <= i_max` sampled at `t`: `{kind, t, entries: [{j, i, samples}]}`.
pub fn flat_output_json(z: &FlatOutput, t: &[f64], i_max: usize) -> Result<String> {
    let mut entries = Vec::new();
    for j in 1..=z.j_max() {
        let rows = t.iter().map(|&t| z.derivs(j, t, i_max)).collect::<Result<Vec<_>>>()?;
        for i in 0..=i_max {
            entries.push(FlatEntry {
                j,
                i,
                samples: rows.iter().map(|r| r[i]).collect(),
            });
        }
    }
    Ok(serde_json::to_string_pretty(&FlatDoc {
        kind: z.kind,
        t: t.to_vec(),
        entries,
    })?)
}

#[derive(Serialize)]
struct CoefEntry {
    j: usize,
    i: usize,
    value: f64,
}

#[derive(Serialize)]
struct CoefDoc<'a> {
    source: &'a str,
    entries: Vec<CoefEntry>,
}

/// `{source, entries: [{j, i, value}]}`
pub fn reach_coefficients_json(b: &ReachCoefficients) -> Result<String> {
    let entries = b
        .b
        .iter()
        .enumerate()
        .flat_map(|(jm, col)| col.iter().enumerate().map(move |(i, v)| CoefEntry { j: jm + 1, i, value: *v }))
        .collect();
    Ok(serde_json::to_string_pretty(&CoefDoc {
        source: &b.source,
        entries,
    })?)
}
