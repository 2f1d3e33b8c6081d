//! Text formats for plane-wave response sets and kernel bundles.
//!
//! Both formats are line oriented: `key,value...` header lines, then
//! `[section]` markers each followed by a column-name row and comma-separated
//! records. Lines starting with `#` are comments. Floats are written with 17
//! significant digits so that reading a written file reproduces every value
//! bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::extraction::{PlaneWaveResponseSet, Polarization};
use super::{RadiatingStructure, ScatterKernel};
use crate::farfield::{fmt_f64, Direction, DirectionGrid};
use crate::{CMatrix, Error, Result, C64};

const PORT_COLUMNS: &str = "theta_deg,phi_deg,pol,port,re_b,im_b";
const SCATTER_COLUMNS: &str =
    "theta_in_deg,phi_in_deg,pol,theta_out_deg,phi_out_deg,re_s_theta,im_s_theta,re_s_phi,im_s_phi";
const KERNEL_COLUMNS: &str = "theta_deg,phi_deg,port,re_theta,im_theta,re_phi,im_phi";
const MATRIX_COLUMNS: &str = "row,col,re,im";
const DENSE_COLUMNS: &str =
    "theta_out_deg,phi_out_deg,theta_in_deg,phi_in_deg,re_tt,im_tt,re_tp,im_tp,re_pt,im_pt,re_pp,im_pp";

struct Record<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

#[derive(Default)]
struct Document<'a> {
    header: BTreeMap<String, Record<'a>>,
    sections: BTreeMap<String, Vec<Record<'a>>>,
}

fn split(text: &str) -> Result<Document<'_>> {
    let mut doc = Document::default();
    let mut current: Option<String> = None;
    let mut expect_columns = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if doc.sections.contains_key(&name) {
                return Err(Error::parse(line, format!("duplicate section [{name}]")));
            }
            doc.sections.insert(name.clone(), Vec::new());
            current = Some(name);
            expect_columns = true;
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        match &current {
            None => {
                let key = fields[0].to_string();
                doc.header.insert(key, Record { line, fields });
            }
            Some(name) => {
                if expect_columns {
                    expect_columns = false;
                    if fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
                        continue;
                    }
                }
                doc.sections
                    .get_mut(name)
                    .expect("section registered")
                    .push(Record { line, fields });
            }
        }
    }
    Ok(doc)
}

fn num(r: &Record, i: usize) -> Result<f64> {
    let s = r
        .fields
        .get(i)
        .ok_or_else(|| Error::parse(r.line, format!("expected at least {} fields", i + 1)))?;
    s.parse::<f64>()
        .map_err(|_| Error::parse(r.line, format!("not a number: '{s}'")))
}

fn int(r: &Record, i: usize) -> Result<usize> {
    let s = r
        .fields
        .get(i)
        .ok_or_else(|| Error::parse(r.line, format!("expected at least {} fields", i + 1)))?;
    s.parse::<usize>()
        .map_err(|_| Error::parse(r.line, format!("not a non-negative integer: '{s}'")))
}

fn expect_len(r: &Record, n: usize) -> Result<()> {
    if r.fields.len() != n {
        return Err(Error::parse(
            r.line,
            format!("expected {n} fields, found {}", r.fields.len()),
        ));
    }
    Ok(())
}

fn header_line<'a>(doc: &'a Document, key: &str) -> Result<&'a Record<'a>> {
    doc.header
        .get(key)
        .ok_or_else(|| Error::parse(0, format!("missing header line '{key}'")))
}

struct Common {
    frequency: f64,
    grid: Arc<DirectionGrid>,
    ports: usize,
}

fn parse_common(doc: &Document) -> Result<Common> {
    let f = header_line(doc, "frequency_hz")?;
    expect_len(f, 2)?;
    let frequency = num(f, 1)?;
    if !(frequency > 0.0) {
        return Err(Error::parse(f.line, "frequency must be positive"));
    }
    let g = header_line(doc, "grid")?;
    expect_len(g, 3)?;
    let grid = DirectionGrid::latlon(int(g, 1)?, int(g, 2)?)
        .map_err(|e| Error::parse(g.line, e.to_string()))?
        .shared();
    let p = header_line(doc, "ports")?;
    expect_len(p, 2)?;
    let ports = int(p, 1)?;
    if ports == 0 {
        return Err(Error::parse(p.line, "port count must be positive"));
    }
    Ok(Common {
        frequency,
        grid,
        ports,
    })
}

fn write_common(out: &mut String, magic: &str, frequency: f64, grid: &DirectionGrid, ports: usize) {
    let _ = writeln!(out, "# {magic}");
    let _ = writeln!(out, "frequency_hz,{}", fmt_f64(frequency));
    let _ = writeln!(out, "grid,{},{}", grid.n_theta(), grid.n_phi());
    let _ = writeln!(out, "ports,{ports}");
}

fn dir_index(grid: &DirectionGrid, r: &Record, i: usize) -> Result<usize> {
    let d = Direction::from_degrees(num(r, i)?, num(r, i + 1)?);
    grid.find(d).ok_or_else(|| {
        Error::parse(
            r.line,
            format!("direction ({}, {}) deg is not a grid sample", r.fields[i], r.fields[i + 1]),
        )
    })
}

fn port_field(r: &Record, i: usize, ports: usize) -> Result<usize> {
    let p = int(r, i)?;
    if p == 0 || p > ports {
        return Err(Error::parse(r.line, format!("port {p} outside 1..={ports}")));
    }
    Ok(p - 1)
}

fn pol_field(r: &Record, i: usize) -> Result<Polarization> {
    Polarization::parse(r.fields[i])
        .ok_or_else(|| Error::parse(r.line, format!("unknown polarization '{}'", r.fields[i])))
}

fn c(r: &Record, i: usize) -> Result<C64> {
    Ok(C64::new(num(r, i)?, num(r, i + 1)?))
}

fn dir_cols(d: Direction) -> String {
    format!("{},{}", fmt_f64(d.theta_deg()), fmt_f64(d.phi_deg()))
}

fn cplx(z: C64) -> String {
    format!("{},{}", fmt_f64(z.re), fmt_f64(z.im))
}

/// Serializes a response set. Missing entries are simply omitted.
pub fn write_responses(resp: &PlaneWaveResponseSet) -> String {
    let mut out = String::new();
    write_common(&mut out, "plane-wave responses", resp.frequency, &resp.grid, resp.m_ports);
    out.push_str("[port_waves]\n");
    out.push_str(PORT_COLUMNS);
    out.push('\n');
    for dir in 0..resp.grid.len() {
        let d = resp.grid.direction(dir);
        for pol in Polarization::BOTH {
            for m in 0..resp.m_ports {
                if let Some(b) = resp.port_waves[resp.port_index(dir, pol, m)] {
                    let _ = writeln!(out, "{},{},{},{}", dir_cols(d), pol.name(), m + 1, cplx(b));
                }
            }
        }
    }
    if let Some(sc) = &resp.scattered {
        out.push_str("[scattered]\n");
        out.push_str(SCATTER_COLUMNS);
        out.push('\n');
        for dir in 0..resp.grid.len() {
            let d = resp.grid.direction(dir);
            for pol in Polarization::BOTH {
                for o in 0..resp.grid.len() {
                    if let Some(s) = sc[resp.scatter_index(dir, pol, o)] {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            dir_cols(d),
                            pol.name(),
                            dir_cols(resp.grid.direction(o)),
                            cplx(s[0]),
                            cplx(s[1])
                        );
                    }
                }
            }
        }
    }
    out
}

pub fn parse_responses(text: &str) -> Result<PlaneWaveResponseSet> {
    let doc = split(text)?;
    let common = parse_common(&doc)?;
    let mut resp = PlaneWaveResponseSet::empty(common.frequency, common.grid.clone(), common.ports);
    for (name, records) in &doc.sections {
        match name.as_str() {
            "port_waves" => {
                for r in records {
                    expect_len(r, 6)?;
                    let dir = dir_index(&common.grid, r, 0)?;
                    let pol = pol_field(r, 2)?;
                    let port = port_field(r, 3, common.ports)?;
                    resp.set_port_wave(dir, pol, port, c(r, 4)?);
                }
            }
            "scattered" => {
                for r in records {
                    expect_len(r, 9)?;
                    let dir = dir_index(&common.grid, r, 0)?;
                    let pol = pol_field(r, 2)?;
                    let out = dir_index(&common.grid, r, 3)?;
                    resp.set_scattered(dir, pol, out, [c(r, 5)?, c(r, 7)?]);
                }
            }
            other => return Err(Error::parse(0, format!("unknown section [{other}]"))),
        }
    }
    if !resp.has_records() {
        return Err(Error::Incomplete("no records".into()));
    }
    Ok(resp)
}

fn write_kernel(out: &mut String, name: &str, grid: &DirectionGrid, k: &CMatrix) {
    let _ = writeln!(out, "[{name}]");
    out.push_str(KERNEL_COLUMNS);
    out.push('\n');
    for (i, &d) in grid.directions().iter().enumerate() {
        for p in 0..k.ncols() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                dir_cols(d),
                p + 1,
                cplx(k[(2 * i, p)]),
                cplx(k[(2 * i + 1, p)])
            );
        }
    }
}

fn read_kernel(records: &[Record], grid: &DirectionGrid, cols: usize) -> Result<CMatrix> {
    let mut k = CMatrix::zeros(2 * grid.len(), cols);
    let mut seen = vec![false; grid.len() * cols];
    for r in records {
        expect_len(r, 7)?;
        let dir = dir_index(grid, r, 0)?;
        let p = port_field(r, 2, cols)?;
        k[(2 * dir, p)] = c(r, 3)?;
        k[(2 * dir + 1, p)] = c(r, 5)?;
        seen[dir * cols + p] = true;
    }
    if let Some(miss) = seen.iter().position(|s| !s) {
        let d = grid.direction(miss / cols);
        return Err(Error::Incomplete(format!(
            "kernel entry for column {} at ({}, {}) deg is missing",
            miss % cols + 1,
            d.theta_deg(),
            d.phi_deg()
        )));
    }
    Ok(k)
}

fn write_matrix(out: &mut String, name: &str, m: &CMatrix) {
    let _ = writeln!(out, "[{name}]");
    let _ = writeln!(out, "# {} x {}", m.nrows(), m.ncols());
    out.push_str(MATRIX_COLUMNS);
    out.push('\n');
    for r in 0..m.nrows() {
        for col in 0..m.ncols() {
            let _ = writeln!(out, "{},{},{}", r + 1, col + 1, cplx(m[(r, col)]));
        }
    }
}

fn read_matrix(records: &[Record], rows: usize, cols: usize) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(rows, cols);
    for r in records {
        expect_len(r, 4)?;
        let (i, j) = (int(r, 0)?, int(r, 1)?);
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(Error::parse(r.line, format!("entry ({i}, {j}) outside {rows} x {cols}")));
        }
        m[(i - 1, j - 1)] = c(r, 2)?;
    }
    Ok(m)
}

/// Serializes a structure's kernels.
pub fn write_bundle(s: &RadiatingStructure) -> String {
    let grid = s.grid();
    let mut out = String::new();
    write_common(&mut out, "radiating-structure kernels", s.frequency(), grid, s.m_ports());
    if let ScatterKernel::LowRank { core, .. } = s.scatter_kernel() {
        let _ = writeln!(out, "scatter_rank,{},{}", core.nrows(), core.ncols());
    }
    write_matrix(&mut out, "coupling", s.coupling());
    write_kernel(&mut out, "tx", grid, s.tx_kernel());
    write_kernel(&mut out, "rx", grid, s.rx_kernel());
    match s.scatter_kernel() {
        ScatterKernel::Zero => {}
        ScatterKernel::Dense(x) => {
            out.push_str("[scatter_dense]\n");
            out.push_str(DENSE_COLUMNS);
            out.push('\n');
            for o in 0..grid.len() {
                for i in 0..grid.len() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        dir_cols(grid.direction(o)),
                        dir_cols(grid.direction(i)),
                        cplx(x[(2 * o, 2 * i)]),
                        cplx(x[(2 * o, 2 * i + 1)]),
                        cplx(x[(2 * o + 1, 2 * i)]),
                        cplx(x[(2 * o + 1, 2 * i + 1)])
                    );
                }
            }
        }
        ScatterKernel::LowRank { left, core, right } => {
            write_kernel(&mut out, "scatter_left", grid, left);
            write_matrix(&mut out, "scatter_core", core);
            write_kernel(&mut out, "scatter_right", grid, right);
        }
    }
    out
}

/// Reads a kernel bundle.
///
/// Only `[rx]` is required. A missing `[tx]` section is filled in from the
/// receive kernel (reciprocal structure), a missing `[coupling]` section
/// means zero coupling and missing scattering sections mean a transparent
/// object.
pub fn parse_bundle(text: &str) -> Result<RadiatingStructure> {
    let doc = split(text)?;
    let common = parse_common(&doc)?;
    for name in doc.sections.keys() {
        if !matches!(
            name.as_str(),
            "coupling" | "tx" | "rx" | "scatter_dense" | "scatter_left" | "scatter_core"
                | "scatter_right"
        ) {
            return Err(Error::parse(0, format!("unknown section [{name}]")));
        }
    }
    let grid = common.grid.clone();
    let m = common.ports;
    let rx = match doc.sections.get("rx") {
        Some(r) => read_kernel(r, &grid, m)?,
        None => return Err(Error::Incomplete("kernel bundle has no [rx] section".into())),
    };
    let tx = match doc.sections.get("tx") {
        Some(r) => read_kernel(r, &grid, m)?,
        None => rx.clone(),
    };
    let coupling = match doc.sections.get("coupling") {
        Some(r) => read_matrix(r, m, m)?,
        None => CMatrix::zeros(m, m),
    };
    let scatter = if let Some(records) = doc.sections.get("scatter_dense") {
        let k = grid.len();
        let mut x = CMatrix::zeros(2 * k, 2 * k);
        for r in records {
            expect_len(r, 12)?;
            let o = dir_index(&grid, r, 0)?;
            let i = dir_index(&grid, r, 2)?;
            x[(2 * o, 2 * i)] = c(r, 4)?;
            x[(2 * o, 2 * i + 1)] = c(r, 6)?;
            x[(2 * o + 1, 2 * i)] = c(r, 8)?;
            x[(2 * o + 1, 2 * i + 1)] = c(r, 10)?;
        }
        ScatterKernel::Dense(x)
    } else if let Some(core_rec) = doc.sections.get("scatter_core") {
        let rank = header_line(&doc, "scatter_rank")?;
        expect_len(rank, 3)?;
        let (rl, rr) = (int(rank, 1)?, int(rank, 2)?);
        let missing = |s: &str| Error::Incomplete(format!("low-rank scatter kernel lacks [{s}]"));
        let left = read_kernel(
            doc.sections.get("scatter_left").ok_or_else(|| missing("scatter_left"))?,
            &grid,
            rl,
        )?;
        let right = read_kernel(
            doc.sections.get("scatter_right").ok_or_else(|| missing("scatter_right"))?,
            &grid,
            rr,
        )?;
        ScatterKernel::LowRank {
            left,
            core: read_matrix(core_rec, rl, rr)?,
            right,
        }
    } else {
        ScatterKernel::Zero
    };
    RadiatingStructure::new(grid, common.frequency, coupling, tx, rx, scatter)
}
