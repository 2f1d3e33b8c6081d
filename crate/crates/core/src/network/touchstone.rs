//! Touchstone v1 (`.sNp`) S-parameter files.
//!
//! Values are kept in the file's own representation (real/imaginary,
//! magnitude/angle or dB/angle, plus the file's frequency unit), so writing
//! and re-reading a data set is exact. Complex matrices are produced on
//! demand.

use std::fmt::Write as _;

use crate::farfield::fmt_f64;
use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Real, imaginary.
    Ri,
    /// Magnitude, angle in degrees.
    Ma,
    /// 20 log10 magnitude, angle in degrees.
    Db,
}

impl DataFormat {
    fn name(self) -> &'static str {
        match self {
            DataFormat::Ri => "RI",
            DataFormat::Ma => "MA",
            DataFormat::Db => "DB",
        }
    }

    /// Native pair to complex.
    pub fn to_complex(self, p: (f64, f64)) -> C64 {
        match self {
            DataFormat::Ri => C64::new(p.0, p.1),
            DataFormat::Ma => C64::from_polar(p.0, p.1.to_radians()),
            DataFormat::Db => C64::from_polar(10f64.powf(p.0 / 20.0), p.1.to_radians()),
        }
    }

    /// Complex to native pair.
    pub fn from_complex(self, z: C64) -> (f64, f64) {
        match self {
            DataFormat::Ri => (z.re, z.im),
            DataFormat::Ma => (z.norm(), z.arg().to_degrees()),
            DataFormat::Db => (20.0 * z.norm().log10(), z.arg().to_degrees()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    pub fn scale(self) -> f64 {
        match self {
            FrequencyUnit::Hz => 1.0,
            FrequencyUnit::KHz => 1e3,
            FrequencyUnit::MHz => 1e6,
            FrequencyUnit::GHz => 1e9,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FrequencyUnit::Hz => "Hz",
            FrequencyUnit::KHz => "kHz",
            FrequencyUnit::MHz => "MHz",
            FrequencyUnit::GHz => "GHz",
        }
    }
}

/// One frequency point: frequency in file units and `n^2` native pairs in
/// row-major `(i, j)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct TouchstonePoint {
    pub frequency: f64,
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub n_ports: usize,
    pub unit: FrequencyUnit,
    pub format: DataFormat,
    pub r0: f64,
    pub points: Vec<TouchstonePoint>,
}

impl Touchstone {
    /// Converts complex matrices (frequencies in Hz) into the given format.
    pub fn from_matrices(
        unit: FrequencyUnit,
        format: DataFormat,
        r0: f64,
        data: &[(f64, CMatrix)],
    ) -> Result<Self> {
        let n = data.first().map_or(0, |d| d.1.nrows());
        let mut points = Vec::with_capacity(data.len());
        for (f, s) in data {
            if s.nrows() != n || s.ncols() != n {
                return Err(Error::invalid("all matrices must be square with equal size"));
            }
            let mut pairs = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    pairs.push(format.from_complex(s[(i, j)]));
                }
            }
            points.push(TouchstonePoint {
                frequency: f / unit.scale(),
                pairs,
            });
        }
        Ok(Touchstone {
            n_ports: n,
            unit,
            format,
            r0,
            points,
        })
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.frequency * self.unit.scale()).collect()
    }

    pub fn matrix(&self, index: usize) -> CMatrix {
        let n = self.n_ports;
        let p = &self.points[index];
        CMatrix::from_fn(n, n, |i, j| self.format.to_complex(p.pairs[i * n + j]))
    }

    /// Matrix at the point whose frequency is within `rel_tol` of `hz`.
    pub fn matrix_at(&self, hz: f64, rel_tol: f64) -> Result<CMatrix> {
        self.frequencies_hz()
            .iter()
            .position(|&f| (f - hz).abs() <= rel_tol * hz.abs())
            .map(|i| self.matrix(i))
            .ok_or_else(|| Error::invalid(format!("no data point at {hz} Hz")))
    }

    /// Column order of the native pairs on disk: `S11 S21 S12 S22` for two
    /// ports, row-major otherwise.
    fn file_order(&self) -> Vec<usize> {
        let n = self.n_ports;
        if n == 2 {
            vec![0, 2, 1, 3]
        } else {
            (0..n * n).collect()
        }
    }

    pub fn write(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "! {}-port S-parameters", self.n_ports);
        let _ = writeln!(
            out,
            "# {} S {} R {}",
            self.unit.name(),
            self.format.name(),
            fmt_f64(self.r0)
        );
        let n = self.n_ports;
        let order = self.file_order();
        for p in &self.points {
            out.push_str(&fmt_f64(p.frequency));
            if n <= 2 {
                for &k in &order {
                    let (a, b) = p.pairs[k];
                    let _ = write!(out, " {} {}", fmt_f64(a), fmt_f64(b));
                }
                out.push('\n');
            } else {
                for i in 0..n {
                    for (c, j) in (0..n).enumerate() {
                        if c > 0 && c % 4 == 0 {
                            out.push('\n');
                        }
                        let (a, b) = p.pairs[i * n + j];
                        let _ = write!(out, " {} {}", fmt_f64(a), fmt_f64(b));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Port count from a `.sNp` file name.
pub fn ports_from_extension(path: &str) -> Option<usize> {
    let ext = path.rsplit('.').next()?.to_ascii_lowercase();
    let digits = ext.strip_prefix('s')?.strip_suffix('p')?;
    digits.parse().ok().filter(|&n| n > 0)
}

fn parse_option_line(line: &str, lineno: usize) -> Result<(FrequencyUnit, DataFormat, f64)> {
    let mut unit = FrequencyUnit::GHz;
    let mut format = DataFormat::Ma;
    let mut r0 = 50.0;
    let mut tokens = line[1..].split_whitespace();
    while let Some(t) = tokens.next() {
        match t.to_ascii_uppercase().as_str() {
            "HZ" => unit = FrequencyUnit::Hz,
            "KHZ" => unit = FrequencyUnit::KHz,
            "MHZ" => unit = FrequencyUnit::MHz,
            "GHZ" => unit = FrequencyUnit::GHz,
            "S" => {}
            p @ ("Y" | "Z" | "H" | "G") => {
                return Err(Error::parse(
                    lineno,
                    format!("unsupported parameter type {p}: only S-parameters are accepted"),
                ))
            }
            "RI" => format = DataFormat::Ri,
            "MA" => format = DataFormat::Ma,
            "DB" => format = DataFormat::Db,
            "R" => {
                let v = tokens
                    .next()
                    .ok_or_else(|| Error::parse(lineno, "option line: R needs a value"))?;
                r0 = v
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("option line: bad resistance '{v}'")))?;
                if !(r0 > 0.0) {
                    return Err(Error::parse(lineno, "option line: resistance must be positive"));
                }
            }
            other => {
                return Err(Error::parse(lineno, format!("malformed option line: unknown token '{other}'")))
            }
        }
    }
    Ok((unit, format, r0))
}

/// Parses a Touchstone v1 S-parameter file with `n_ports` ports.
pub fn parse(text: &str, n_ports: usize) -> Result<Touchstone> {
    if n_ports == 0 {
        return Err(Error::invalid("port count must be positive"));
    }
    let mut options = None;
    let mut numbers: Vec<(f64, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            return Err(Error::parse(
                lineno,
                "Touchstone v2 keywords are not supported; use a v1 file",
            ));
        }
        if line.starts_with('#') {
            if options.is_none() {
                options = Some(parse_option_line(line, lineno)?);
            }
            continue;
        }
        if options.is_none() {
            return Err(Error::parse(lineno, "data before the option line"));
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(lineno, format!("not a number: '{tok}'")))?;
            numbers.push((v, lineno));
        }
    }
    let (unit, format, r0) = options.ok_or_else(|| Error::parse(0, "missing option line"))?;
    let per_point = 1 + 2 * n_ports * n_ports;
    if !numbers.len().is_multiple_of(per_point) {
        let line = numbers.last().map_or(0, |n| n.1);
        return Err(Error::parse(
            line,
            format!(
                "inconsistent column count: {} values is not a multiple of {per_point} for {n_ports} ports",
                numbers.len()
            ),
        ));
    }
    let mut ts = Touchstone {
        n_ports,
        unit,
        format,
        r0,
        points: Vec::with_capacity(numbers.len() / per_point),
    };
    let order = ts.file_order();
    for chunk in numbers.chunks(per_point) {
        let mut pairs = vec![(0.0, 0.0); n_ports * n_ports];
        for (k, &dst) in order.iter().enumerate() {
            pairs[dst] = (chunk[1 + 2 * k].0, chunk[2 + 2 * k].0);
        }
        if let Some(prev) = ts.points.last() {
            if chunk[0].0 <= prev.frequency {
                return Err(Error::parse(chunk[0].1, "frequencies must increase"));
            }
        }
        ts.points.push(TouchstonePoint {
            frequency: chunk[0].0,
            pairs,
        });
    }
    Ok(ts)
}
