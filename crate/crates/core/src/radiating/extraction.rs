//! Kernel extraction from plane-wave excitation data.
//!
//! A plane wave with unit RMS field and polarization `q` arriving from `n`
//! corresponds to the incoming pattern `2 pi / (j k sqrt(Z0)) q delta(r - n)`.
//! Port responses to such waves therefore sample the receive kernel, and the
//! scattered far fields sample the reduced scattering kernel.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{RadiatingStructure, ScatterKernel};
use crate::constants::{free_space_impedance, wavenumber};
use crate::farfield::{DirectionGrid, Jones};
use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    Theta,
    Phi,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::Theta, Polarization::Phi];

    pub fn index(self) -> usize {
        match self {
            Polarization::Theta => 0,
            Polarization::Phi => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarization::Theta => "theta",
            Polarization::Phi => "phi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "theta" => Some(Polarization::Theta),
            "phi" => Some(Polarization::Phi),
            _ => None,
        }
    }
}

/// Responses of a structure to plane waves from every grid direction in both
/// polarizations.
///
/// `port_waves[(dir * 2 + pol) * M + m]` is the outgoing wave at port `m`;
/// `scattered[(dir_in * 2 + pol) * K + dir_out]` is the scattered-field
/// amplitude (theta-hat, phi-hat components at `dir_out`), in volts.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveResponseSet {
    pub frequency: f64,
    pub grid: Arc<DirectionGrid>,
    pub m_ports: usize,
    pub port_waves: Vec<Option<C64>>,
    pub scattered: Option<Vec<Option<Jones>>>,
}

impl PlaneWaveResponseSet {
    pub fn empty(frequency: f64, grid: Arc<DirectionGrid>, m_ports: usize) -> Self {
        let k = grid.len();
        PlaneWaveResponseSet {
            frequency,
            grid,
            m_ports,
            port_waves: vec![None; k * 2 * m_ports],
            scattered: None,
        }
    }

    pub fn port_index(&self, dir: usize, pol: Polarization, port: usize) -> usize {
        (dir * 2 + pol.index()) * self.m_ports + port
    }

    pub fn scatter_index(&self, dir_in: usize, pol: Polarization, dir_out: usize) -> usize {
        (dir_in * 2 + pol.index()) * self.grid.len() + dir_out
    }

    pub fn set_port_wave(&mut self, dir: usize, pol: Polarization, port: usize, b: C64) {
        let i = self.port_index(dir, pol, port);
        self.port_waves[i] = Some(b);
    }

    pub fn set_scattered(&mut self, dir_in: usize, pol: Polarization, dir_out: usize, s: Jones) {
        let n = self.grid.len() * 2 * self.grid.len();
        let i = self.scatter_index(dir_in, pol, dir_out);
        self.scattered.get_or_insert_with(|| vec![None; n])[i] = Some(s);
    }

    pub fn has_records(&self) -> bool {
        self.port_waves.iter().any(Option::is_some)
            || self
                .scattered
                .as_ref()
                .is_some_and(|s| s.iter().any(Option::is_some))
    }
}

/// `j k sqrt(Z0) / (2 pi)`: converts unit-field port responses to kernel samples.
pub fn receive_prefactor(frequency: f64) -> C64 {
    C64::new(0.0, wavenumber(frequency) * free_space_impedance().sqrt() / (2.0 * PI))
}

/// `j k / (2 pi)`: converts scattered-field amplitudes to kernel samples.
pub fn scatter_prefactor(frequency: f64) -> C64 {
    C64::new(0.0, wavenumber(frequency) / (2.0 * PI))
}

/// Sampled receive kernel (`2K x M`) from the port responses.
pub fn extract_rx_kernel(resp: &PlaneWaveResponseSet) -> Result<CMatrix> {
    if !resp.has_records() {
        return Err(Error::Incomplete("no records".into()));
    }
    let pre = receive_prefactor(resp.frequency);
    let mut rx = CMatrix::zeros(2 * resp.grid.len(), resp.m_ports);
    for dir in 0..resp.grid.len() {
        for pol in Polarization::BOTH {
            for m in 0..resp.m_ports {
                let b = resp.port_waves[resp.port_index(dir, pol, m)].ok_or_else(|| {
                    let d = resp.grid.direction(dir);
                    Error::Incomplete(format!(
                        "missing port {} response for {} polarization from ({}, {}) deg",
                        m + 1,
                        pol.name(),
                        d.theta_deg(),
                        d.phi_deg()
                    ))
                })?;
                rx[(2 * dir + pol.index(), m)] = pre * b;
            }
        }
    }
    Ok(rx)
}

/// Reduced sampled scattering kernel (dense `2K x 2K`) from scattered fields.
pub fn extract_scatter_kernel(resp: &PlaneWaveResponseSet) -> Result<ScatterKernel> {
    let scattered = resp
        .scattered
        .as_ref()
        .ok_or_else(|| Error::Incomplete("no scattered-field records".into()))?;
    let pre = scatter_prefactor(resp.frequency);
    let k = resp.grid.len();
    let mut x = CMatrix::zeros(2 * k, 2 * k);
    for dir_in in 0..k {
        for pol in Polarization::BOTH {
            for dir_out in 0..k {
                let s = scattered[resp.scatter_index(dir_in, pol, dir_out)].ok_or_else(|| {
                    Error::Incomplete(format!(
                        "missing scattered field for incidence {dir_in}, {} polarization, \
                         direction {dir_out}",
                        pol.name()
                    ))
                })?;
                let col = 2 * dir_in + pol.index();
                x[(2 * dir_out, col)] = pre * s[0];
                x[(2 * dir_out + 1, col)] = pre * s[1];
            }
        }
    }
    Ok(ScatterKernel::Dense(x))
}

/// Reciprocal structure from a response set: the transmit kernel equals the
/// extracted receive kernel, scattering is included when the set has
/// scattered-field records, and `coupling` defaults to zero.
pub fn structure_from_responses(
    resp: &PlaneWaveResponseSet,
    coupling: Option<CMatrix>,
) -> Result<RadiatingStructure> {
    let rx = extract_rx_kernel(resp)?;
    let scatter = match resp.scattered {
        Some(_) => extract_scatter_kernel(resp)?,
        None => ScatterKernel::Zero,
    };
    let coupling = coupling.unwrap_or_else(|| CMatrix::zeros(resp.m_ports, resp.m_ports));
    RadiatingStructure::new(resp.grid.clone(), resp.frequency, coupling, rx.clone(), rx, scatter)
}

/// Forward model: the plane-wave responses a given structure would produce.
pub fn simulate_responses(
    s: &RadiatingStructure,
    with_scattering: bool,
) -> PlaneWaveResponseSet {
    let grid = s.grid().clone();
    let mut resp = PlaneWaveResponseSet::empty(s.frequency(), grid.clone(), s.m_ports());
    let to_port = receive_prefactor(s.frequency()).inv();
    let to_field = scatter_prefactor(s.frequency()).inv();
    for dir in 0..grid.len() {
        for pol in Polarization::BOTH {
            let row = 2 * dir + pol.index();
            for m in 0..s.m_ports() {
                resp.set_port_wave(dir, pol, m, s.rx_kernel()[(row, m)] * to_port);
            }
            if with_scattering {
                for out in 0..grid.len() {
                    let b = s.scatter_kernel().block(out, dir);
                    let c = pol.index();
                    resp.set_scattered(dir, pol, out, [b[0][c] * to_field, b[1][c] * to_field]);
                }
            }
        }
    }
    resp
}
