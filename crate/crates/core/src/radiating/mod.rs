//! The radiating-structure operator.
//!
//! A structure maps incoming port waves and an incoming far-field pattern to
//! outgoing port waves and an outgoing pattern:
//!
//! ```text
//! b_out = S_RR a + R(b_F)
//! a_F   = T a + mirror(b_F) + X(b_F)
//! ```
//!
//! Transmit and receive kernels are stored as `2K x M` matrices (rows `2i` and
//! `2i + 1` hold the theta-hat and phi-hat components at grid direction `i`).
//! The scattering kernel is stored in reduced form, without the mirror term.

mod extraction;
pub mod io;
mod library;

use std::sync::Arc;

use nalgebra::Rotation3;

use crate::farfield::{rotate_sample, Direction, DirectionGrid, FarFieldPattern, Jones};
use crate::linalg;
use crate::{CMatrix, CVector, Error, Result, C64};

pub use extraction::{
    extract_rx_kernel, extract_scatter_kernel, simulate_responses, structure_from_responses,
    Polarization, PlaneWaveResponseSet,
};
pub use library::{
    dipole_array, dipole_sample, hertzian_dipole, isotropic_radiator, lossless_from_patterns,
    ArrayModel, DipoleElement,
};

/// Direction count above which dense scattering kernels get a warning.
pub const DENSE_SCATTER_WARN: usize = 64 * 64;

/// Reduced sampled scattering kernel.
#[derive(Debug, Clone)]
pub enum ScatterKernel {
    /// Transparent object: only the mirror term remains.
    Zero,
    /// `2K x 2K`; block `(i, j)` is the 2x2 kernel at `(d_i; d_j)`.
    Dense(CMatrix),
    /// `left * core * right^T` with `left`, `right` of shape `2K x r`.
    LowRank {
        left: CMatrix,
        core: CMatrix,
        right: CMatrix,
    },
}

impl ScatterKernel {
    pub fn is_zero(&self) -> bool {
        matches!(self, ScatterKernel::Zero)
    }

    fn check(&self, rows: usize) -> Result<()> {
        let bad = |found| {
            Err(Error::DimensionMismatch {
                context: "scatter kernel",
                expected: rows,
                found,
            })
        };
        match self {
            ScatterKernel::Zero => Ok(()),
            ScatterKernel::Dense(m) => {
                if m.nrows() != rows {
                    bad(m.nrows())
                } else if m.ncols() != rows {
                    bad(m.ncols())
                } else {
                    Ok(())
                }
            }
            ScatterKernel::LowRank { left, core, right } => {
                if left.nrows() != rows {
                    bad(left.nrows())
                } else if right.nrows() != rows {
                    bad(right.nrows())
                } else if core.nrows() != left.ncols() || core.ncols() != right.ncols() {
                    Err(Error::invalid("low-rank scatter core does not match factors"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// The 2x2 kernel block at grid indices `(i, j)`.
    pub fn block(&self, i: usize, j: usize) -> [[C64; 2]; 2] {
        let zero = C64::new(0.0, 0.0);
        match self {
            ScatterKernel::Zero => [[zero; 2]; 2],
            ScatterKernel::Dense(m) => [
                [m[(2 * i, 2 * j)], m[(2 * i, 2 * j + 1)]],
                [m[(2 * i + 1, 2 * j)], m[(2 * i + 1, 2 * j + 1)]],
            ],
            ScatterKernel::LowRank { left, core, right } => {
                let l = left.rows(2 * i, 2);
                let r = right.rows(2 * j, 2);
                let b = l * core * r.transpose();
                [[b[(0, 0)], b[(0, 1)]], [b[(1, 0)], b[(1, 1)]]]
            }
        }
    }

    /// `X * v` for an interleaved pattern vector `v` (weights already applied).
    fn apply(&self, v: &CVector) -> CVector {
        match self {
            ScatterKernel::Zero => CVector::zeros(v.len()),
            ScatterKernel::Dense(m) => m * v,
            ScatterKernel::LowRank { left, core, right } => left * (core * (right.transpose() * v)),
        }
    }

    /// Dense `2K x 2K` form.
    pub fn to_dense(&self, rows: usize) -> CMatrix {
        match self {
            ScatterKernel::Zero => CMatrix::zeros(rows, rows),
            ScatterKernel::Dense(m) => m.clone(),
            ScatterKernel::LowRank { left, core, right } => left * core * right.transpose(),
        }
    }
}

/// Outcome of [`RadiatingStructure::check_reciprocity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocityReport {
    pub coupling_ok: bool,
    pub kernel_ok: bool,
    pub scatter_ok: bool,
    /// Largest `|S_RR - S_RR^T|` entry.
    pub coupling_deviation: f64,
    /// Largest `C^2` norm of `rx(m; d) - tx(m; d)`.
    pub kernel_deviation: f64,
    /// Largest Frobenius norm of `S(d; d') - S(d'; d)^T`.
    pub scatter_deviation: f64,
}

impl ReciprocityReport {
    pub fn all_ok(&self) -> bool {
        self.coupling_ok && self.kernel_ok && self.scatter_ok
    }
}

/// Sampled radiating-structure operator at one frequency.
#[derive(Debug, Clone)]
pub struct RadiatingStructure {
    grid: Arc<DirectionGrid>,
    frequency: f64,
    coupling: CMatrix,
    tx: CMatrix,
    rx: CMatrix,
    scatter: ScatterKernel,
    extrinsic_noise: bool,
}

impl RadiatingStructure {
    pub fn new(
        grid: Arc<DirectionGrid>,
        frequency: f64,
        coupling: CMatrix,
        tx: CMatrix,
        rx: CMatrix,
        scatter: ScatterKernel,
    ) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::invalid(format!("frequency must be positive, got {frequency}")));
        }
        let m = coupling.nrows();
        if m == 0 {
            return Err(Error::invalid("radiating structure needs at least one port"));
        }
        if coupling.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "coupling matrix",
                expected: m,
                found: coupling.ncols(),
            });
        }
        let rows = 2 * grid.len();
        for (name, k) in [("transmit kernel", &tx), ("receive kernel", &rx)] {
            if k.nrows() != rows {
                return Err(Error::DimensionMismatch {
                    context: name,
                    expected: rows,
                    found: k.nrows(),
                });
            }
            if k.ncols() != m {
                return Err(Error::DimensionMismatch {
                    context: name,
                    expected: m,
                    found: k.ncols(),
                });
            }
        }
        scatter.check(rows)?;
        if matches!(scatter, ScatterKernel::Dense(_)) && grid.len() > DENSE_SCATTER_WARN {
            log::warn!(
                "dense scattering kernel over {} directions needs {} MiB",
                grid.len(),
                rows * rows * 16 / (1 << 20)
            );
        }
        Ok(RadiatingStructure {
            grid,
            frequency,
            coupling,
            tx,
            rx,
            scatter,
            extrinsic_noise: true,
        })
    }

    /// Enables or disables the extrinsic-noise voltage sources at the ports.
    pub fn with_extrinsic_noise(mut self, enabled: bool) -> Self {
        self.extrinsic_noise = enabled;
        self
    }

    pub fn extrinsic_noise_enabled(&self) -> bool {
        self.extrinsic_noise
    }

    pub fn m_ports(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn grid(&self) -> &Arc<DirectionGrid> {
        &self.grid
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        crate::constants::wavenumber(self.frequency)
    }

    pub fn coupling(&self) -> &CMatrix {
        &self.coupling
    }

    pub fn tx_kernel(&self) -> &CMatrix {
        &self.tx
    }

    pub fn rx_kernel(&self) -> &CMatrix {
        &self.rx
    }

    pub fn scatter_kernel(&self) -> &ScatterKernel {
        &self.scatter
    }

    pub fn with_coupling(mut self, coupling: CMatrix) -> Result<Self> {
        if coupling.shape() != self.coupling.shape() {
            return Err(Error::DimensionMismatch {
                context: "coupling matrix",
                expected: self.m_ports(),
                found: coupling.nrows(),
            });
        }
        self.coupling = coupling;
        Ok(self)
    }

    pub fn with_scatter(mut self, scatter: ScatterKernel) -> Result<Self> {
        scatter.check(2 * self.grid.len())?;
        self.scatter = scatter;
        Ok(self)
    }

    pub fn with_rx_kernel(mut self, rx: CMatrix) -> Result<Self> {
        if rx.shape() != self.tx.shape() {
            return Err(Error::DimensionMismatch {
                context: "receive kernel",
                expected: self.tx.nrows(),
                found: rx.nrows(),
            });
        }
        self.rx = rx;
        Ok(self)
    }

    pub fn tx_pattern(&self, port: usize) -> FarFieldPattern {
        FarFieldPattern::from_column(self.grid.clone(), &self.tx, port)
            .expect("kernel rows match the grid")
    }

    pub fn rx_pattern(&self, port: usize) -> FarFieldPattern {
        FarFieldPattern::from_column(self.grid.clone(), &self.rx, port)
            .expect("kernel rows match the grid")
    }

    /// Transmit kernel of every port at `d`, as a `2 x M` matrix.
    pub fn tx_at(&self, d: Direction) -> CMatrix {
        kernel_at(&self.grid, &self.tx, d)
    }

    /// Receive kernel of every port at `d`, as a `2 x M` matrix.
    pub fn rx_at(&self, d: Direction) -> CMatrix {
        kernel_at(&self.grid, &self.rx, d)
    }

    /// Reduced scattering kernel at `(d; d_in)`, interpolated in both arguments.
    pub fn scatter_at(&self, d: Direction, d_in: Direction) -> [[C64; 2]; 2] {
        let zero = C64::new(0.0, 0.0);
        let mut out = [[zero; 2]; 2];
        if self.scatter.is_zero() {
            return out;
        }
        let so = stencil_or_exact(&self.grid, d);
        let si = stencil_or_exact(&self.grid, d_in);
        for &(i, wi) in so.iter().filter(|s| s.1 != 0.0) {
            for &(j, wj) in si.iter().filter(|s| s.1 != 0.0) {
                let b = self.scatter.block(i, j);
                let w = wi * wj;
                for r in 0..2 {
                    for c in 0..2 {
                        out[r][c] += b[r][c] * w;
                    }
                }
            }
        }
        out
    }

    fn check_grid(&self, p: &FarFieldPattern) -> Result<()> {
        if Arc::ptr_eq(p.grid(), &self.grid) || **p.grid() == *self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn check_ports(&self, a: &CVector) -> Result<()> {
        if a.len() != self.m_ports() {
            return Err(Error::DimensionMismatch {
                context: "port wave vector",
                expected: self.m_ports(),
                found: a.len(),
            });
        }
        Ok(())
    }

    /// Outgoing pattern produced by port waves `a`.
    pub fn apply_transmit(&self, a: &CVector) -> Result<FarFieldPattern> {
        self.check_ports(a)?;
        FarFieldPattern::from_vector(self.grid.clone(), &(&self.tx * a))
    }

    /// `M x 2K` matrix of the weighted receive pairing: `rx^T W`.
    pub fn receive_matrix(&self) -> CMatrix {
        let w = self.grid.component_weights();
        let mut r = self.rx.transpose();
        for (j, mut col) in r.column_iter_mut().enumerate() {
            col *= C64::new(w[j], 0.0);
        }
        r
    }

    /// Port waves induced by the incoming pattern `b`.
    pub fn apply_receive(&self, b: &FarFieldPattern) -> Result<CVector> {
        self.check_grid(b)?;
        Ok(self.receive_vector(&b.to_vector()))
    }

    pub(crate) fn receive_vector(&self, b: &CVector) -> CVector {
        let wb = weighted(&self.grid, b);
        self.rx.transpose() * wb
    }

    /// Outgoing pattern scattered from the incoming pattern `b`, including
    /// the free-space mirror term.
    pub fn apply_scatter(&self, b: &FarFieldPattern) -> Result<FarFieldPattern> {
        self.check_grid(b)?;
        let v = self.scatter_vector(&b.to_vector());
        FarFieldPattern::from_vector(self.grid.clone(), &v)
    }

    pub(crate) fn scatter_vector(&self, b: &CVector) -> CVector {
        let mut out = mirror_vector(&self.grid, b);
        if !self.scatter.is_zero() {
            out += self.scatter.apply(&weighted(&self.grid, b));
        }
        out
    }

    /// The complete block operator.
    pub fn apply_full(
        &self,
        a: &CVector,
        b: &FarFieldPattern,
    ) -> Result<(CVector, FarFieldPattern)> {
        self.check_ports(a)?;
        self.check_grid(b)?;
        let bv = b.to_vector();
        let b_out = &self.coupling * a + self.receive_vector(&bv);
        let a_f = &self.tx * a + self.scatter_vector(&bv);
        Ok((b_out, FarFieldPattern::from_vector(self.grid.clone(), &a_f)?))
    }

    /// Compares the structure against the reciprocity symmetries.
    pub fn check_reciprocity(&self, tol: f64) -> ReciprocityReport {
        let coupling_deviation = linalg::max_abs(&(&self.coupling - self.coupling.transpose()));
        let mut kernel_deviation: f64 = 0.0;
        for m in 0..self.m_ports() {
            for i in 0..self.grid.len() {
                let d0 = self.rx[(2 * i, m)] - self.tx[(2 * i, m)];
                let d1 = self.rx[(2 * i + 1, m)] - self.tx[(2 * i + 1, m)];
                kernel_deviation = kernel_deviation.max((d0.norm_sqr() + d1.norm_sqr()).sqrt());
            }
        }
        let scatter_deviation = self.scatter_asymmetry();
        ReciprocityReport {
            coupling_ok: coupling_deviation <= tol,
            kernel_ok: kernel_deviation <= tol,
            scatter_ok: scatter_deviation <= tol,
            coupling_deviation,
            kernel_deviation,
            scatter_deviation,
        }
    }

    fn scatter_asymmetry(&self) -> f64 {
        let k = self.grid.len();
        let mut worst: f64 = 0.0;
        match &self.scatter {
            ScatterKernel::Zero => {}
            ScatterKernel::Dense(m) => {
                for i in 0..k {
                    for j in i..k {
                        let mut f = 0.0;
                        for r in 0..2 {
                            for c in 0..2 {
                                f += (m[(2 * i + r, 2 * j + c)] - m[(2 * j + c, 2 * i + r)])
                                    .norm_sqr();
                            }
                        }
                        worst = worst.max(f.sqrt());
                    }
                }
            }
            ScatterKernel::LowRank { left, core, right } => {
                // X - X^T = L C R^T - R C^T L^T, evaluated one block row at a time.
                let lc = left * core;
                let rct = right * core.transpose();
                for i in 0..k {
                    let a = lc.rows(2 * i, 2) * right.transpose();
                    let b = rct.rows(2 * i, 2) * left.transpose();
                    let diff = a - b;
                    for j in 0..k {
                        let blk = diff.columns(2 * j, 2);
                        worst = worst.max(blk.norm());
                    }
                }
            }
        }
        worst
    }

    /// Operator matrix in power-normalized coordinates: port waves as-is and
    /// patterns scaled by the square root of the quadrature weights. Its
    /// spectral norm is at most one exactly when the structure is passive.
    pub fn normalized_operator(&self) -> CMatrix {
        let m = self.m_ports();
        let n = 2 * self.grid.len();
        let sw: Vec<f64> = self.grid.component_weights().iter().map(|w| w.sqrt()).collect();
        let mut op = CMatrix::zeros(m + n, m + n);
        op.view_mut((0, 0), (m, m)).copy_from(&self.coupling);
        for j in 0..n {
            for p in 0..m {
                op[(p, m + j)] = self.rx[(j, p)] * sw[j];
                op[(m + j, p)] = self.tx[(j, p)] * sw[j];
            }
        }
        for i in 0..self.grid.len() {
            let a = self.grid.antipode_index(i);
            op[(m + 2 * i, m + 2 * a)] -= C64::new(1.0, 0.0);
            op[(m + 2 * i + 1, m + 2 * a + 1)] += C64::new(1.0, 0.0);
        }
        if !self.scatter.is_zero() {
            let x = self.scatter.to_dense(n);
            for r in 0..n {
                for c in 0..n {
                    op[(m + r, m + c)] += x[(r, c)] * (sw[r] * sw[c]);
                }
            }
        }
        op
    }

    /// Largest singular value of [`Self::normalized_operator`].
    pub fn passivity_sigma(&self) -> f64 {
        linalg::sigma_max(&self.normalized_operator())
    }

    /// The same physical object after a rigid rotation about the origin.
    pub fn rotated(&self, rotation: &Rotation3<f64>) -> RadiatingStructure {
        let tx = rotate_columns(&self.grid, &self.tx, rotation);
        let rx = rotate_columns(&self.grid, &self.rx, rotation);
        let scatter = match &self.scatter {
            ScatterKernel::Zero => ScatterKernel::Zero,
            ScatterKernel::Dense(m) => {
                let outer = rotate_columns(&self.grid, m, rotation);
                let both = rotate_columns(&self.grid, &outer.transpose(), rotation);
                ScatterKernel::Dense(both.transpose())
            }
            ScatterKernel::LowRank { left, core, right } => ScatterKernel::LowRank {
                left: rotate_columns(&self.grid, left, rotation),
                core: core.clone(),
                right: rotate_columns(&self.grid, right, rotation),
            },
        };
        RadiatingStructure {
            grid: self.grid.clone(),
            frequency: self.frequency,
            coupling: self.coupling.clone(),
            tx,
            rx,
            scatter,
            extrinsic_noise: self.extrinsic_noise,
        }
    }
}

fn stencil_or_exact(grid: &DirectionGrid, d: Direction) -> Vec<(usize, f64)> {
    match grid.find(d) {
        Some(i) => vec![(i, 1.0)],
        None => grid.stencil(d).to_vec(),
    }
}

fn kernel_at(grid: &DirectionGrid, k: &CMatrix, d: Direction) -> CMatrix {
    let mut out = CMatrix::zeros(2, k.ncols());
    for (i, w) in stencil_or_exact(grid, d) {
        if w != 0.0 {
            out += k.rows(2 * i, 2) * C64::new(w, 0.0);
        }
    }
    out
}

fn weighted(grid: &DirectionGrid, v: &CVector) -> CVector {
    let mut out = v.clone();
    for (i, &w) in grid.weights().iter().enumerate() {
        out[2 * i] *= w;
        out[2 * i + 1] *= w;
    }
    out
}

/// `-diag(1, -1)` applied to the interleaved vector read at antipodes.
pub(crate) fn mirror_vector(grid: &DirectionGrid, v: &CVector) -> CVector {
    let mut out = CVector::zeros(v.len());
    for i in 0..grid.len() {
        let a = grid.antipode_index(i);
        out[2 * i] = -v[2 * a];
        out[2 * i + 1] = v[2 * a + 1];
    }
    out
}

fn rotate_columns(grid: &Arc<DirectionGrid>, k: &CMatrix, rotation: &Rotation3<f64>) -> CMatrix {
    let mut out = CMatrix::zeros(k.nrows(), k.ncols());
    for c in 0..k.ncols() {
        let col = k.column(c);
        let read = |d: Direction| -> Jones {
            let mut v = [C64::new(0.0, 0.0); 2];
            for (i, w) in stencil_or_exact(grid, d) {
                if w != 0.0 {
                    v[0] += col[2 * i] * w;
                    v[1] += col[2 * i + 1] * w;
                }
            }
            v
        };
        for (i, &d) in grid.directions().iter().enumerate() {
            let v = rotate_sample(rotation, d, read);
            out[(2 * i, c)] = v[0];
            out[(2 * i + 1, c)] = v[1];
        }
    }
    out
}
