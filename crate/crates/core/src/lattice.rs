//! Uniform Cartesian lattices, scalar and vector fields on them, and the
//! packed state vector that carries the ancilla register.
//!
//! Linear indices run dimension 0 fastest: coordinates (c_0, .., c_{d-1})
//! map to c_0 + n_0*(c_1 + n_1*c_2). The ancilla register of a state vector
//! forms the most significant bits of the basis index, so ancilla value `a`
//! owns the contiguous amplitude block [a*N, (a+1)*N).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Boundary handling along one grid dimension.
///
/// Non-periodic walls are realized by mirror extension: the domain is doubled
/// along that dimension, the field is reflected with the indicated parity,
/// and the periodic solver runs on the doubled domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    /// Insulating wall (zero normal derivative); even mirror image.
    NeumannReflect,
    /// Absorbing wall (zero value); odd mirror image.
    DirichletReflect,
}

/// A uniform lattice with power-of-two extent along each dimension and a
/// single spacing shared by all dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    shape: Vec<usize>,
    spacing: f64,
    boundary: Vec<BoundaryKind>,
}

impl GridSpec {
    /// Grid with `points_per_dim` nodes along each of `dims` dimensions.
    pub fn new(
        dims: usize,
        points_per_dim: usize,
        spacing: f64,
        boundary: Vec<BoundaryKind>,
    ) -> Result<Self> {
        if dims == 0 || dims > 3 {
            return Err(Error::Config(format!(
                "grid must have 1, 2, or 3 dimensions, got {dims}"
            )));
        }
        if boundary.len() != dims {
            return Err(Error::Shape(format!(
                "{} boundary kinds for {dims} dimensions",
                boundary.len()
            )));
        }
        Self::from_shape(vec![points_per_dim; dims], spacing, boundary)
    }

    /// Fully periodic grid over [0, 2*pi)^d, so spacing = 2*pi / points.
    pub fn periodic(dims: usize, points_per_dim: usize) -> Result<Self> {
        let spacing = std::f64::consts::TAU / points_per_dim as f64;
        Self::new(
            dims,
            points_per_dim,
            spacing,
            vec![BoundaryKind::Periodic; dims.max(1)],
        )
    }

    /// Fully periodic grid with an explicit spacing.
    pub fn periodic_with_spacing(
        dims: usize,
        points_per_dim: usize,
        spacing: f64,
    ) -> Result<Self> {
        Self::new(
            dims,
            points_per_dim,
            spacing,
            vec![BoundaryKind::Periodic; dims.max(1)],
        )
    }

    /// General constructor; extents may differ per dimension (mirror
    /// extension doubles one dimension at a time).
    pub fn from_shape(shape: Vec<usize>, spacing: f64, boundary: Vec<BoundaryKind>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::Config(format!(
                "grid must have 1, 2, or 3 dimensions, got {}",
                shape.len()
            )));
        }
        if boundary.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} boundary kinds for {} dimensions",
                boundary.len(),
                shape.len()
            )));
        }
        for (j, &n) in shape.iter().enumerate() {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::Config(format!(
                    "extent along dimension {j} must be a power of two >= 2, got {n}"
                )));
            }
        }
        if !spacing.is_finite() || spacing <= 0.0 {
            return Err(Error::Config(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Self { shape, spacing, boundary })
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    /// Number of nodes along dimension `dim`.
    pub fn size(&self, dim: usize) -> usize {
        self.shape[dim]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self, dim: usize) -> BoundaryKind {
        self.boundary[dim]
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.boundary.iter().all(|&b| b == BoundaryKind::Periodic)
    }

    pub fn total_points(&self) -> usize {
        self.shape.iter().product()
    }

    /// Qubits needed to index the nodes: sum of log2 of the extents.
    pub fn system_qubits(&self) -> u32 {
        self.shape.iter().map(|n| n.trailing_zeros()).sum()
    }

    /// Physical coordinates of the node at `index`.
    pub fn position(&self, index: usize) -> Vec<f64> {
        unflatten_index(index, self)
            .into_iter()
            .map(|c| c as f64 * self.spacing)
            .collect()
    }

    /// Same grid with dimension `dim` doubled and marked periodic; the
    /// spacing is unchanged. Used by the mirror-extension machinery.
    pub fn doubled_along(&self, dim: usize) -> Result<GridSpec> {
        if dim >= self.dims() {
            return Err(Error::OutOfRange(format!(
                "dimension {dim} of a {}-d grid",
                self.dims()
            )));
        }
        let mut shape = self.shape.clone();
        shape[dim] *= 2;
        let mut boundary = self.boundary.clone();
        boundary[dim] = BoundaryKind::Periodic;
        Self::from_shape(shape, self.spacing, boundary)
    }

    /// Inverse of [`doubled_along`](Self::doubled_along): halve dimension
    /// `dim` and restore its boundary flag.
    pub fn halved_along(&self, dim: usize, boundary: BoundaryKind) -> Result<GridSpec> {
        if dim >= self.dims() {
            return Err(Error::OutOfRange(format!(
                "dimension {dim} of a {}-d grid",
                self.dims()
            )));
        }
        let mut shape = self.shape.clone();
        shape[dim] /= 2;
        let mut kinds = self.boundary.clone();
        kinds[dim] = boundary;
        Self::from_shape(shape, self.spacing, kinds)
    }
}

/// Flat index of the node at `coords`. Errors if a coordinate exceeds its
/// extent or the dimension counts disagree.
pub fn flatten_index(coords: &[usize], grid: &GridSpec) -> Result<usize> {
    if coords.len() != grid.dims() {
        return Err(Error::Shape(format!(
            "{} coordinates for a {}-d grid",
            coords.len(),
            grid.dims()
        )));
    }
    let mut index = 0;
    let mut stride = 1;
    for (j, (&c, &n)) in coords.iter().zip(grid.shape.iter()).enumerate() {
        if c >= n {
            return Err(Error::OutOfRange(format!(
                "coordinate {c} >= extent {n} along dimension {j}"
            )));
        }
        index += c * stride;
        stride *= n;
    }
    Ok(index)
}

/// Coordinates of the node at flat `index`.
///
/// Panics if `index` is out of range; flat indices are produced internally,
/// so a bad one is a programming error rather than bad input.
pub fn unflatten_index(index: usize, grid: &GridSpec) -> Vec<usize> {
    assert!(
        index < grid.total_points(),
        "index {index} >= {} grid points",
        grid.total_points()
    );
    let mut rem = index;
    grid.shape
        .iter()
        .map(|&n| {
            let c = rem % n;
            rem /= n;
            c
        })
        .collect()
}

/// Flat index of the node one step along `dim` (offset must be +1 or -1),
/// wrapping periodically. Mirror extension reduces every boundary to the
/// periodic case, so wraparound is the only rule needed here.
pub fn neighbor_index(index: usize, dim: usize, offset: i32, grid: &GridSpec) -> usize {
    assert!(offset == 1 || offset == -1, "offset must be +1 or -1, got {offset}");
    assert!(dim < grid.dims(), "dimension {dim} of a {}-d grid", grid.dims());
    assert!(
        index < grid.total_points(),
        "index {index} >= {} grid points",
        grid.total_points()
    );
    let n = grid.shape[dim];
    let stride: usize = grid.shape[..dim].iter().product();
    let c = (index / stride) % n;
    let c_next = if offset == 1 {
        if c + 1 == n {
            0
        } else {
            c + 1
        }
    } else if c == 0 {
        n - 1
    } else {
        c - 1
    };
    index - c * stride + c_next * stride
}

/// A real scalar field sampled on a grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::Shape(format!(
                "{} values for {} grid points",
                values.len(),
                grid.total_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.total_points();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        let n = grid.total_points();
        Self { grid, values: vec![value; n] }
    }

    /// Sample `f` at every node position.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.total_points()).map(|m| f(&grid.position(m))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Copy scaled to unit 2-norm. A zero field has no direction to keep.
    pub fn normalized(&self) -> Result<Field> {
        let norm = self.norm_l2();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Config(format!("cannot normalize field with norm {norm}")));
        }
        let values = self.values.iter().map(|v| v / norm).collect();
        Ok(Field { grid: self.grid.clone(), values })
    }

    /// Largest pointwise difference to `other`; grids must match.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }
}

/// A velocity field: one real component per grid dimension, each sampled at
/// every node.
#[derive(Clone, Debug)]
pub struct VelocityField {
    grid: GridSpec,
    components: Vec<Vec<f64>>,
}

impl VelocityField {
    pub fn zero(grid: GridSpec) -> Self {
        let d = grid.dims();
        let n = grid.total_points();
        Self { grid, components: vec![vec![0.0; n]; d] }
    }

    pub fn from_components(grid: GridSpec, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dims() {
            return Err(Error::Shape(format!(
                "{} components for a {}-d grid",
                components.len(),
                grid.dims()
            )));
        }
        for (j, comp) in components.iter().enumerate() {
            if comp.len() != grid.total_points() {
                return Err(Error::Shape(format!(
                    "component {j} has {} values for {} grid points",
                    comp.len(),
                    grid.total_points()
                )));
            }
        }
        Ok(Self { grid, components })
    }

    /// Sample component `j` of `f` at every node position.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let components = (0..grid.dims())
            .map(|j| (0..grid.total_points()).map(|m| f(&grid.position(m), j)).collect())
            .collect();
        Self { grid, components }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    /// max over nodes of sum_j |v_j|; the advection analogue of a CFL number
    /// is this times dt/dx.
    pub fn max_abs_component_sum(&self) -> f64 {
        let n = self.grid.total_points();
        (0..n).fold(0.0, |acc, m| {
            let s: f64 = self.components.iter().map(|c| c[m].abs()).sum();
            acc.max(s)
        })
    }

    /// Root-mean-square speed over the grid.
    pub fn rms(&self) -> f64 {
        let n = self.grid.total_points();
        let sum: f64 = (0..n)
            .map(|m| self.components.iter().map(|c| c[m] * c[m]).sum::<f64>())
            .sum();
        (sum / n as f64).sqrt()
    }
}

/// Full state vector of the emulated register: `n_ancilla` ancilla qubits
/// (most significant) tensored with the system register over the grid nodes.
///
/// Ancilla value `a = lcu_value * 2 + dilation_bit` selects the contiguous
/// block `[a*N, (a+1)*N)`, i.e. the dilation qubit is the least significant
/// ancilla and the preparation register sits above it.
#[derive(Clone, Debug)]
pub struct StateVector {
    grid: GridSpec,
    n_ancilla: u32,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Encode a field as amplitudes on the system register with all ancillas
    /// in |0>. The field is normalized to unit 2-norm.
    pub fn from_field(field: &Field, n_ancilla: u32) -> Result<Self> {
        let normalized = field.normalized()?;
        let n = normalized.grid().total_points();
        let mut amplitudes = vec![Complex64::ZERO; n << n_ancilla];
        for (a, &v) in amplitudes[..n].iter_mut().zip(normalized.values()) {
            *a = Complex64::new(v, 0.0);
        }
        Ok(Self { grid: field.grid().clone(), n_ancilla, amplitudes })
    }

    pub(crate) fn from_amplitudes(
        grid: GridSpec,
        n_ancilla: u32,
        amplitudes: Vec<Complex64>,
    ) -> Self {
        debug_assert_eq!(amplitudes.len(), grid.total_points() << n_ancilla);
        Self { grid, n_ancilla, amplitudes }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_ancilla(&self) -> u32 {
        self.n_ancilla
    }

    pub fn total_qubits(&self) -> u32 {
        self.grid.system_qubits() + self.n_ancilla
    }

    /// Dimension of the system register (number of grid nodes).
    pub fn system_dim(&self) -> usize {
        self.grid.total_points()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Amplitudes of the system register for ancilla value `a`.
    pub fn ancilla_block(&self, a: usize) -> &[Complex64] {
        let n = self.system_dim();
        &self.amplitudes[a * n..(a + 1) * n]
    }

    /// Largest amplitude magnitude outside the all-zero ancilla block.
    pub fn max_ancilla_leakage(&self) -> f64 {
        let n = self.system_dim();
        self.amplitudes[n..].iter().fold(0.0, |acc, a| acc.max(a.norm()))
    }

    /// Real part of the ancilla-0 block as a field on the grid. The dynamics
    /// here are real, so this is the decoded solution (up to normalization).
    pub fn system_real_field(&self) -> Field {
        let values = self.ancilla_block(0).iter().map(|a| a.re).collect();
        Field { grid: self.grid.clone(), values }
    }
}
