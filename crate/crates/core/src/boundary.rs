//! Reflecting walls by mirror extension.
//!
//! A wall along dimension j is emulated by doubling the domain along j and
//! continuing the field through the wall as a mirror image: even image for
//! an insulating (zero-flux) wall, odd image for an absorbing (zero-value)
//! wall. The periodic stencil on the doubled domain then commutes with the
//! reflection, the image stays a mirror image for all time, and restricting
//! to the original half recovers the walled dynamics. The mirror planes sit
//! half a cell outside the retained range, between nodes n-1 and n and
//! (wrapping) between 2n-1 and 0.
//!
//! Doubling costs exactly one extra system qubit per walled dimension.

use crate::error::{Error, Result};
use crate::lattice::{flatten_index, unflatten_index, BoundaryKind, Field, VelocityField};
use crate::stencil::SparseOperator;

/// Default tolerance for the symmetry check in [`restrict`]. The classical
/// march preserves the mirror image exactly; the emulated quantum march only
/// up to its per-step encoding error, so restriction of quantum fields
/// should pass an explicit budget via [`restrict_with_tol`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Sign of the mirror image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// The image parity that realizes a boundary kind, if any.
    pub fn from_boundary(kind: BoundaryKind) -> Option<Parity> {
        match kind {
            BoundaryKind::Periodic => None,
            BoundaryKind::NeumannReflect => Some(Parity::Even),
            BoundaryKind::DirichletReflect => Some(Parity::Odd),
        }
    }

    pub fn boundary_kind(self) -> BoundaryKind {
        match self {
            Parity::Even => BoundaryKind::NeumannReflect,
            Parity::Odd => BoundaryKind::DirichletReflect,
        }
    }
}

/// Double the field along `dim`, filling the new half with the mirror image
/// of the old one. The grid must flag `dim` with the boundary kind matching
/// `parity`; the output grid is periodic along `dim`.
pub fn extend_reflect(field: &Field, dim: usize, parity: Parity) -> Result<Field> {
    let grid = field.grid();
    if dim >= grid.dims() {
        return Err(Error::OutOfRange(format!(
            "dimension {dim} of a {}-d grid",
            grid.dims()
        )));
    }
    if grid.boundary(dim) != parity.boundary_kind() {
        return Err(Error::Config(format!(
            "dimension {dim} is flagged {:?}, not the {:?} wall this parity realizes",
            grid.boundary(dim),
            parity.boundary_kind()
        )));
    }
    let ext = grid.doubled_along(dim)?;
    let n = grid.size(dim);
    let sign = parity.sign();
    let mut values = vec![0.0; ext.total_points()];
    for (m_ext, slot) in values.iter_mut().enumerate() {
        let mut coords = unflatten_index(m_ext, &ext);
        let c = coords[dim];
        let factor = if c < n {
            1.0
        } else {
            coords[dim] = 2 * n - 1 - c;
            sign
        };
        let src = flatten_index(&coords, grid).expect("mirrored coordinate stays in range");
        *slot = factor * field.values()[src];
    }
    Field::new(ext, values)
}

/// Largest deviation of `field_ext` from its supposed mirror symmetry along
/// `dim`: max over node pairs of |phi(M m) - sign * phi(m)|.
pub fn symmetry_drift(field_ext: &Field, dim: usize, parity: Parity) -> f64 {
    let grid = field_ext.grid();
    let n = grid.size(dim) / 2;
    let sign = parity.sign();
    let mut drift = 0.0f64;
    for m in 0..grid.total_points() {
        let mut coords = unflatten_index(m, grid);
        if coords[dim] >= n {
            continue;
        }
        coords[dim] = 2 * n - 1 - coords[dim];
        let mirror = flatten_index(&coords, grid).expect("mirror coordinate in range");
        drift = drift.max((field_ext.values()[mirror] - sign * field_ext.values()[m]).abs());
    }
    drift
}

/// Undo [`extend_reflect`]: keep the lower half along `dim` and restore the
/// wall flag. Fails with [`Error::SymmetryDrift`] if the field has lost its
/// mirror symmetry by more than `tol`.
pub fn restrict_with_tol(field_ext: &Field, dim: usize, parity: Parity, tol: f64) -> Result<Field> {
    let grid = field_ext.grid();
    if dim >= grid.dims() {
        return Err(Error::OutOfRange(format!(
            "dimension {dim} of a {}-d grid",
            grid.dims()
        )));
    }
    if grid.boundary(dim) != BoundaryKind::Periodic {
        return Err(Error::Config(
            "restriction expects the mirror-extended (periodic) grid".into(),
        ));
    }
    let drift = symmetry_drift(field_ext, dim, parity);
    if drift > tol {
        return Err(Error::SymmetryDrift { drift, tol });
    }
    let half = grid.halved_along(dim, parity.boundary_kind())?;
    let mut values = vec![0.0; half.total_points()];
    for (m, slot) in values.iter_mut().enumerate() {
        let coords = unflatten_index(m, &half);
        let src = flatten_index(&coords, grid).expect("half-domain coordinate in range");
        *slot = field_ext.values()[src];
    }
    Field::new(half, values)
}

/// [`restrict_with_tol`] at the default [`SYMMETRY_TOL`].
pub fn restrict(field_ext: &Field, dim: usize, parity: Parity) -> Result<Field> {
    restrict_with_tol(field_ext, dim, parity, SYMMETRY_TOL)
}

/// Mean of the field on the two seam planes along `dim` (largest magnitude
/// over transverse positions). Under an odd image both means are exactly
/// zero, which is the absorbing wall taking its boundary value.
pub fn max_interface_mean(field_ext: &Field, dim: usize) -> f64 {
    let grid = field_ext.grid();
    let n = grid.size(dim) / 2;
    let mut worst = 0.0f64;
    for m in 0..grid.total_points() {
        let coords = unflatten_index(m, grid);
        if coords[dim] != n - 1 && coords[dim] != 2 * n - 1 {
            continue;
        }
        let mut partner = coords.clone();
        partner[dim] = (coords[dim] + 1) % (2 * n);
        let other = flatten_index(&partner, grid).expect("seam partner in range");
        worst = worst.max(0.5 * (field_ext.values()[m] + field_ext.values()[other]).abs());
    }
    worst
}

/// Mirror-extend a velocity field along `dim`: the normal component
/// continues as an odd image, tangential components as even images. Rejects
/// flow through the wall: the normal component must vanish on the two
/// wall-adjacent node layers, or the extension would put a discontinuity on
/// the seam. Zero velocity always qualifies.
pub fn extend_velocity(velocity: &VelocityField, dim: usize) -> Result<VelocityField> {
    let grid = velocity.grid();
    if dim >= grid.dims() {
        return Err(Error::OutOfRange(format!(
            "dimension {dim} of a {}-d grid",
            grid.dims()
        )));
    }
    let n = grid.size(dim);
    let normal = velocity.component(dim);
    for m in 0..grid.total_points() {
        let c = unflatten_index(m, grid)[dim];
        if (c == 0 || c == n - 1) && normal[m].abs() > 1e-12 {
            return Err(Error::Config(format!(
                "velocity has flow through the wall: normal component {} at a wall layer; \
                 walls support zero or wall-parallel velocities only",
                normal[m]
            )));
        }
    }
    let ext = grid.doubled_along(dim)?;
    let components = (0..grid.dims())
        .map(|j| {
            let sign = if j == dim { -1.0 } else { 1.0 };
            let comp = velocity.component(j);
            (0..ext.total_points())
                .map(|m_ext| {
                    let mut coords = unflatten_index(m_ext, &ext);
                    let c = coords[dim];
                    let factor = if c < n {
                        1.0
                    } else {
                        coords[dim] = 2 * n - 1 - c;
                        sign
                    };
                    let src =
                        flatten_index(&coords, grid).expect("mirrored coordinate stays in range");
                    factor * comp[src]
                })
                .collect()
        })
        .collect();
    VelocityField::from_components(ext, components)
}

/// Direct one-step matrix for 1-d pure diffusion between two insulating
/// walls: interior rows are the standard stencil, wall rows lose the flux
/// through the wall, [1 - r_h, r_h]. An independent oracle for what the
/// mirror extension must reproduce.
pub fn neumann_corrected_matrix_1d(n: usize, rh: f64) -> Result<SparseOperator> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 nodes, got {n}")));
    }
    if !rh.is_finite() || rh <= 0.0 || rh >= 0.5 {
        return Err(Error::Config(format!(
            "diffusion number r_h = {rh} outside the stable range (0, 0.5)"
        )));
    }
    let rows = (0..n)
        .map(|m| {
            if m == 0 {
                vec![(0, 1.0 - rh), (1, rh)]
            } else if m == n - 1 {
                vec![(n - 2, rh), (n - 1, 1.0 - rh)]
            } else {
                vec![(m - 1, rh), (m, 1.0 - 2.0 * rh), (m + 1, rh)]
            }
        })
        .collect();
    SparseOperator::from_rows(n, rows)
}
