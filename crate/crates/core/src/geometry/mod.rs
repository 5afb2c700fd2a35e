//! Constraint builders for multiple-view geometry in normalized camera coordinates.

use nalgebra::{DMatrix, DVector};

pub mod epipolar;
pub mod pose;
pub mod reproj;
pub mod trifocal;
pub mod vp;

pub use epipolar::{
    decompose_essential, epipolar_constraint, epipolar_hessian, epipolar_poly, essential_dlt, essential_from_pose,
    project_to_essential, triangulate_linear, twoview_losses, EssentialMatrix, TwoViewLosses,
};
pub use pose::CameraPose;
pub use reproj::{reproj_constraint, reproj_jet, reproj_system, Match2D3D, ReprojJet};
pub use trifocal::{
    c3_linearization, c4_linearization, c9_linearization, complement_basis, threeview_systems, trifocal_from_cameras,
    MixSelection, ThreeViewErrors, ThreeViewSystems, TrifocalTensor,
};
pub use vp::{vp_bounds, vp_constraint, vp_poly, VpBounds, VpJet};

/// Constraint values and their Jacobian with respect to the measurement at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub value: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

impl Linearization {
    /// Keeps the listed rows in order.
    pub fn select_rows(&self, rows: &[usize]) -> Linearization {
        Linearization { value: self.value.select_rows(rows), jacobian: self.jacobian.select_rows(rows) }
    }

    /// Stacks the rows of `self` above those of `other`.
    pub fn stack(&self, other: &Linearization) -> Linearization {
        let n = self.jacobian.ncols();
        let (a, b) = (self.value.len(), other.value.len());
        let mut value = DVector::zeros(a + b);
        value.rows_mut(0, a).copy_from(&self.value);
        value.rows_mut(a, b).copy_from(&other.value);
        let mut jacobian = DMatrix::zeros(a + b, n);
        jacobian.rows_mut(0, a).copy_from(&self.jacobian);
        jacobian.rows_mut(a, b).copy_from(&other.jacobian);
        Linearization { value, jacobian }
    }
}
