//! Least-squares estimation with group memberships.

mod design;
mod fit;
mod init;
mod membership;
mod solve;

pub use design::{assemble_design_blocks, assemble_normal_equations, DesignBlocks, NormalEquations};
pub use fit::{fit, fit_fixed, sigma2_estimate, Estimator, FitOptions, FitResult, FitSummary, Step};
pub use init::{init_memberships, kmeans, KMeansResult, NodeProfiles};
pub use membership::{update_col_memberships, update_row_memberships, MembershipUpdate};
pub use solve::{solve_theta, symmetric_pseudo_inverse, ThetaSolution, RCOND_TOL};
