//! Linear-algebra and special-function kernel.

mod linalg;
mod quadrature;
mod special;

pub use linalg::{chmax_product, trace_product, trace_ratio, SpdMatrix, SYMMETRY_TOL};
pub(crate) use linalg::{check_symmetric, is_degenerate_chmax, symmetrize};
pub use quadrature::{
    adaptive_quad, integrate_components, QuadratureResult, DEFAULT_MAX_DEPTH, DEFAULT_REL_TOL,
};
pub(crate) use special::ln_inc_beta;
pub use special::{
    f_cdf, f_quantile, f_sf, ln_beta, ln_gamma, ln_reg_inc_gamma_q, reg_inc_beta,
    reg_inc_gamma_p, reg_inc_gamma_q,
};
