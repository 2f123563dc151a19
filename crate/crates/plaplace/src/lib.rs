//! Toolkit for the first Dirichlet eigenvalue of the normalized p-Laplacian
//!
//!     Lp u = ((p-1)/p) * (normalized infinity Laplacian of u)
//!          + (1/p)     * (Laplacian of u),
//!
//! written throughout as the degenerate elliptic operator
//!
//!     F_p(grad u, Hess u) = -((p-2)/p) |grad u|^-2 <Hess u grad u, grad u>
//!                           - (1/p) tr(Hess u).
//!
//! The crate provides:
//!
//! - [`special`]: gamma, Bessel J of real order, and first Bessel zeros;
//! - [`radial`]: the ball eigenvalue by a Bessel-zero closed form and by an
//!   independent ODE shooting route;
//! - [`constants`]: the explicit constants in the lower bound
//!   lambda >= K |domain|^(-2/n), the ball value K*, and their ratio curve;
//! - [`grid`]: 2-D lattice masks for disks, ellipses, rectangles, stadiums
//!   and annuli, with CSV/JSON/SVG output;
//! - [`operator`]: pointwise evaluation of F_p and of its sub/super
//!   envelopes at degenerate gradients;
//! - [`eigen`]: an inverse-power eigensolver with Collatz-Wielandt
//!   brackets, plus simplicity, symmetry, Hopf, and bound checks;
//! - [`abp`]: sup-convolution, concave envelopes, contact sets, and the
//!   pointwise chain of inequalities behind the measure-based lower bound.

pub mod abp;
pub mod constants;
pub mod error;
pub mod grid;
pub mod operator;
pub mod radial;
pub mod special;

pub mod eigen;
mod hull;

pub use error::{Error, Result};
