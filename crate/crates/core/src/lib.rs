//! Expected spectral norm of sums of independent random matrices.
//!
//! For a centered sum `Z = S_1 + … + S_n` of independent `d1 × d2` random
//! matrices, with variance parameter `v = max(‖E ZZ*‖, ‖E Z*Z‖)` and
//! large-deviation parameter `L = (E max_i ‖S_i‖²)^{1/2}`,
//!
//! ```text
//! √(v/4) + L/4  ≤  (E‖Z‖²)^{1/2}  ≤  √(C v) + C L,    C = 4(1 + 2⌈ln(d1 + d2)⌉).
//! ```
//!
//! The crate computes both sides, checks every auxiliary matrix inequality
//! numerically, and cross-checks the estimates by exact enumeration and
//! seeded Monte Carlo.
//!
//! ```
//! use matcon::models::{make_example, Example};
//! use matcon::montecarlo::{bound_report, MCConfig};
//!
//! let model = make_example(Example::Sec71, 16, 100).unwrap();
//! let report = bound_report(&model, &MCConfig::new(200, 7)).unwrap();
//! assert!(report.sandwich_ok);
//! assert!(report.lower() <= report.rms() && report.rms() <= report.upper());
//! ```

pub mod bounds;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod models;
pub mod montecarlo;
pub mod oracles;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{HermitianMatrix, RectMatrix, C64};
pub use models::{Example, IndependentSumModel, SummandSpec};
pub use montecarlo::{BoundReport, Estimate, MCConfig};
pub use oracles::{CheckResult, FactCase, FiniteSummand};
pub use rng::RngSeed;

// The book's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/linear-algebra.md")]
    pub mod linear_algebra {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    pub mod oracles {}
    #[doc = include_str!("../../../book/src/models.md")]
    pub mod models {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    pub mod bounds {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    pub mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
