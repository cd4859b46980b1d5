//! Exact engine for the monomial stage of resolution of purely inseparable
//! surface singularities z^{p^e} = f(x, y) in characteristic p > 0.
//!
//! The crate models a hypersurface in Weierstrass form
//!
//! ```text
//!     h = z^{p^e} + a_1 z^{p^e - 1} + … + a_{p^e},   a_i ∈ k[[x, y]],
//! ```
//!
//! over a finite field k = F_{p^m}, together with a boundary monomial
//! M = ∏ x_D^{m_D} recording the history of the ambient blow-ups.  All
//! arithmetic is exact: coefficients live in F_{p^m}, orders and slopes in ℚ.
//!
//! Modules, bottom-up:
//!
//! * [`field`] — arithmetic in F_{p^m} and Lucas binomial coefficients;
//! * [`rat`] — exact rational numbers used for orders, slopes and weights;
//! * [`order`] — the ordered value domains: words of rationals, pairs of
//!   words, lexicographic tuples, and the center-selection value;
//! * [`series`] — truncated bivariate power series and homogeneous forms;
//! * [`state`] — the game state: hypersurface, boundary data, validation;
//! * [`invariants`] — cleaning (well-adaptedness) and every numerical
//!   invariant of a state;
//! * [`blowup`] — point and curve transforms, fiber enumeration;
//! * [`driver`] — the resolution game against an adversary choosing points;
//! * [`forge`] — construction and verification of residual-jump witnesses;
//! * [`io`] — serialization of instances and traces, hashing, config.

pub mod blowup;
pub mod driver;
pub mod field;
pub mod forge;
pub mod invariants;
pub mod order;
pub mod rat;
pub mod series;
pub mod state;

pub use blowup::{enumerate_fiber, transform_curve, transform_gamma, transform_point, BlowupError, Center, FiberPoint, Outcome};
pub use driver::{
    a_word, audit_trace, classify_transformation, compare_old_new, default_max_steps,
    detect_jump_episodes, run, select_center, AuditLine, DevilStrategy, DriverError, EpisodeCheck,
    JumpEpisode, OldNewReport, OldNewRow, OutcomeTag, StepClass, StepKind, Terminal, Trace,
    TraceAudit, TraceStep,
};
pub use field::{lucas_binomial, FieldError, Fq, FqCtx};
pub use forge::{
    analyze_jump, build_phi, embed_jump, embed_jump_with_good_divisor, recover_spec, verify_jump,
    ForgeError, JumpAnalysis, JumpReport, JumpSpec, RecoveredJump,
};
pub use invariants::{
    analyze, clean, Classification, CleanReport, DivisorReport, InvariantError, InvariantReport,
    SingularLocusDesc, SlopeCase, StateAnalysis, TightCase,
};
pub use order::{GammaValue, OldTuple, SpadePair, Word};
pub use rat::Rat;
pub use series::{BiSeries, ChartMap, DivBlock, HomogPoly, OrdBound};
pub use state::{
    Axis, CheckResult, Cond2Verdict, Configuration, DivisorInfo, Hypersurface, MonomialData,
    MonomialState, StateError, ValidationReport,
};
