//! Workflow-aware blackbox parameter tampering scanner.
//!
//! Scanning happens in two phases:
//!
//! 1. **Capture.** An [`ActionScript`] describing one valid run through a
//!    multi-step form workflow is replayed twice. Comparing the two runs finds
//!    server-generated one-time and session tokens, cross-request parameter
//!    dependencies, and the reproducible evidence ("key features") that the
//!    server accepted each step.
//! 2. **Fuzz.** Each remaining parameter is mutated, checked against the
//!    form's own client-side validation, and only values the client would
//!    refuse are force-submitted. Every attempt restarts the workflow so fresh
//!    tokens and dependent values are carried along. A mutated value that the
//!    server accepts (all key features reappear) is reported as a [`Finding`].
//!
//! Client-side behaviour is described declaratively in a `data-clv` form
//! attribute (validation, pre-processing transforms, conditional fields)
//! instead of executed JavaScript; see [`html::clv`].
//!
//! The runnable programs under `examples/` walk through each capability
//! against the bundled reference test bed.

pub mod capture;
pub mod detect;
mod error;
pub mod fuzz;
pub mod html;
pub mod mutate;
pub mod report;
pub mod script;
pub mod session;

pub use capture::{CaptureAnalysis, Capturer, FeatureSet, TokenRegistry};
pub use error::{Error, Result};
pub use fuzz::{Finding, FuzzConfig, Fuzzer, ScanOutcome};
pub use html::{Document, Form, Locator, Param, ParamSource};
pub use mutate::{InputType, MutationCandidate, MutationRule};
pub use report::ScanReport;
pub use script::{Action, ActionScript, SubmissionTrace};
pub use session::{HttpRequest, HttpResponse, Session, SessionConfig};
