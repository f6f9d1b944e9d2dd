//! Human review of VERIFY-band frames: bundle export, a durable correction
//! store and the HTTP API over it.

pub mod bundle;
pub mod server;
pub mod store;

pub use bundle::{build_bundle, open_bundle, Manifest, ReviewTask, TaskStatus};
pub use server::{router, spawn_server, RunningServer};
pub use store::{ReviewError, ReviewStore, Submission};
