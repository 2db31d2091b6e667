//! Receding-horizon skill selection for a legged robot driven by a
//! vision-language model, with a deterministic obstacle-course simulator
//! and an evaluation harness.

pub mod agent;
pub mod backend;
pub mod course;
pub mod eval;
pub mod geodesic;
pub mod geometry;
pub mod observation;
pub mod prompting;
pub mod protocol;
pub mod render;
pub mod skills;
pub mod world;

pub use agent::{run_episode, EpisodeConfig, EpisodeOutcome, EpisodeResult, Termination, Transcript};
pub use course::{fixture, CourseSpec};
pub use prompting::MethodVariant;
pub use skills::{Magnitude, SkillCommand, SkillKind};
