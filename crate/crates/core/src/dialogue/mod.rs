//! Dialogue acts, user goals, the agenda-based simulated user and the rule oracle.

pub mod act;
pub mod goal;
pub mod oracle;
pub mod user;

pub use act::{DialogueAct, Speaker};
pub use goal::{sample_goal, sample_goal_seeded, DomainGoal, UserGoal};
pub use oracle::{oracle_action, oracle_acts, oracle_summary};
pub use user::{user_step, AgendaUser, DEFAULT_PATIENCE};
