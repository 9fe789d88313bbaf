//! HTTP service, user store and operator CLI around `lectern-core`.
//!
//! [`server::AppState::from_config`] wires the corpus, index and adapters
//! named in a [`config::Config`]; [`server::router`] exposes them over JSON.

pub mod adapters;
pub mod cli;
pub mod config;
pub mod error;
pub mod server;
pub mod session;
pub mod store;

pub use config::Config;
pub use error::ApiError;
pub use server::{router, spawn_background, AppState, RunningServer};
pub use store::{User, UserStore, UserType, UserUpdate};
