//! Wave-front tracking for steady supersonic reacting Euler flow past a bending wall.

pub mod commands;
pub mod config;
pub mod curves;
pub mod error;
pub mod gas;
pub mod glimm;
pub mod oracle;
pub mod quad;
pub mod reaction;
pub mod riemann;
pub mod root;
pub mod tracker;
pub mod wall;

pub use curves::Family;
pub use error::{FlowError, Result};
pub use gas::{FlowState, GasModel};
