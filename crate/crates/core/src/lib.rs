//! Turnaround-time and self-interference model for zero-IF SDR front-ends.
//!
//! The crate covers the switching paths of a configurable transceiver's
//! enable state machine, a low-latency alternative that toggles only the Tx
//! LO divider with a single SPI write, and the analysis around them:
//!
//! - [`spi`]: bit-exact 24-bit register-write frames and their wire time.
//! - [`ensm`]: itemized turnaround budgets per duplexing mode and direction.
//! - [`sim`]: a discrete-event timeline that produces sampled Tx power traces.
//! - [`rf`]: Tx power levels, receiver noise floors, and I/Q capture analysis.
//! - [`mac`]: compliance of turnaround budgets with MAC deadlines.
//!
//! ```
//! use tdd_turnaround::ensm::{turnaround_budget, ClockConfig, Direction, EnsmMode, TimingProfile};
//!
//! let budget = turnaround_budget(
//!     EnsmMode::LoControl,
//!     Direction::RxToTx,
//!     &ClockConfig::default(),
//!     &TimingProfile::default(),
//! )
//! .unwrap();
//! assert_eq!(budget.total().exact_ns(), Some(640));
//! ```

pub mod ensm;
pub mod mac;
pub mod rf;
pub mod sim;
pub mod spi;
pub mod time;

pub use ensm::{ClockConfig, Direction, EnsmMode, TimingProfile, TurnaroundBudget};
pub use rf::{Band, RfModelParams};
pub use time::{TimeSpan, Timestamp};
