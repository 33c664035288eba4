//! Cycle-accurate model of a CDMA-coded shared bus.
//!
//! * [`codebook`] builds spreading-code families (LFSR windows, Walsh rows)
//!   and checks their orthogonality.
//! * [`codec`] spreads `S`-bit groups into per-chip sums and despreads them.
//! * [`channel`] superposes concurrent senders on the summing medium.
//! * [`bus_interface`] wraps memory-mapped masters and slaves so that only
//!   address and data lines are coded.
//! * [`simulator`] drives generated traffic through the coded wrappers and an
//!   uncoded reference, producing metrics and a per-cycle trace.
//! * [`cli`] implements the `cdma-bus` command line.

pub mod bus_interface;
pub mod channel;
pub mod cli;
pub mod codebook;
pub mod codec;
pub mod simulator;

pub use bus_interface::{BusTransaction, PortSignals, SlaveModel, TransactionKind};
pub use channel::{ChannelConfig, ChannelFrame};
pub use codebook::{CodeBook, CodeKind, LfsrConfig, LfsrState, SpreadingCode, ValidationReport};
pub use codec::{bus_width, SumFrame, WordFrame};
pub use simulator::{run_scenario, simulate, ScenarioConfig, SimMetrics, SimOutcome, SimReport};
