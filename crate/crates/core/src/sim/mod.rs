//! Density-matrix simulation of noisy circuits, their uncomputation blocks and dual processes.

pub mod channel;
pub mod circuit;
pub mod gate;
pub(crate) mod kernel;
pub mod noise;
pub mod state;

pub use channel::{Channel, ChannelOp};
pub use circuit::{build_ansatz, Circuit, Op};
pub use gate::{cswap, Gate, GateKind};
pub use noise::{attach_noise, NoiseModel, NoiseSpec};
pub use state::{trace_distance, trace_product, trace_with_pauli, DensityMatrix, MAX_QUBITS};
