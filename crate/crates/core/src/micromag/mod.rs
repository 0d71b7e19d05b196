//! Finite-difference micromagnetics for thin ferromagnetic discs.

pub mod demag;
pub mod engine;
pub mod exchange;
pub mod grid;
pub mod ovf;
pub mod relax;
pub mod state;

pub use demag::{newell_tensor, DemagConvolution, DemagTensor};
pub use engine::{EffectiveField, Energy, Engine, Excitation, FieldTerms, Waveform, DEFAULT_DT_S};
pub use exchange::exchange_field;
pub use grid::{build_disc_grid, MagGrid};
pub use ovf::{read_ovf, write_ovf, OvfData};
pub use relax::{relax, relax_vortex, RelaxOptions, RelaxReport};
pub use state::{vortex_diagnostics, Magnetization, VortexState};
