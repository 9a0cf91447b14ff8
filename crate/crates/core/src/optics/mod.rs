//! Optical elements, pair sources and the source-erasing PBS network.

mod circuit;
mod element;
mod source;

pub use circuit::{
    build_fig2_circuit, fig2_circuit, fig2_input_registry, fig2_sources, Circuit,
    CircuitDescription,
};
pub use element::{
    apply_loss, apply_pbs, apply_rotation, LossBranch, OpticalElement, Pbs, UNIT_PHASE,
};
pub use source::{
    make_squeezed_source, make_weak_pair_source, PolarizationOrder, Sign, SourceParams,
};
