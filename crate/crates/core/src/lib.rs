//! Non-uniform constellation design for the peak- and average-power
//! constrained complex AWGN channel, Huffman shaping with a one-bit padding
//! terminator, MAP demodulation with single-symbol length correction, and a
//! Monte Carlo link simulator with an uncoded 128-QAM reference.

pub mod channel;
pub mod constellation;
pub mod dacp;
pub mod demod;
pub mod error;
pub mod fixtures;
pub mod framing;
pub mod io;
pub mod qam;
pub mod shaping;
pub mod sim;

pub use channel::{add_noise, log_bessel_i0, rician_log_density, ChannelParams, ComplexSample};
pub use constellation::{
    allocate_points, build_constellation, rotate_rings, Constellation, ConstellationPoint, Ring,
};
pub use dacp::{
    design_dacp, design_dacp_with, lp_max_min, AmplitudeChannel, AmplitudeGrid, Cut, DacpDesign,
    DacpDistribution, DesignObjective, DesignTrace, Quadrature,
};
pub use demod::{
    candidate_set, last_symbol_fallback, length_correct, map_demod, Correction, CorrectionOutcome,
    DemodResult, Receiver,
};
pub use error::{Error, Result};
pub use framing::{
    eb_n0, estimate_p_indel, frame_rate, select_ns, FramePlan, IndelEstimate, NsSelection,
};
pub use qam::{qam_demodulate, qam_modulate, QamGrid};
pub use shaping::{
    assign_gray, build_code, depad, modulate, symbols_to_bits, Bits, PaddedFrame, ShapingCode,
};
pub use sim::{
    run_frame, run_sweep, tune_a, FrameSizing, Scheme, SimRecord, SnrAxis, StopRule, SweepConfig,
    TuneResult,
};
