//! Synthesis of choreographies (global types) from systems of local session
//! types, with well-formedness, projection, an executable asynchronous
//! semantics and property suites for the metatheory.

pub mod ast;
pub mod generate;
pub mod linearity;
pub mod parser;
pub mod projection;
pub mod semantics;
pub mod split;
pub mod synthesis;
pub mod verify;
pub mod wellformed;

pub use ast::{
    global_eq, global_eq_unfold, local_eq, norm_global, norm_local, validate_system, Behaviour,
    Branch, Channel, GlobalType, Participant, RecVar, Sort, System,
};
pub use linearity::ChannelEnv;
pub use parser::{
    parse_global, parse_system, print_behaviour, print_global, print_system, ParseError, SourceSpan,
};
pub use synthesis::{synth_program, synth_runtime, SynthError, SynthOptions};
