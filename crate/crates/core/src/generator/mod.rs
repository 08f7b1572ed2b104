//! Candidate-program sources: the grammar sampler (default) and a remote
//! chat-completions generator whose raw text goes through code extraction.

mod extract;
mod grammar;
mod prompt;
mod remote;
mod schedule;

pub use extract::{extract_completion, extract_program, NoFunctionExtracted};
pub use grammar::{
    GeneratorPolicy, GrammarError, Nonterminal, Production, DEFAULT_MAX_DEPTH, LITERALS, TERMINAL_PRIOR,
};
pub use prompt::PromptTemplate;
pub use remote::{remote_generate, RemoteBatch, RemoteConfig, RemoteError};
pub use schedule::{temperature, Temperature};
