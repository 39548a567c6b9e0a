//! Blind identification of the power-level mixture.

pub mod beta;
pub mod em;
pub mod gibbs;

pub use beta::{ars_sample, slice_sample, BetaConditional, BetaSampler};
pub use em::{fit_em_gmm, fit_em_gmm_with, EmFit, EmOptions};
pub use gibbs::{
    crp_ln_prob, effective_k_trace, init_state, modal_k, retained_components, run_gibbs, run_gibbs_state, select_snapshot, summarize,
    summarize_with, Chain, SummaryOptions, Component, GibbsOptions, GibbsState,
    HyperParams, HyperPriors, Snapshot,
};
