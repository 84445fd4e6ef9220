//! Margin checkers for the inequalities behind concavity of the entropy.
//!
//! Every checker returns a [`MarginReport`] whose margins are oriented so that a
//! nonnegative value means the inequality holds at that index.

mod ladder;
mod lemma;
mod margin;
mod quadratic;
mod uk;

pub use ladder::{
    check_c1, check_c1_product_identity, check_c1bar, check_condition4, check_corollary_fgh,
    check_corollary_identity, check_log_concavity, check_two_fold_forms,
    check_two_fold_log_concavity, condition4_gap, log_concavity_defect, two_fold_cubic,
    two_fold_d_form,
};
pub(crate) use ladder::{condition4_from, corollary_from};
pub use lemma::{
    check_functional_lemma, validate_generator, validate_inputs, xi_second, Generator,
    LemmaInputs, LemmaOptions, LemmaReport, XLogX,
};
pub use margin::{MarginReport, Tolerance};
pub use quadratic::{
    check_cij_nonpositive, check_monotone_worst_case, check_quadratic_decomposition_n2,
    compute_cij, QuadraticDecomposition, SIGN_ENUMERATION_LIMIT,
};
pub(crate) use uk::uk_from;
pub use uk::{compute_uk, entropy_uk_bound, TransformTerms, UkBound, UkBranch, UkDecomposition, UkEntry};
