//! Betting coherence for small probability assignments.
//!
//! Two bet structures are covered: a pair of mutually exclusive events with
//! their disjunction, and a conditional bet alongside its conditioning event
//! and the conjunction. For each structure the module validates the
//! probability rules, constructs an explicit book of payoffs with uniformly
//! negative gains whenever a rule is broken, and evaluates the expected-gain
//! identity that vanishes exactly when the rules hold. A separate check
//! compares a probability vector against declared possibility judgments.
//!
//! Conventions: a stake `x` on an event priced at `p` gains `x(1 - p)` when
//! the event occurs and `-xp` when it does not; a conditional bet is called
//! off (gain zero) when the conditioning event fails. Gain matrices are
//! indexed row by world and column by bet.

use serde::{Deserialize, Serialize};

/// Probability residuals larger than this count as a broken rule.
pub const RULE_TOLERANCE: f64 = 1e-12;
/// Probabilities this close to 0 or 1 are treated as certainty judgments in
/// the strong-consistency check.
pub const CERTAINTY_TOLERANCE: f64 = 1e-15;

/// Probabilities for two mutually exclusive events and their disjunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusivePairAssignment {
    pub p_e: f64,
    pub p_f: f64,
    pub p_e_or_f: f64,
}

/// Probabilities for a conditioning event, a conjunction, and the
/// corresponding conditional bet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalAssignment {
    pub p_f: f64,
    pub p_e_and_f: f64,
    pub p_e_given_f: f64,
}

/// Payoffs and the per-world gains they produce under a gain matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetBook {
    pub payoffs: [f64; 3],
    pub gains: [f64; 3],
}

/// Per-outcome possibility judgments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PossibilityDeclaration {
    pub possible: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleViolation {
    #[serde(rename = "NONNEG")]
    NonNegativity,
    #[serde(rename = "CERTAINTY")]
    Certainty,
    #[serde(rename = "ADDITIVITY")]
    Additivity,
    #[serde(rename = "BAYES")]
    Bayes,
    #[serde(rename = "NORMALIZATION")]
    Normalization,
}

impl std::fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            RuleViolation::NonNegativity => "NONNEG",
            RuleViolation::Certainty => "CERTAINTY",
            RuleViolation::Additivity => "ADDITIVITY",
            RuleViolation::Bayes => "BAYES",
            RuleViolation::Normalization => "NORMALIZATION",
        };
        f.write_str(name)
    }
}

/// Gain matrix for the exclusive-pair structure. Worlds: only E occurs,
/// only F occurs, neither occurs. Bets: E, F, E-or-F.
pub fn gain_matrix_exclusive(a: &ExclusivePairAssignment) -> [[f64; 3]; 3] {
    [
        [1.0 - a.p_e, -a.p_f, 1.0 - a.p_e_or_f],
        [-a.p_e, 1.0 - a.p_f, 1.0 - a.p_e_or_f],
        [-a.p_e, -a.p_f, -a.p_e_or_f],
    ]
}

/// Gain matrix for the conditional structure. Worlds: F fails, F occurs
/// without E, both occur. Bets: F, E-and-F, E-given-F (called off in the
/// first world).
pub fn gain_matrix_conditional(a: &ConditionalAssignment) -> [[f64; 3]; 3] {
    [
        [-a.p_f, -a.p_e_and_f, 0.0],
        [1.0 - a.p_f, -a.p_e_and_f, -a.p_e_given_f],
        [1.0 - a.p_f, 1.0 - a.p_e_and_f, 1.0 - a.p_e_given_f],
    ]
}

pub fn determinant3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn out_of_range(p: f64) -> bool {
    !(-CERTAINTY_TOLERANCE..=1.0 + CERTAINTY_TOLERANCE).contains(&p)
}

/// Checks the probability rules for an exclusive pair. When `exhaustive` is
/// set the disjunction is taken to cover all possibilities, so its
/// probability must be 1.
pub fn validate_exclusive(a: &ExclusivePairAssignment, exhaustive: bool) -> Vec<RuleViolation> {
    let mut violations = Vec::new();
    if [a.p_e, a.p_f, a.p_e_or_f].iter().any(|&p| out_of_range(p)) {
        violations.push(RuleViolation::NonNegativity);
    }
    if (a.p_e + a.p_f - a.p_e_or_f).abs() > RULE_TOLERANCE {
        violations.push(RuleViolation::Additivity);
    }
    if exhaustive && (a.p_e_or_f - 1.0).abs() > RULE_TOLERANCE {
        violations.push(RuleViolation::Normalization);
    }
    violations
}

/// Checks the probability rules for a conditional-bet assignment.
pub fn validate_conditional(a: &ConditionalAssignment) -> Vec<RuleViolation> {
    let mut violations = Vec::new();
    if [a.p_f, a.p_e_and_f, a.p_e_given_f]
        .iter()
        .any(|&p| out_of_range(p))
    {
        violations.push(RuleViolation::NonNegativity);
    }
    if (a.p_e_and_f - a.p_e_given_f * a.p_f).abs() > RULE_TOLERANCE {
        violations.push(RuleViolation::Bayes);
    }
    violations
}

fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let mut a = *m;
    let mut b = *rhs;
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() <= 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let lead = a[col];
        for row in (col + 1)..3 {
            let f = a[row][col] / lead[col];
            for (entry, l) in a[row][col..].iter_mut().zip(&lead[col..]) {
                *entry -= f * l;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut acc = b[col];
        for k in (col + 1)..3 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

fn book_from_matrix(g: &[[f64; 3]; 3]) -> Option<BetBook> {
    if determinant3(g).abs() <= RULE_TOLERANCE {
        return None;
    }
    let payoffs = solve3(g, &[-1.0, -1.0, -1.0])?;
    let gains = apply3(g, &payoffs);
    Some(BetBook { payoffs, gains })
}

fn apply3(g: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (row, gr) in g.iter().enumerate() {
        out[row] = gr.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    out
}

/// Payoffs with uniformly negative gains against an additivity-violating
/// exclusive-pair assignment, or `None` when additivity holds.
pub fn dutch_book_exclusive(a: &ExclusivePairAssignment) -> Option<BetBook> {
    book_from_matrix(&gain_matrix_exclusive(a))
}

/// Payoffs with uniformly negative gains against an assignment violating
/// the product rule for conditional bets, or `None` when it holds. The
/// decision is made on the numeric determinant of the gain matrix.
pub fn dutch_book_conditional(a: &ConditionalAssignment) -> Option<BetBook> {
    book_from_matrix(&gain_matrix_conditional(a))
}

fn weighted_gain(weights: &[f64; 3], g: &[[f64; 3]; 3], payoffs: &[f64; 3]) -> f64 {
    let gains = apply3(g, payoffs);
    weights.iter().zip(&gains).map(|(w, x)| w * x).sum()
}

/// Expected gain of the three exclusive-pair bets under the assignment's own
/// probabilities. Zero (to rounding) exactly when additivity holds; equals
/// `(p_e_or_f - p_e - p_f) * (p_e*x_e + p_f*x_f - (1 - p_e_or_f)*x_e_or_f)`
/// in general.
pub fn kemeny_expected_gain_exclusive(a: &ExclusivePairAssignment, payoffs: &[f64; 3]) -> f64 {
    let weights = [a.p_e, a.p_f, 1.0 - a.p_e_or_f];
    weighted_gain(&weights, &gain_matrix_exclusive(a), payoffs)
}

/// Expected gain of the three conditional-structure bets. Zero (to rounding)
/// exactly when the product rule holds; equals
/// `(p_e_and_f - p_e_given_f*p_f) * ((1-p_f)*x_f + (1-p_e_given_f)*x_e_given_f - p_e_and_f*x_e_and_f)`
/// in general.
pub fn kemeny_expected_gain_conditional(a: &ConditionalAssignment, payoffs: &[f64; 3]) -> f64 {
    let weights = [1.0 - a.p_f, (1.0 - a.p_e_given_f) * a.p_f, a.p_e_and_f];
    weighted_gain(&weights, &gain_matrix_conditional(a), payoffs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsistencyViolation {
    /// Zero probability assigned to an outcome declared possible.
    ZeroProbabilityDeclaredPossible { outcome: usize },
    /// Probability one assigned while an alternative is declared possible.
    CertaintyDespitePossibleAlternative { outcome: usize, alternative: usize },
    /// Positive probability assigned to an outcome declared impossible.
    PositiveProbabilityDeclaredImpossible { outcome: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrongConsistencyReport {
    pub strongly_consistent: bool,
    pub violations: Vec<ConsistencyViolation>,
}

/// Compares a probability vector with declared possibility judgments. The
/// verdict holds exactly when zero probability coincides with declared
/// impossibility outcome by outcome; certainty flags are reported alongside.
pub fn check_strong_consistency(
    probs: &[f64],
    declared: &PossibilityDeclaration,
) -> StrongConsistencyReport {
    assert_eq!(
        probs.len(),
        declared.possible.len(),
        "probability and possibility lengths differ"
    );
    assert!(
        declared.possible.iter().any(|&p| p),
        "at least one outcome must be possible"
    );
    let mut violations = Vec::new();
    for (i, (&p, &poss)) in probs.iter().zip(&declared.possible).enumerate() {
        if p <= CERTAINTY_TOLERANCE && poss {
            violations.push(ConsistencyViolation::ZeroProbabilityDeclaredPossible { outcome: i });
        }
        if p > CERTAINTY_TOLERANCE && !poss {
            violations.push(ConsistencyViolation::PositiveProbabilityDeclaredImpossible {
                outcome: i,
            });
        }
        if p >= 1.0 - CERTAINTY_TOLERANCE {
            if let Some(alt) = declared
                .possible
                .iter()
                .enumerate()
                .position(|(j, &pj)| j != i && pj)
            {
                violations.push(ConsistencyViolation::CertaintyDespitePossibleAlternative {
                    outcome: i,
                    alternative: alt,
                });
            }
        }
    }
    let strongly_consistent = probs
        .iter()
        .zip(&declared.possible)
        .all(|(&p, &poss)| (p <= CERTAINTY_TOLERANCE) == !poss);
    StrongConsistencyReport {
        strongly_consistent,
        violations,
    }
}
