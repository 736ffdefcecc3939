//! Prompt assembly from the shipped template files. Templates are embedded
//! verbatim; rendering only substitutes the placeholder sites.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{Component, Formulation, PartialFormulation};

use super::payload::{component_to_py, formalization_to_py};
use super::pyliteral::{to_python_pretty, DictEntry, PyValue};
use super::Phase;

pub const HEADER: &str = include_str!("../../templates/header.txt");
pub const PARAMETERS: &str = include_str!("../../templates/parameters.txt");
pub const VARIABLES: &str = include_str!("../../templates/variables.txt");
pub const OBJECTIVE: &str = include_str!("../../templates/objective.txt");
pub const EQUALITIES: &str = include_str!("../../templates/equalities.txt");
pub const INEQUALITIES: &str = include_str!("../../templates/inequalities.txt");
pub const RANK: &str = include_str!("../../templates/rank.txt");
pub const GROUP: &str = include_str!("../../templates/group.txt");
pub const COMPARE: &str = include_str!("../../templates/compare.txt");

pub const DESCRIPTION_SITE: &str = "###PROBLEM DESCRIPTION###";
/// The header's literal dict line, replaced by the current formulation.
pub const FORMALIZATION_SITE: &str =
    r#"formalization_dict = {"parameters": {}, "decision_variables2: {}, "objective": {}, "equality_constraints": {}, "inequality_constraints": {}}"#;
pub const NOUN_SITE: &str = "#VARIABLE#";
pub const SOLUTIONS_SITE: &str = "solutions = {}";
pub const BASELINE_SITE: &str = "baseline = {}";

pub fn template(phase: Phase) -> &'static str {
    match phase {
        Phase::Parameters => PARAMETERS,
        Phase::Variables => VARIABLES,
        Phase::Objective => OBJECTIVE,
        Phase::Equalities => EQUALITIES,
        Phase::Inequalities => INEQUALITIES,
        Phase::Rank => RANK,
        Phase::Group => GROUP,
        Phase::Compare => COMPARE,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePrompt {
    pub phase: Phase,
    pub text: String,
}

impl StagePrompt {
    pub fn sha256(&self) -> String {
        prompt_sha256(&self.text)
    }
}

pub fn prompt_sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn is_blank(p: &PartialFormulation) -> bool {
    p.depth() == 0 && p.parameters.is_empty() && p.variables.is_empty()
}

pub fn render_formalization(p: &PartialFormulation) -> String {
    format!("formalization_dict = {}", to_python_pretty(&formalization_to_py(p), 2))
}

fn header(description: &str, partial: &PartialFormulation) -> String {
    let h = HEADER.trim_end().replace(DESCRIPTION_SITE, description.trim());
    if is_blank(partial) {
        h
    } else {
        h.replace(FORMALIZATION_SITE, &render_formalization(partial))
    }
}

fn join(header: String, body: &str) -> String {
    format!("{header}\n\n{}\n", body.trim_end())
}

/// Generation prompt for one phase. For `Variables` the partial carries the
/// chosen parameters at depth 0.
pub fn generation_prompt(phase: Phase, description: &str, partial: &PartialFormulation) -> StagePrompt {
    debug_assert!(phase.is_generation());
    StagePrompt { phase, text: join(header(description, partial), template(phase)) }
}

/// `solutions = {"solution_1": ..., ...}`.
pub fn render_solutions(candidates: &[Component]) -> String {
    let dict = PyValue::Dict(
        candidates.iter().enumerate().map(|(i, c)| DictEntry::new(PyValue::str(format!("solution_{}", i + 1)), component_to_py(c))).collect(),
    );
    format!("solutions = {}", to_python_pretty(&dict, 2))
}

/// What the ranking prompt calls the options at each level.
pub fn stage_noun(stage: u8) -> &'static str {
    match stage {
        1 => "decision variables",
        2 => "objective",
        3 => "equality constraints",
        _ => "inequality constraints",
    }
}

pub fn rank_prompt(stage: u8, description: &str, partial: &PartialFormulation, candidates: &[Component]) -> StagePrompt {
    let body = RANK.replace(NOUN_SITE, stage_noun(stage)).replace(SOLUTIONS_SITE, &render_solutions(candidates));
    StagePrompt { phase: Phase::Rank, text: join(header(description, partial), &body) }
}

pub fn group_prompt(description: &str, candidates: &[Component]) -> StagePrompt {
    let body = GROUP.replace(SOLUTIONS_SITE, &render_solutions(candidates));
    StagePrompt { phase: Phase::Group, text: join(header(description, &PartialFormulation::root()), &body) }
}

/// The candidate sits in the header's formalization slot; the baseline
/// fills the template's `baseline = {}` site.
pub fn compare_prompt(description: &str, candidate: &Formulation, baseline: &Formulation) -> StagePrompt {
    let baseline_text = format!("baseline = {}", to_python_pretty(&formalization_to_py(&baseline.clone().into()), 2));
    let body = COMPARE.replace(BASELINE_SITE, &baseline_text);
    StagePrompt { phase: Phase::Compare, text: join(header(description, &candidate.clone().into()), &body) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintKind, ConstraintSet, DecisionVariableDecl, ObjectiveSpec, ParamValue, ParameterTable, Sense, VarKind};

    fn partial() -> PartialFormulation {
        let mut params = ParameterTable::new();
        params.insert("profit", ParamValue::List(vec![3.0, 2.0]), "profit per unit");
        let vars = vec![DecisionVariableDecl::new("x", VarKind::Continuous).indexed("for i in range(2)")];
        let mut p = PartialFormulation::root();
        p.push(Component::Variables { parameters: params, variables: vars }).unwrap();
        p
    }

    #[test]
    fn templates_carry_reference_phrases() {
        let root = PartialFormulation::root();
        let t = generation_prompt(Phase::Parameters, "Maximize profit.", &root).text;
        assert!(t.contains("assigning constants to descriptive variable names"));
        assert!(t.starts_with("I have a problem in operational research:\n\n------\n\nMaximize profit.\n\n------"));
        assert!(t.contains(FORMALIZATION_SITE));
        let t = generation_prompt(Phase::Inequalities, "d", &partial()).text;
        assert!(t.contains("Think carefully of inequality constraints that are not explicit"));
        assert!(!t.contains(FORMALIZATION_SITE));
        assert!(t.contains("# profit per unit\n"));
    }

    #[test]
    fn substitution_only_touches_sites() {
        // Removing the substituted text must give back the template.
        let p = partial();
        let t = generation_prompt(Phase::Objective, "D", &p).text;
        let rendered = render_formalization(&p);
        let restored = t.replacen(&rendered, FORMALIZATION_SITE, 1).replacen("D", DESCRIPTION_SITE, 1);
        assert_eq!(restored, format!("{}\n\n{}", HEADER.trim_end(), OBJECTIVE));
    }

    #[test]
    fn rank_prompt_lists_candidates() {
        let cands = [
            Component::Objective(ObjectiveSpec::new(Sense::Max, "3*x[0] + 2*x[1]")),
            Component::Objective(ObjectiveSpec::new(Sense::Max, "sum(profit[i]*x[i] for i in range(2))")),
            Component::Objective(ObjectiveSpec::new(Sense::Min, "x[0]")),
        ];
        let t = rank_prompt(2, "d", &partial(), &cands).text;
        assert!(t.contains("rank = {"));
        assert!(t.contains("selecting the optimal objective from"));
        for k in 1..=3 {
            assert!(t.contains(&format!("\"solution_{k}\": {{")), "{t}");
        }
        assert!(!t.contains(NOUN_SITE) && !t.contains(SOLUTIONS_SITE));
    }

    #[test]
    fn compare_prompt_holds_both() {
        let mut p = partial();
        p.push(Component::Objective(ObjectiveSpec::new(Sense::Max, "x[0]"))).unwrap();
        p.push(Component::Equalities(ConstraintSet::empty(ConstraintKind::Equality))).unwrap();
        p.push(Component::Inequalities(ConstraintSet::from_pairs(ConstraintKind::Inequality, [("cap", "x[0] <= 4")]))).unwrap();
        let f = p.to_formulation().unwrap();
        let t = compare_prompt("d", &f, &f).text;
        assert!(t.contains("baseline = {\n"));
        assert!(t.contains("None: None"));
        assert_eq!(t.matches("\"cap\": \"x[0] <= 4\"").count(), 2);
    }
}
