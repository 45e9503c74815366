//! Built-in role schemas for the census-income and mortgage datasets.
//!
//! Adult (UCI census income): race is binarised White (s2) vs every other
//! recorded race (s1); the outcome is `income` with `>50K` positive.
//!
//! HMDA (Washington State home loans): the presets expect the public column
//! names of the 2016 state extract plus a binary `loan_status` column
//! (`Accepted`/`Rejected`) derived from the action taken on the application.

use super::{ColumnSpec, LevelSet, RoleSchema};

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub schema: RoleSchema,
    /// Default sub-group thresholds on the individual direct effect.
    pub thresholds: Vec<f64>,
}

pub const NAMES: [&str; 3] = ["adult", "hdma-white", "hdma-asian"];

pub fn by_name(name: &str) -> Option<Preset> {
    match name {
        "adult" => Some(adult()),
        "hdma-white" => Some(hdma_white()),
        "hdma-asian" => Some(hdma_asian()),
        _ => None,
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn categorical(name: &str) -> ColumnSpec {
    ColumnSpec::categorical(name, &[])
}

pub fn adult() -> Preset {
    Preset {
        name: "adult",
        schema: RoleSchema {
            sensitive: "race".into(),
            // every recorded race other than White
            s1_levels: LevelSet::Listed(strings(&["Amer-Indian-Eskimo", "Asian-Pac-Islander", "Black", "Other"])),
            outcome: "income".into(),
            positive_level: Some(">50K".into()),
            confounders: strings(&["age", "sex", "marital_status"]),
            mediators: strings(&[
                "education",
                "workclass",
                "occupation",
                "capital_gain",
                "capital_loss",
                "hours_per_week",
            ]),
            columns: vec![
                ColumnSpec::continuous("age"),
                categorical("sex"),
                categorical("marital_status"),
                categorical("education"),
                categorical("workclass"),
                categorical("occupation"),
                ColumnSpec::continuous("capital_gain"),
                ColumnSpec::continuous("capital_loss"),
                ColumnSpec::continuous("hours_per_week"),
                categorical("race"),
                categorical("income"),
            ],
        },
        thresholds: vec![-0.01, 0.01, 0.05],
    }
}

fn hdma(s1_levels: LevelSet, name: &'static str) -> Preset {
    Preset {
        name,
        schema: RoleSchema {
            sensitive: "applicant_race_name_1".into(),
            s1_levels,
            outcome: "loan_status".into(),
            positive_level: Some("Accepted".into()),
            confounders: strings(&[
                "property_type_name",
                "owner_occupancy_name",
                "applicant_sex_name",
                "loan_type_name",
            ]),
            mediators: strings(&["loan_amount_000s", "applicant_income_000s"]),
            columns: vec![
                categorical("applicant_race_name_1"),
                categorical("loan_status"),
                categorical("property_type_name"),
                categorical("owner_occupancy_name"),
                categorical("applicant_sex_name"),
                categorical("loan_type_name"),
                ColumnSpec::continuous("loan_amount_000s"),
                ColumnSpec::continuous("applicant_income_000s"),
            ],
        },
        thresholds: vec![-0.005, 0.025, 0.07],
    }
}

/// s1 = every race except White, s2 = White.
pub fn hdma_white() -> Preset {
    hdma(
        LevelSet::AllExcept {
            all_except: strings(&["White"]),
        },
        "hdma-white",
    )
}

/// s1 = Asian, s2 = every other race.
pub fn hdma_asian() -> Preset {
    hdma(LevelSet::Listed(strings(&["Asian"])), "hdma-asian")
}
