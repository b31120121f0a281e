use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Governance,
    Ownership,
    Technical,
    Return,
    Valuation,
    Operation,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Governance,
        Category::Ownership,
        Category::Technical,
        Category::Return,
        Category::Valuation,
        Category::Operation,
    ];

    /// Valuation and operation ratios are compared against industry peers.
    pub fn is_peer_relative(self) -> bool {
        matches!(self, Category::Valuation | Category::Operation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Governance => "governance",
            Category::Ownership => "ownership",
            Category::Technical => "technical",
            Category::Return => "return",
            Category::Valuation => "valuation",
            Category::Operation => "operation",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub category: Category,
    pub percentile_transformed: bool,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    /// The percentile flag follows from the category.
    pub fn new(name: impl Into<String>, category: Category, kind: FeatureKind) -> Self {
        FeatureSpec {
            name: name.into(),
            category,
            percentile_transformed: category.is_peer_relative(),
            kind,
        }
    }

    pub fn continuous(name: impl Into<String>, category: Category) -> Self {
        Self::new(name, category, FeatureKind::Continuous)
    }

    pub fn binary(name: impl Into<String>, category: Category) -> Self {
        Self::new(name, category, FeatureKind::Binary)
    }
}

/// Ordered feature catalog. Column order in every panel and matrix follows it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

const CANONICAL: &[(&str, Category, FeatureKind)] = {
    use Category::*;
    use FeatureKind::*;
    &[
        ("dual_class_voting", Governance, Binary),
        ("ceo_tenure", Governance, Continuous),
        ("ceo_female", Governance, Binary),
        ("board_size", Governance, Continuous),
        ("classified_board", Governance, Binary),
        ("poison_pill", Governance, Binary),
        ("buyback_yield", Governance, Continuous),
        ("dividend_payout_ratio", Governance, Continuous),
        ("fcf_to_executive_compensation", Governance, Continuous),
        ("fcf_to_board_compensation", Governance, Continuous),
        ("free_float_pct", Ownership, Continuous),
        ("institutional_ownership_pct", Ownership, Continuous),
        ("insider_ownership_pct", Ownership, Continuous),
        ("volume_30d_to_shares_outstanding", Technical, Continuous),
        ("rsi_14d", Technical, Continuous),
        ("rsi_30d", Technical, Continuous),
        ("volatility_30d", Technical, Continuous),
        ("volatility_90d", Technical, Continuous),
        ("volatility_180d", Technical, Continuous),
        ("total_return_5y", Return, Continuous),
        ("total_return_4y", Return, Continuous),
        ("total_return_3y", Return, Continuous),
        ("total_return_2y", Return, Continuous),
        ("total_return_1y", Return, Continuous),
        ("total_return_6m", Return, Continuous),
        ("total_return_3m", Return, Continuous),
        ("roe", Valuation, Continuous),
        ("roic", Valuation, Continuous),
        ("assets_to_equity", Valuation, Continuous),
        ("eps", Valuation, Continuous),
        ("pe_ratio", Valuation, Continuous),
        ("ev_to_sales", Valuation, Continuous),
        ("tobins_q", Valuation, Continuous),
        ("pb_ratio", Valuation, Continuous),
        ("ev_to_ebitda", Valuation, Continuous),
        ("ev_to_assets", Valuation, Continuous),
        ("fcf_to_capex", Operation, Continuous),
        ("current_ratio", Operation, Continuous),
        ("ebitda_margin", Operation, Continuous),
        ("sales_to_assets", Operation, Continuous),
        ("employee_growth", Operation, Continuous),
        ("fcf_yield", Operation, Continuous),
        ("sales_growth", Operation, Continuous),
        ("interest_coverage", Operation, Continuous),
        ("cash_conversion_cycle", Operation, Continuous),
        ("net_debt_to_ebitda", Operation, Continuous),
    ]
};

/// Columns every panel file carries ahead of the features.
pub const KEY_COLUMNS: [&str; 4] = ["company_id", "year", "industry_l2", "industry_l3"];
pub const LABEL_COLUMN: &str = "label";

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(Error::Schema("empty feature name".into()));
            }
            if KEY_COLUMNS.contains(&f.name.as_str()) || f.name == LABEL_COLUMN {
                return Err(Error::Schema(format!(
                    "feature name `{}` collides with a key column",
                    f.name
                )));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if f.percentile_transformed != f.category.is_peer_relative() {
                return Err(Error::Schema(format!(
                    "feature `{}`: percentile flag must match category {}",
                    f.name, f.category
                )));
            }
        }
        Ok(FeatureSchema { features })
    }

    /// The 46-variable catalog: 10 governance, 3 ownership, 6 technical,
    /// 7 return, 10 valuation, 10 operation.
    pub fn canonical() -> Self {
        let features = CANONICAL
            .iter()
            .map(|&(name, cat, kind)| FeatureSpec::new(name, cat, kind))
            .collect();
        FeatureSchema { features }
    }

    /// Continuous features named `x0..x{n-1}` in one category; handy for
    /// small numeric experiments.
    pub fn generic(n: usize, category: Category) -> Self {
        let features = (0..n)
            .map(|i| FeatureSpec::continuous(format!("x{i}"), category))
            .collect();
        FeatureSchema { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &FeatureSpec {
        &self.features[i]
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn indices_in(&self, category: Category) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.category == category)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn category_counts(&self) -> [usize; 6] {
        let mut counts = [0; 6];
        for f in &self.features {
            let k = Category::ALL.iter().position(|c| *c == f.category).unwrap();
            counts[k] += 1;
        }
        counts
    }
}
