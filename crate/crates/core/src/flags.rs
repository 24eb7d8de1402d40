use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// In-band quality signals raised by estimators and the EM loop.
///
/// Flags never abort a computation; they record that a degenerate path was
/// taken (empty block, clamped variance, ...) so callers and output files can
/// report it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// A block had no pairs; its mean was zeroed and its variance pooled.
    DegenerateBlock,
    /// A variance entry fell below the floor and was clamped.
    VarianceFloored,
    /// A mixing weight fell below the floor and was clamped.
    MixingFloored,
    /// A responsibility row had no finite weight and was set to uniform.
    UniformResponsibilityRow,
    /// An EM component lost all responsibility mass.
    EmptyComponent,
    /// The label vector collapsed into a single community.
    LabelCollapse,
    /// The discretization level was reduced to the number of distinct weights.
    DiscretizationReduced,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::DegenerateBlock => "degenerate_block",
            Flag::VarianceFloored => "variance_floored",
            Flag::MixingFloored => "mixing_floored",
            Flag::UniformResponsibilityRow => "uniform_responsibility_row",
            Flag::EmptyComponent => "empty_component",
            Flag::LabelCollapse => "label_collapse",
            Flag::DiscretizationReduced => "discretization_reduced",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered set of raised flags.
pub type Flags = BTreeSet<Flag>;
