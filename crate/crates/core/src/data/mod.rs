//! Schema, panel I/O, forward-window labeling and the train/test split.

mod labels;
mod panel;
mod schema;
mod split;

pub use labels::{
    assign_labels, load_campaigns, load_snapshots, read_campaigns, year_end_snapshots,
    CampaignEvent, LabelingOutcome, SnapshotDates,
};
pub use panel::{load_panel, read_panel, write_panel, write_panel_to, Instance, Panel, RowKey};
pub use schema::{Category, FeatureKind, FeatureSchema, FeatureSpec, KEY_COLUMNS, LABEL_COLUMN};
pub use split::{stratified_split, Split};
