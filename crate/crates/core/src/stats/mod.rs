//! Association of variables with tree segments and trajectories.

mod association;
mod regression;
pub mod special;

pub use association::{
    anova_association, benjamini_hochberg, chi2_association, AssociationResult, AssociationTest, DeviationSign,
    SegmentEffect,
};
pub use regression::{
    kernel_bandwidth, regress_on_pseudotime, screen_trajectory_associations, RegressionFit, RegressionKind,
    ScreenResult, GRID_POINTS, MIN_TRAJECTORY_POINTS,
};
