pub mod fixtures;
pub mod oracle;
pub mod phy_checks;
pub mod stats;
