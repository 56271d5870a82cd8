pub mod deploy;
pub mod eval;
pub mod inspect;
pub mod plot;
pub mod train;

use std::path::Path;

use anyhow::Context;
use plantbridge::PolicyParams;

use crate::exit::{CmdResult, ExitCodeExt, ARTIFACT};

/// Loads a policy artifact; any defect is an artifact error.
pub fn load_policy(path: &Path) -> CmdResult<PolicyParams> {
    PolicyParams::load(path)
        .with_context(|| format!("policy {}", path.display()))
        .exit_code(ARTIFACT)
}

/// One-line result summary shared by eval and deploy.
pub fn summary_line(total: f64, steps: usize) -> String {
    // `+ 0.0` turns a negative zero into a positive one for display.
    let total = total + 0.0;
    format!(
        "return {total:.2}, mean deviation {:.2} deg over {steps} steps",
        plantbridge::return_to_mean_deviation_deg(total, steps) + 0.0
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_reproduces_reference_arithmetic() {
        assert_eq!(summary_line(-64.87, 800), "return -64.87, mean deviation 4.65 deg over 800 steps");
        assert_eq!(summary_line(-77.93, 800), "return -77.93, mean deviation 5.58 deg over 800 steps");
        assert_eq!(summary_line(-0.0, 800), "return 0.00, mean deviation 0.00 deg over 800 steps");
    }
}
