use std::process::ExitCode;

use anyhow::{Context, Result};
use houp_core::oracle::{verify_paper, MomentRule};

use crate::args::VerifyArgs;

pub fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let rule = if args.swap_third_moments {
        MomentRule::SwappedThirdOrder
    } else {
        MomentRule::Dirichlet
    };
    let report = verify_paper(rule)?;
    report.write_text(std::io::stdout().lock(), args.verbose)?;
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&report.to_json())?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
