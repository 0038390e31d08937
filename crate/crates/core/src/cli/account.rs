use anyhow::{anyhow, bail};
use serde::Serialize;

use super::format::fmt_num;
use super::AccountArgs;
use crate::accountant::{
    compose, dropout_epsilon, privacy_report, zcdp_to_dp, DropoutEpsilon, MechanismParams, PrivacyReport,
    ReportRequest,
};

#[derive(Debug, Clone, Serialize)]
pub struct AccountOutput {
    pub report: PrivacyReport,
    pub rounds: u64,
    pub rho_composed: f64,
    pub eps_dp_composed: f64,
    pub dropout: Vec<DropoutEpsilon>,
}

pub fn account(args: &AccountArgs) -> anyhow::Result<AccountOutput> {
    if args.sigma / args.gamma < 0.5 {
        bail!(
            "sigma/gamma = {} is below 1/2; the privacy bound does not apply",
            fmt_num(args.sigma / args.gamma)
        );
    }
    let c = match (args.c, args.delta2_override) {
        (Some(c), _) => c,
        (None, Some(d2)) => d2,
        (None, None) => return Err(anyhow!("missing required field `c` (or pass --delta2-override)")),
    };
    if args.rounds == 0 {
        bail!("--rounds must be at least 1");
    }
    let report = privacy_report(&ReportRequest {
        c,
        gamma: args.gamma,
        sigma: args.sigma,
        beta: args.beta,
        n: args.n,
        d: args.d,
        delta: args.delta,
        delta1: args.delta1,
        delta2_override: args.delta2_override,
    })?;
    let rho_composed = compose(report.rho, args.rounds);
    let eps_dp_composed = zcdp_to_dp(rho_composed, args.delta)?;
    let mech = MechanismParams {
        delta2: report.delta2.delta2,
        sigma: args.sigma,
        gamma: args.gamma,
        n: args.n,
        d: args.d,
    };
    let dropout = args
        .drop_fraction
        .iter()
        .map(|&f| dropout_epsilon(&mech, f))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(AccountOutput {
        report,
        rounds: args.rounds,
        rho_composed,
        eps_dp_composed,
        dropout,
    })
}

pub fn cmd_account(args: &AccountArgs) -> anyhow::Result<()> {
    let out = account(args)?;
    if args.json {
        println!("{}", serde_json::to_string(&out)?);
        return Ok(());
    }
    let r = &out.report;
    println!("delta2            {}", fmt_num(r.delta2.delta2));
    println!("delta2_branch     {:?}", r.delta2.branch);
    println!("tau               {}", fmt_num(r.tau));
    println!("eps_zcdp          {}", fmt_num(r.eps_zcdp));
    println!("eps_branch        {:?}", r.branch_used);
    println!("rho               {}", fmt_num(r.rho));
    println!("rounds            {}", out.rounds);
    println!("rho_composed      {}", fmt_num(out.rho_composed));
    println!("delta             {}", fmt_num(r.delta));
    println!("eps_dp            {}", fmt_num(r.eps_dp));
    println!("eps_dp_composed   {}", fmt_num(out.eps_dp_composed));
    for d in &out.dropout {
        println!(
            "dropout f={}  surviving={}  eps_zcdp={}  ratio={}",
            fmt_num(d.drop_fraction),
            d.surviving,
            fmt_num(d.eps),
            fmt_num(d.ratio)
        );
    }
    println!("note              {}", r.composition_note);
    Ok(())
}
