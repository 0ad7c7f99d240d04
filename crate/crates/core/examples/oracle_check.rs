//! Cross-checks the three solvers against the conditional-gradient oracle
//! on a handful of random instances.

use wpcn_secrecy::fairness::{mmf_optimize_problem, plf_optimize_problem};
use wpcn_secrecy::oracle::{cg_solve, CgConfig, CgObjective, OracleReport};
use wpcn_secrecy::sstm::optimize_problem;
use wpcn_secrecy::validation::random_instance;
use wpcn_secrecy::{blind_all, draw_channels, Problem, SolverConfig};

fn main() -> wpcn_secrecy::Result<()> {
    let cfg = SolverConfig::default();
    for index in 0..5 {
        let s = random_instance(42, index);
        let ch = draw_channels(&s)?;
        let p_h = s.p_h_watts();
        let p = Problem::new(&ch, &blind_all(&ch, p_h)?, p_h)?;
        if !p.active().iter().any(|&a| a) {
            continue;
        }
        let (_, sum) = optimize_problem(&p, &cfg)?;
        let (_, min) = mmf_optimize_problem(&p, &cfg)?;
        let (_, pf) = plf_optimize_problem(&p, &cfg)?;
        let logsum = (0..p.len()).filter(|&i| p.is_active(i)).map(|i| pf.per_node[i].ln()).sum();

        print!("instance {index} (K = {}):", p.len());
        for (name, obj, value) in
            [("sum", CgObjective::Sum, sum.objective), ("min", CgObjective::Min, min.objective), ("logsum", CgObjective::LogSum, logsum)]
        {
            let oracle = cg_solve(&p, obj, &CgConfig::default())?;
            let rep = OracleReport::compare(&oracle, value, 0.0);
            print!("  {name} gap {:+.1e}", rep.objective_gap);
        }
        println!();
    }
    Ok(())
}
