use std::fmt::Write;

use rerand::sim::output::STUDY_FILES;

pub const ALLOCATE_FILES: &[(&str, &str)] = &[
    ("allocation.csv", "unit_index,assignment"),
    ("balance.csv", "covariate,smd_first_draw,smd_final"),
    (
        "report.json",
        "scheme,n,d,n_treated,n_control,rank,k,gamma,p_a,lambda,threshold,dof,shrinkage_coefficient,\
         criterion_value,draws_attempted,accepted,degenerate,degenerate_columns,seed,max_draws,near_equal",
    ),
];

pub const DIAGNOSE_FILES: &[(&str, &str)] = &[
    ("spectrum.csv", "component_index,sigma,explained,cumulative_explained"),
    ("components.csv", "component_index,sigma,shrinkage"),
    ("prv.csv", "covariate_index,name,prv"),
    ("shrinkage_by_k.csv", "k,a_k,v_ak,v_a,reduction_percent"),
    ("shrinkage_grid.csv", "n,d,rho,k,v_ak,v_a,reduction_percent (synthetic input only)"),
    ("diagnose.json", "scheme,n,d,rank,k,gamma,p_a,lambda,threshold,shrinkage_coefficient,v_a,seed"),
];

pub fn text() -> String {
    let mut s = String::new();
    for (cmd, files) in [("allocate", ALLOCATE_FILES), ("diagnose", DIAGNOSE_FILES), ("simulate", STUDY_FILES)] {
        writeln!(s, "[{cmd}]").unwrap();
        for (name, cols) in files {
            writeln!(s, "  {name}: {cols}").unwrap();
        }
    }
    s
}
