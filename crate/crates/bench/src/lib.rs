//! Shared fixtures for the pipeline benchmarks.

use choreo_core::generate::{random_globals, random_program, GenConfig};
use choreo_core::projection::project_system;
use choreo_core::{parse_system, synth_program, GlobalType, System};

pub const BUYER_SELLER: &str = "
    B1 = t1!<order>. p1?<price>. r?<price>. (c1!. t1!<addr> (+) c2!. no1!);
    B2 = t2!<order>. p2?<price>. r!<price>. (c2?. t2!<addr> + c1?. no2!);
    S1 = t1?<order>. p1!<price>. (t1?<addr> + no1?);
    S2 = t2?<order>. p2!<price>. (t2?<addr> + no2?);
";

pub fn buyer_seller() -> System {
    parse_system(BUYER_SELLER).expect("fixture parses")
}

/// `n` projected systems of random global types.
pub fn projected(seed: u64, n: usize) -> Vec<System> {
    random_globals(seed, n, &GenConfig::default())
        .iter()
        .filter_map(|g| project_system(g, false))
        .collect()
}

pub fn globals(seed: u64, n: usize) -> Vec<GlobalType> {
    random_globals(seed, n, &GenConfig::default())
}

/// `n` typable random programs.
pub fn typable_programs(seed: u64, n: usize) -> Vec<System> {
    (seed..)
        .map(|i| random_program(i, 5, 6))
        .filter(|s| synth_program(s).is_ok())
        .take(n)
        .collect()
}
