use choreo_core::generate::{random_global, random_program, GenConfig};
use choreo_core::projection::project_system;
use choreo_core::{
    global_eq, parse_global, parse_system, print_global, print_system, synth_program,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_globals_parse_back(seed in any::<u64>()) {
        let g = random_global(seed, &GenConfig::default());
        let back = parse_global(&print_global(&g)).expect("printed type parses");
        prop_assert!(global_eq(&g, &back));
    }

    #[test]
    fn printed_programs_parse_back(seed in any::<u64>()) {
        let s = random_program(seed, 5, 6);
        prop_assert_eq!(parse_system(&print_system(&s)).expect("printed system parses"), s);
    }

    #[test]
    fn projections_synthesise_to_their_source(seed in any::<u64>()) {
        let g = random_global(seed, &GenConfig::default());
        let s = project_system(&g, false).expect("generated types are projectable");
        let back = synth_program(&s).expect("projections are typable");
        prop_assert!(global_eq(&g, &back), "{} vs {}", print_global(&g), print_global(&back));
    }
}
