#![allow(dead_code)]

use rbdsde::noise::{enumerate_tree, make_grid, NoiseBundle};
use rbdsde::solver::SolutionField;

pub fn tree(n: usize) -> NoiseBundle {
    enumerate_tree(&make_grid(1.0, n).unwrap()).unwrap()
}

/// `Y >= S`, `dK >= 0`, `K_0 = 0`, `K` nondecreasing and the Skorokhod sum,
/// all exact. Every field a test produces goes through here.
pub fn checked(field: SolutionField) -> SolutionField {
    let report = field.definition_report();
    assert!(report.holds(), "definition invariants violated: {report:?}");
    for p in 0..field.paths() {
        assert_eq!(field.k(0, p), 0.0);
        for i in 0..field.steps() {
            assert!(field.k(i + 1, p) >= field.k(i, p));
        }
    }
    field
}
