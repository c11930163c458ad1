use cavity_core::decomp::{Dims, Neighbor, NeighborTable};
use cavity_core::halo::{compute_overlap_regions, Strategy};
use cavity_core::mesh::{interior_box, Face, Side, GHOST};
use cavity_core::run::{interiors_identical, run, RunSpec};
use proptest::prelude::*;

proptest! {
    #[test]
    fn regions_partition_the_interior(
        n in prop::array::uniform3(5usize..12),
        mask in 0u8..64,
    ) {
        let mut table = NeighborTable::all_walls();
        for f in Face::ALL {
            if mask & (1 << f.id()) != 0 {
                table.0[f.id()] = Neighbor::Rank(1);
            }
        }
        let r = compute_overlap_regions(n, &table);
        let core: usize = (0..3)
            .map(|a| {
                let cut = Face::ALL.iter().filter(|f| f.axis.index() == a && !table.is_wall(**f)).count();
                n[a].saturating_sub(GHOST * cut)
            })
            .product();
        prop_assert_eq!(r.internal_count(), core);
        prop_assert_eq!(r.internal_count() + r.external_count(), n.iter().product::<usize>());

        // brute force: a node is external iff it sits within two layers of an inter-block face
        interior_box(n).for_each(|i, j, k| {
            let p = [i, j, k];
            let near = Face::ALL.iter().any(|f| {
                let a = f.axis.index();
                !table.is_wall(*f)
                    && match f.side {
                        Side::Low => p[a] < 2 * GHOST,
                        Side::High => p[a] >= n[a],
                    }
            });
            let hits = r.external.iter().filter(|b| b.contains(p)).count() + usize::from(r.internal.contains(p));
            assert_eq!(hits, 1, "node {p:?} covered {hits} times");
            assert_eq!(r.internal.contains(p), !near, "node {p:?}");
        });
    }
}

fn spec(dims: Dims, s: Strategy, overlap: bool) -> RunSpec<f64> {
    let mut spec = RunSpec::new([12, 12, 12]);
    spec.config.max_steps = 12;
    spec.dims = dims;
    spec.strategy = s;
    spec.overlap = overlap;
    spec
}

#[test]
fn overlapped_steps_are_bitwise_identical() {
    for dims in [Dims([2, 1, 1]), Dims([1, 2, 2]), Dims([2, 2, 2])] {
        for s in Strategy::ALL {
            let a = run(&spec(dims, s, false)).unwrap();
            let b = run(&spec(dims, s, true)).unwrap();
            assert!(interiors_identical(&a.fields, &b.fields), "{dims} {s}");
            assert_eq!(a.history, b.history);
            assert_eq!(a.ledger, b.ledger);
        }
    }
}
