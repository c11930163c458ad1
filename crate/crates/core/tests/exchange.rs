use std::thread;

use cavity_core::decomp::{BlockMap, Dims};
use cavity_core::halo::{build_plan, Exchanger, Strategy};
use cavity_core::mesh::{face_ghost_box, FieldSet, Grid3, Var, GHOST};
use cavity_core::transport::{world, Transport, TransportOptions};

/// Value of `var` at global storage coordinates `g` (ghost offset included).
fn global_value(var: Var, g: [usize; 3]) -> f64 {
    (var.index() as f64) * 1e9 + (g[0] + 1000 * g[1] + 1_000_000 * g[2]) as f64 + 0.5
}

/// Affine in the global coordinates with exactly representable values.
fn linear_value(var: Var, g: [usize; 3]) -> f64 {
    let x = g.map(|c| c as f64);
    1.0 + var.index() as f64 + 0.25 * x[0] - 0.5 * x[1] + 2.0 * x[2]
}

fn blocks(map: &BlockMap<f64>, f: impl Fn(Var, [usize; 3]) -> f64) -> Vec<FieldSet<f64>> {
    (0..map.ranks())
        .map(|r| {
            let mut set = FieldSet::new(map.local_grid(r).unwrap());
            let s = map.extents[r].start;
            for var in Var::ALL {
                let n = set.grid().n();
                let field = &mut set[var];
                cavity_core::mesh::interior_box(n).for_each(|i, j, k| {
                    field.set(i, j, k, f(var, [i + s[0], j + s[1], k + s[2]]));
                });
                // stale ghosts must be overwritten
                let ext = field.extents();
                for k in 0..ext[2] {
                    for j in 0..ext[1] {
                        for i in 0..ext[0] {
                            if !cavity_core::mesh::interior_box(n).contains([i, j, k]) {
                                field.set(i, j, k, f64::NAN);
                            }
                        }
                    }
                }
            }
            set
        })
        .collect()
}

fn exchange_all(map: &BlockMap<f64>, sets: Vec<FieldSet<f64>>, s: Strategy, seed: Option<u64>) -> Vec<FieldSet<f64>> {
    let opts = TransportOptions { randomize: seed, ..TransportOptions::default() };
    let eps = world(map.ranks(), opts);
    thread::scope(|scope| {
        let hs: Vec<_> = eps
            .into_iter()
            .zip(sets)
            .map(|(mut tr, mut set)| {
                scope.spawn(move || {
                    let r = tr.rank();
                    let mut ex = Exchanger::new(build_plan(&map.extents[r], &map.tables[r], s));
                    ex.exchange(&mut set, &mut tr).unwrap();
                    // a second round exercises FIFO reuse of every tag
                    ex.exchange(&mut set, &mut tr).unwrap();
                    set
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn check(map: &BlockMap<f64>, out: &[FieldSet<f64>], s: Strategy, f: impl Fn(Var, [usize; 3]) -> f64) {
    for (r, set) in out.iter().enumerate() {
        let n = set.grid().n();
        let st = map.extents[r].start;
        for (face, _) in map.tables[r].inter_block_faces() {
            for var in Var::ALL {
                let d = s.depth(var);
                face_ghost_box(n, face, d).for_each(|i, j, k| {
                    // storage index + block start = global storage index
                    let g = [i + st[0], j + st[1], k + st[2]];
                    assert_eq!(set[var].get(i, j, k), f(var, g), "rank {r} {face} {var:?} ({i},{j},{k}) {s}");
                });
                // layers beyond the strategy depth are not refreshed
                if d < GHOST {
                    let deep = face_ghost_box(n, face, GHOST);
                    let shallow = face_ghost_box(n, face, d);
                    deep.for_each(|i, j, k| {
                        if !shallow.contains([i, j, k]) {
                            assert!(set[var].get(i, j, k).is_nan());
                        }
                    });
                }
            }
        }
    }
}

fn topologies() -> Vec<Dims> {
    vec![
        Dims([2, 1, 1]),
        Dims([1, 3, 1]),
        Dims([1, 1, 4]),
        Dims([1, 2, 2]),
        Dims([2, 2, 2]),
        Dims([3, 2, 1]),
    ]
}

#[test]
fn ghosts_match_serial_shadow_grid() {
    for dims in topologies() {
        let grid = Grid3::new([16, 17, 21], [0.05; 3]).unwrap();
        let map = BlockMap::new(grid, dims).unwrap();
        for s in Strategy::ALL {
            for seed in [None, Some(11)] {
                let out = exchange_all(&map, blocks(&map, global_value), s, seed);
                check(&map, &out, s, global_value);
            }
        }
    }
}

#[test]
fn linear_fields_extend_exactly() {
    let grid = Grid3::new([12, 12, 12], [0.05; 3]).unwrap();
    let map = BlockMap::new(grid, Dims([2, 2, 2])).unwrap();
    for s in Strategy::ALL {
        let out = exchange_all(&map, blocks(&map, linear_value), s, Some(3));
        check(&map, &out, s, linear_value);
    }
}

#[test]
fn ledger_counts_match_plan() {
    let grid = Grid3::new([20, 20, 20], [0.05; 3]).unwrap();
    let map = BlockMap::new(grid, Dims([2, 2, 1])).unwrap();
    let eps = world(map.ranks(), TransportOptions::default());
    let sets = blocks(&map, global_value);
    thread::scope(|scope| {
        for (mut tr, mut set) in eps.into_iter().zip(sets) {
            let map = &map;
            scope.spawn(move || {
                let r = tr.rank();
                let mut ex = Exchanger::new(build_plan(&map.extents[r], &map.tables[r], Strategy::V1));
                for _ in 0..3 {
                    ex.exchange(&mut set, &mut tr).unwrap();
                }
                let per = ex.ledger().per_exchange();
                assert_eq!(ex.ledger().exchanges, 3);
                assert_eq!(per.bytes(), 8 * ex.plan().scalars_sent() as u64);
                assert_eq!(per.messages(), ex.plan().messages_sent() as u64);
                assert_eq!(tr.stats().bytes_sent, 3 * per.bytes());
            });
        }
    });
}
