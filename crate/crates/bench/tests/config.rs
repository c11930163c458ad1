use std::path::PathBuf;

use cavity_bench::config::{ConfigError, GridSize, RunConfig};
use cavity_core::decomp::{DecompMode, Dims, GrowthType};
use cavity_core::halo::Strategy as Exchange;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |x| x.is_finite())
}

prop_compose! {
    fn config()(
        grid in prop::array::uniform3(4usize..512),
        np in prop::option::of(1usize..64),
        mode in prop::sample::select(DecompMode::ALL.to_vec()),
        dims in prop::option::of(prop::array::uniform3(1usize..8)),
        strategy in prop::sample::select(Exchange::ALL.to_vec()),
        overlap in any::<bool>(),
        growth in prop::sample::select(vec![GrowthType::Uniform, GrowthType::FollowDims]),
        floats in prop::array::uniform8(finite()),
        steps in any::<usize>(),
        rescale_pressure in any::<bool>(),
        seed in prop::option::of(any::<u64>()),
        out in prop::option::of("[a-z][a-z0-9_/.-]{0,20}"),
    ) -> RunConfig {
        RunConfig {
            grid: GridSize(grid),
            np,
            mode,
            dims: dims.map(Dims),
            strategy,
            overlap,
            growth,
            rayleigh: floats[0],
            u_ref: floats[1],
            dissipation: floats[2],
            t_hot: floats[3],
            t_cold: floats[4],
            cfl: floats[5],
            steps,
            conv_tol: floats[6],
            rescale_pressure,
            seed,
            out: out.map(PathBuf::from),
        }
    }
}

proptest! {
    #[test]
    fn text_round_trip(c in config()) {
        let text = c.to_text();
        prop_assert_eq!(RunConfig::parse_text(&text).unwrap(), c);
    }

    #[test]
    fn grid_size_round_trip(g in prop::array::uniform3(1usize..100_000)) {
        let s = GridSize(g).to_string();
        prop_assert_eq!(s.parse::<GridSize>().unwrap(), GridSize(g));
    }
}

#[test]
fn later_settings_override_earlier_ones() {
    let mut c = RunConfig::parse_text("steps = 10\nstrategy = v1").unwrap();
    c.apply_text("steps = 25\noverlap = on\n").unwrap();
    assert_eq!(c.steps, 25);
    assert_eq!(c.strategy, Exchange::V1);
    assert!(c.overlap);
}

#[test]
fn explicit_dims_must_match_the_mode() {
    let c = RunConfig::parse_text("mode = 1d-i\ndims = 4x1x1").unwrap();
    assert_eq!(c.resolve_dims().unwrap(), Dims([4, 1, 1]));
    let c = RunConfig::parse_text("mode = 1d-k\ndims = 4x1x1").unwrap();
    assert!(matches!(c.resolve_dims(), Err(ConfigError::Decomp(_))));
}

#[test]
fn spec_carries_the_settings() {
    let c = RunConfig::parse_text("grid = 16x16x24\nnp = 2\nmode = 1d-k\nseed = 9\nsteps = 3\ncfl = 0.5").unwrap();
    let s = c.to_spec().unwrap();
    assert_eq!(s.n, [16, 16, 24]);
    assert_eq!(s.dims, Dims([1, 1, 2]));
    assert_eq!(s.transport.randomize, Some(9));
    assert_eq!(s.config.max_steps, 3);
    assert_eq!(s.config.cfl, 0.5);
}
