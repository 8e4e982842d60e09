use ipsdual::cli::{command, resolve};
use ipsdual::commands::run;
use ipsdual::core::generator::LatticeModel;
use ipsdual::core::lattice::{Configuration, GdcpParams};
use ipsdual::core::mc::LatticeSim;
use ipsdual::parallel::{par_estimate, par_estimate_vec, with_threads};

fn bits(e: &ipsdual::core::mc::Estimate) -> (u64, u64) {
    (e.mean.to_bits(), e.std_error.to_bits())
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let m = LatticeModel::Gdcp(GdcpParams::annihilating(0.5, 0.8, 0.3, 0.6, 1.2, 0.9, 0.3).unwrap());
    let rates = m.primal_rates().unwrap();
    let init = Configuration::full(5).unwrap();
    let go = |threads| {
        with_threads(threads, || {
            par_estimate_vec(3_000, 21, 5, |r| {
                let mut sim = LatticeSim::new(rates, &init, 21, r)?;
                sim.run_until(2.0)?;
                Ok(sim.occupancy().iter().map(|&o| o as u8 as f64).collect())
            })
            .unwrap()
        })
    };
    let reference: Vec<_> = go(1).iter().map(bits).collect();
    for threads in [2, 8] {
        assert_eq!(go(threads).iter().map(bits).collect::<Vec<_>>(), reference, "threads={threads}");
    }
    let scalar = |threads| with_threads(threads, || par_estimate(5_000, 3, |r| Ok((r % 7) as f64 * 0.1)).unwrap());
    assert_eq!(bits(&scalar(1)), bits(&scalar(8)));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    for args in [
        vec!["simulate", "--model", "dcp", "--n", "4", "--replicas", "500"],
        vec!["simulate", "--model", "gdcp-dual", "--n", "3", "--init", "2", "--replicas", "500"],
        vec!["simulate", "--model", "sir", "--init", "RISIR", "--lo", "-2", "--replicas", "500"],
        vec!["sir-cluster", "--replicas", "2000"],
        vec!["correlate", "--replicas", "500"],
    ] {
        let report = |threads: &str| {
            let mut a = vec!["ipsdual"];
            a.extend(&args);
            a.extend(["--threads", threads]);
            let spec = resolve(&command().try_get_matches_from(a).unwrap()).unwrap();
            let rows = run(&spec).unwrap().rows;
            rows.into_iter()
                .filter(|r| !r[0].ends_with("seconds"))
                .collect::<Vec<_>>()
        };
        let one = report("1");
        assert_eq!(report("2"), one, "{args:?}");
        assert_eq!(report("8"), one, "{args:?}");
    }
}
