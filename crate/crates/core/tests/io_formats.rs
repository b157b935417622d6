use std::fs;
use std::path::Path;

use spatial_nmix::io::{
    covariates_csv, culls_csv, edges_csv, grid_csv, kappa_csv, list_fits, load_dataset, load_kappa, observations_csv,
    read_fit, write_samples, CsvText, DataPaths, OutputDir, RunManifest,
};
use spatial_nmix::mcmc::{run_chains, Problem, SamplerConfig};
use spatial_nmix::model::PriorConfig;
use spatial_nmix::scenarios::CullScenario;
use spatial_nmix::simgen::{simulate_dataset, SimConfig, SimData};
use spatial_nmix::Error;

fn desk(seed: u64) -> SimData {
    simulate_dataset(&SimConfig::desk(), seed).unwrap()
}

fn write_all(dir: &Path, sim: &SimData) -> DataPaths {
    let put = |name: &str, csv: CsvText| fs::write(dir.join(name), csv.as_str()).unwrap();
    put("grid.csv", grid_csv(&sim.geometry));
    put("edges.csv", edges_csv(&sim.adjacency));
    put("observations.csv", observations_csv(&sim.dataset));
    put("culls.csv", culls_csv(&sim.dataset));
    put("abundance_covariates.csv", covariates_csv(sim.dataset.x(), "X"));
    put("detection_covariates.csv", covariates_csv(sim.dataset.g(), "G"));
    DataPaths::in_dir(dir)
}

fn issues(err: Error) -> Vec<String> {
    match err {
        Error::Data(list) => list.iter().map(ToString::to_string).collect(),
        other => panic!("expected data errors, got {other}"),
    }
}

fn edit(path: &Path, f: impl FnOnce(&mut Vec<String>)) {
    let mut lines: Vec<String> = fs::read_to_string(path).unwrap().lines().map(str::to_string).collect();
    f(&mut lines);
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn written_dataset_loads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let sim = desk(5);
    let loaded = load_dataset(&write_all(dir.path(), &sim), None).unwrap();
    assert_eq!(loaded.geometry, sim.geometry);
    assert_eq!(loaded.adjacency, sim.adjacency);
    assert_eq!(loaded.dataset.observations(), sim.dataset.observations());
    assert_eq!(loaded.dataset.cull_records(), sim.dataset.cull_records());
    assert_eq!(loaded.dataset.x(), sim.dataset.x());
    assert_eq!(loaded.dataset.g(), sim.dataset.g());
}

#[test]
fn rook_adjacency_is_inferred_without_an_edge_file() {
    let dir = tempfile::tempdir().unwrap();
    let sim = desk(5);
    let mut paths = write_all(dir.path(), &sim);
    paths.edges = None;
    assert_eq!(load_dataset(&paths, None).unwrap().adjacency, sim.adjacency);
}

#[test]
fn unknown_site_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_all(dir.path(), &desk(5));
    edit(&paths.observations, |l| l[3] = "1,999,0,4".into());
    let msgs = issues(load_dataset(&paths, None).unwrap_err());
    assert_eq!(msgs.len(), 1);
    assert!(msgs[0].contains("observations.csv:4:"), "{}", msgs[0]);
    assert!(msgs[0].contains("unknown site_id 999"));
}

#[test]
fn non_compositional_row_names_the_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_all(dir.path(), &desk(5));
    let x = paths.abundance_covariates.clone().unwrap();
    edit(&x, |l| l[1] = "0,0.2,0.2,0.2,0.2".into());
    let msgs = issues(load_dataset(&paths, None).unwrap_err());
    assert_eq!(msgs.len(), 1);
    assert!(msgs[0].contains("abundance_covariates.csv:2:"));
    assert!(msgs[0].contains("sums to 0.8") && msgs[0].contains("1e-6"), "{}", msgs[0]);
}

#[test]
fn every_violation_is_reported_and_nothing_loads() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_all(dir.path(), &desk(5));
    edit(&paths.observations, |l| {
        l[2] = "0,3,0,-1".into();
        l[5] = "0,3,x,2".into();
    });
    edit(paths.culls.as_ref().unwrap(), |l| l[1] = "0,9,5".into());
    edit(paths.edges.as_ref().unwrap(), |l| l[1] = "4,4".into());
    let msgs = issues(load_dataset(&paths, None).unwrap_err());
    let joined = msgs.join("\n");
    assert!(joined.contains("observations.csv:3: count must be non-negative"), "{joined}");
    assert!(joined.contains("observations.csv:6: visit = `x`"), "{joined}");
    assert!(joined.contains("culls.csv:2: unknown region_id 9"), "{joined}");
    assert!(joined.contains("culls.csv: missing cull count for species 0 in region 0"), "{joined}");
    assert!(joined.contains("edges.csv:2: self-loop"), "{joined}");
}

#[test]
fn grid_gaps_and_bad_headers_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_all(dir.path(), &desk(5));
    edit(&paths.grid, |l| {
        l.remove(8);
    });
    let msgs = issues(load_dataset(&paths, None).unwrap_err());
    assert!(msgs.iter().any(|m| m.contains("missing 7")), "{msgs:?}");

    let paths = write_all(dir.path(), &desk(5));
    edit(&paths.observations, |l| l[0] = "species,site,visit,count".into());
    let msgs = issues(load_dataset(&paths, None).unwrap_err());
    assert!(msgs[0].contains("header must be `species,site_id,visit,count`"));
}

#[test]
fn species_names_fix_the_species_count() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_all(dir.path(), &desk(5));
    let msgs = issues(load_dataset(&paths, Some(2)).unwrap_err());
    assert!(msgs.iter().any(|m| m.contains("species 2 outside 0..2")));
}

#[test]
fn national_scale_grid_loads() {
    // 732 squares in 26 regions with 3 species, on a 12 x 61 lattice.
    let dir = tempfile::tempdir().unwrap();
    let (nx, ny) = (12, 61);
    let mut grid = CsvText::new(&["site_id", "x", "y", "region_id"]);
    let mut obs = CsvText::new(&["species", "site_id", "visit", "count"]);
    let mut culls = CsvText::new(&["species", "region_id", "cull_count"]);
    for j in 0..nx * ny {
        let (col, row) = (j % nx, j / nx);
        grid.row()
            .int(j as u64)
            .real(col as f64 * 10.0 + 5.0)
            .real(row as f64 * 10.0 + 5.0)
            .int((row * 26 / ny) as u64)
            .end();
        if j % 7 == 0 {
            for i in 0..3u64 {
                obs.row().int(i).int(j as u64).int(0).int((j as u64 + i) % 5).end();
            }
        }
    }
    for i in 0..3u64 {
        for k in 0..26u64 {
            culls.row().int(i).int(k).int(10 + k).end();
        }
    }
    fs::write(dir.path().join("grid.csv"), grid.as_str()).unwrap();
    fs::write(dir.path().join("observations.csv"), obs.as_str()).unwrap();
    fs::write(dir.path().join("culls.csv"), culls.as_str()).unwrap();
    let paths = DataPaths {
        grid: dir.path().join("grid.csv"),
        edges: None,
        observations: dir.path().join("observations.csv"),
        culls: Some(dir.path().join("culls.csv")),
        abundance_covariates: None,
        detection_covariates: None,
    };
    let d = load_dataset(&paths, None).unwrap();
    assert_eq!(d.geometry.n_sites(), 732);
    assert_eq!(d.geometry.n_regions(), 26);
    assert_eq!(d.dataset.n_species(), 3);
    assert_eq!(d.adjacency.n_edges(), (nx - 1) * ny + nx * (ny - 1));
}

#[test]
fn kappa_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let sc = CullScenario::new(3, vec![vec![0.1, 0.25], vec![0.3, 1.0 / 3.0]]).unwrap();
    let path = dir.path().join("kappa.csv");
    fs::write(&path, kappa_csv(&sc).as_str()).unwrap();
    assert_eq!(load_kappa(&path, 3, 2, 2).unwrap(), sc);
    let msgs = issues(load_kappa(&path, 3, 2, 3).unwrap_err());
    assert!(msgs[0].contains("missing kappa for species 0 in region 2"));
}

fn stored_round_trip(gzip: bool) {
    let sim = desk(11);
    let priors = PriorConfig::default();
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &sim.dataset, &priors).unwrap();
    let cfg = SamplerConfig {
        n_iterations: 120,
        n_burnin: 60,
        thin: 3,
        n_chains: 2,
        ..Default::default()
    };
    let sc = CullScenario::constant(7, 3, 5, 0.2).unwrap();
    let samples = run_chains(&problem, &sc, &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let out = OutputDir::create(dir.path(), gzip).unwrap();
    write_samples(&out, &samples, &sc, "hash").unwrap();
    let manifest = out.finish("test", "hash").unwrap();
    assert_eq!(manifest.files.len(), 3);

    let manifest = RunManifest::read(dir.path()).unwrap();
    let fits = list_fits(&manifest);
    assert_eq!(fits, vec!["samples/scenario-0007/meta.json".to_string()]);
    let back = read_fit(dir.path(), &manifest, &fits[0], false).unwrap();
    assert_eq!(back.samples, samples);
    for (a, b) in back.samples.chains.iter().zip(&samples.chains) {
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(back.sidecar.kappa, sc.kappa);
    assert_eq!(back.sidecar.rhat.len(), samples.width());

    let slim = read_fit(dir.path(), &manifest, &fits[0], true).unwrap().samples;
    assert!(!slim.layout.store_fields);
    let t = slim.layout.total(2);
    assert_eq!(slim.column(t), samples.column(samples.layout.total(2)));
}

#[test]
fn mis_shaped_scenario_is_an_error() {
    let sim = desk(11);
    let priors = PriorConfig::default();
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &sim.dataset, &priors).unwrap();
    let sc = CullScenario::constant(0, 3, 3, 0.2).unwrap();
    let err = run_chains(&problem, &sc, &SamplerConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)), "{err}");
}

#[test]
fn stored_draws_read_back_bit_exactly() {
    stored_round_trip(false);
}

#[test]
fn gzipped_draws_read_back_bit_exactly() {
    stored_round_trip(true);
}

#[test]
fn tampered_sample_file_is_refused() {
    let sim = desk(11);
    let priors = PriorConfig::default();
    let problem = Problem::new(&sim.geometry, &sim.adjacency, &sim.dataset, &priors).unwrap();
    let cfg = SamplerConfig {
        n_iterations: 40,
        n_burnin: 20,
        thin: 2,
        n_chains: 1,
        store_fields: false,
        ..Default::default()
    };
    let sc = CullScenario::constant(0, 3, 5, 0.2).unwrap();
    let samples = run_chains(&problem, &sc, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = OutputDir::create(dir.path(), false).unwrap();
    write_samples(&out, &samples, &sc, "h").unwrap();
    let manifest = out.finish("test", "h").unwrap();
    let chain = dir.path().join("samples/scenario-0000/chain-0.csv");
    let text = fs::read_to_string(&chain).unwrap().replacen("e0,", "e1,", 1);
    fs::write(&chain, text).unwrap();
    assert_eq!(manifest.verify(dir.path()), vec!["samples/scenario-0000/chain-0.csv".to_string()]);
    let err = read_fit(dir.path(), &manifest, "samples/scenario-0000/meta.json", false).unwrap_err();
    assert!(err.to_string().contains("checksum"), "{err}");
}
