//! Integration tests driving the command layer directly.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use specmix::spectra::{Spectrum, SpectrumMatrix, WavenumberAxis};
use specmix::synth;
use specmix_cli::commands::{
    cmd_calibrate, cmd_design, cmd_identify, cmd_lib_add, cmd_lib_list, cmd_lib_show,
    cmd_quantify, CalibrateArgs, DesignArgs, LibAddArgs, QuantifyArgs,
};
use specmix_cli::PipelineConfig;

fn axis() -> WavenumberAxis {
    WavenumberAxis::default_raman()
}

fn write_material_library(dir: &Path, seeds: &[u64], cfg: &PipelineConfig) -> Vec<synth::RawMaterialModel> {
    let ax = axis();
    let mut materials = Vec::new();
    for (i, &seed) in seeds.iter().enumerate() {
        let m = synth::generate_material(seed, &ax, 5).unwrap();
        let pure_path = dir.join(format!("pure_{i}.csv"));
        m.pure_spectrum(&ax).unwrap().write_csv(&pure_path).unwrap();
        let args = LibAddArgs {
            library: dir.join("lib"),
            name: format!("mat-{i}"),
            inci: format!("INCI {i}"),
            supplier: "synthetic".into(),
            spectra: vec![(100.0, pure_path)],
        };
        cmd_lib_add(cfg, &args).unwrap();
        materials.push(m);
    }
    materials
}

#[test]
fn lib_list_on_empty_library_reports_zero_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let out = cmd_lib_list(&cfg, &dir.path().join("lib")).unwrap();
    assert!(out.starts_with("0 entries"), "{out}");
}

#[test]
fn lib_add_duplicate_name_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    write_material_library(dir.path(), &[42], &cfg);
    let again = LibAddArgs {
        library: dir.path().join("lib"),
        name: "mat-0".into(),
        inci: String::new(),
        supplier: String::new(),
        spectra: vec![(100.0, dir.path().join("pure_0.csv"))],
    };
    let err = cmd_lib_add(&cfg, &again).unwrap_err();
    assert_eq!(err.code, 2);
    assert!(err.message.contains("mat-0"), "{}", err.message);
}

#[test]
fn lib_show_lists_all_five_dilutions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let ax = axis();
    let m = synth::generate_material(9, &ax, 5).unwrap();
    let pure = m.pure_spectrum(&ax).unwrap();
    let mut spectra = Vec::new();
    for d in [100.0, 75.0, 50.0, 25.0, 5.0] {
        let path = dir.path().join(format!("d{d}.csv"));
        Spectrum::new(ax.clone(), pure.intensities().to_owned() * (d / 100.0), "s")
            .unwrap()
            .write_csv(&path)
            .unwrap();
        spectra.push((d, path));
    }
    let args = LibAddArgs {
        library: dir.path().join("lib"),
        name: "diluted".into(),
        inci: String::new(),
        supplier: String::new(),
        spectra,
    };
    cmd_lib_add(&cfg, &args).unwrap();
    let out = cmd_lib_show(&cfg, &dir.path().join("lib"), "diluted").unwrap();
    for d in ["100%", "75%", "50%", "25%", "5%"] {
        assert!(out.contains(d), "missing dilution {d} in:\n{out}");
    }
}

#[test]
fn identify_single_material_dilution_series() {
    // inputs = dilution series of one pure library material
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let materials = write_material_library(dir.path(), &[101, 102, 103], &cfg);
    let ax = axis();

    let pure = materials[1].pure_spectrum(&ax).unwrap();
    let mut rows = Array2::<f64>::zeros((6, ax.len()));
    for (i, scale) in [1.0, 0.8, 0.6, 0.45, 0.33, 0.25].iter().enumerate() {
        rows.row_mut(i).assign(&(&pure.intensities() * *scale));
    }
    let labels = (0..6).map(|i| format!("dil{i}")).collect();
    let series = SpectrumMatrix::new(ax, rows, labels).unwrap();
    let input = dir.path().join("series.csv");
    series.write_csv(&input).unwrap();

    let out_dir = dir.path().join("ident");
    let report = cmd_identify(&cfg, &dir.path().join("lib"), &[input], &out_dir).unwrap();
    assert_eq!(report.optimal_f, 1);
    let best = &report.components[0].matches[0];
    assert_eq!(best.entry, "mat-1");
    assert!(best.correlation.abs() >= 0.99);
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("ic_1.csv").exists());
    assert!(out_dir.join("correlation_table.csv").exists());
}

#[test]
fn identify_flags_ambiguous_near_collinear_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let ax = axis();
    // two nearly identical entries plus one distinct
    let base = synth::generate_material(201, &ax, 5).unwrap();
    let pure = base.pure_spectrum(&ax).unwrap();
    let near = Spectrum::new(
        ax.clone(),
        pure.intensities().mapv(|v| v * 1.01 + 0.002),
        "near",
    )
    .unwrap();
    let other = synth::generate_material(202, &ax, 5)
        .unwrap()
        .pure_spectrum(&ax)
        .unwrap();
    for (name, spectrum) in [("alpha", &pure), ("alpha-twin", &near), ("beta", &other)] {
        let path = dir.path().join(format!("{name}.csv"));
        spectrum.write_csv(&path).unwrap();
        cmd_lib_add(
            &cfg,
            &LibAddArgs {
                library: dir.path().join("lib"),
                name: name.into(),
                inci: String::new(),
                supplier: String::new(),
                spectra: vec![(100.0, path)],
            },
        )
        .unwrap();
    }
    // dilution series of the collinear material
    let mut rows = Array2::<f64>::zeros((4, ax.len()));
    for (i, scale) in [1.0, 0.7, 0.5, 0.3].iter().enumerate() {
        rows.row_mut(i).assign(&(&pure.intensities() * *scale));
    }
    let labels = (0..4).map(|i| format!("r{i}")).collect();
    let input = dir.path().join("series.csv");
    SpectrumMatrix::new(ax, rows, labels).unwrap().write_csv(&input).unwrap();

    let report = cmd_identify(&cfg, &dir.path().join("lib"), &[input], &dir.path().join("out")).unwrap();
    let ic = &report.components[0];
    assert!(ic.ambiguous, "expected ambiguity flag: {ic:?}");
    assert!(ic.matches.len() >= 2);
    assert!(ic.note.contains("include both"));
}

#[test]
fn identify_rejects_too_few_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let materials = write_material_library(dir.path(), &[301], &cfg);
    let ax = axis();
    let pure = materials[0].pure_spectrum(&ax).unwrap();
    let input = dir.path().join("one.csv");
    pure.write_csv(&input).unwrap();
    let err = cmd_identify(&cfg, &dir.path().join("lib"), &[input], &dir.path().join("o"))
        .unwrap_err();
    assert_eq!(err.code, 2);
}

#[test]
fn design_counts_meet_floors_and_infeasible_bounds_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out3 = dir.path().join("d3.csv");
    cmd_design(&DesignArgs {
        components: vec!["a".into(), "b".into(), "c".into()],
        bounds: vec![],
        kind: "lattice".into(),
        degree: 0,
        out_file: out3.clone(),
    })
    .unwrap();
    let d3 = specmix::design::MixtureDesign::read_csv(&out3).unwrap();
    assert!(d3.n_points() >= 10);

    let out5 = dir.path().join("d5.csv");
    cmd_design(&DesignArgs {
        components: (0..5).map(|i| format!("c{i}")).collect(),
        bounds: vec![],
        kind: "lattice".into(),
        degree: 0,
        out_file: out5.clone(),
    })
    .unwrap();
    let d5 = specmix::design::MixtureDesign::read_csv(&out5).unwrap();
    assert!(d5.n_points() >= 30);

    let err = cmd_design(&DesignArgs {
        components: vec!["a".into(), "b".into(), "c".into()],
        bounds: vec!["a=0.5:1".into(), "b=0.4:1".into(), "c=0.3:1".into()],
        kind: "lattice".into(),
        degree: 0,
        out_file: dir.path().join("bad.csv"),
    })
    .unwrap_err();
    assert_eq!(err.code, 2);
    assert!(err.message.contains(">= 1"), "{}", err.message);
}

fn calibration_fixture(
    dir: &Path,
    seeds: &[u64],
    noise: f64,
    seed: u64,
) -> (Vec<synth::RawMaterialModel>, PathBuf, PathBuf) {
    let ax = axis();
    let materials: Vec<_> = seeds
        .iter()
        .map(|&s| synth::generate_material(s, &ax, 5).unwrap())
        .collect();
    let names: Vec<String> = (0..materials.len()).map(|i| format!("m{i}")).collect();
    let base = specmix::design::simplex_lattice(materials.len(), 3).unwrap();
    let design = specmix::design::MixtureDesign::new(
        names,
        base.points().clone(),
        base.bounds().to_vec(),
    )
    .unwrap();
    let design_path = dir.join("design.csv");
    design.write_csv(&design_path).unwrap();
    let x = synth::mix_batch(&materials, &ax, design.points(), noise, seed).unwrap();
    let spectra_path = dir.join("cal_spectra.csv");
    x.write_csv(&spectra_path).unwrap();
    (materials, design_path, spectra_path)
}

#[test]
fn calibrate_noise_free_r2_is_essentially_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let (_, design_path, spectra_path) = calibration_fixture(dir.path(), &[401, 402, 403, 404], 0.0, 3);
    let report = cmd_calibrate(
        &cfg,
        &CalibrateArgs {
            design: design_path,
            spectra: spectra_path,
            out_dir: dir.path().join("cal"),
            pls1: false,
        },
    )
    .unwrap();
    for m in &report.metrics {
        assert!(m.r2y >= 0.999, "{}: R2Y {}", m.response, m.r2y);
    }
    assert!(dir.path().join("cal/model/bundle.json").exists());
    assert!(dir.path().join("cal/metrics.csv").exists());
}

#[test]
fn calibrate_with_noise_meets_r2_floor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let (_, design_path, spectra_path) = calibration_fixture(dir.path(), &[411, 412, 413, 414], 0.01, 5);
    let report = cmd_calibrate(
        &cfg,
        &CalibrateArgs {
            design: design_path,
            spectra: spectra_path,
            out_dir: dir.path().join("cal"),
            pls1: false,
        },
    )
    .unwrap();
    for m in &report.metrics {
        assert!(m.r2y >= 0.94, "{}: R2Y {}", m.response, m.r2y);
    }
}

#[test]
fn calibrate_single_row_fails_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let ax = axis();
    let materials: Vec<_> = [421u64, 422]
        .iter()
        .map(|&s| synth::generate_material(s, &ax, 4).unwrap())
        .collect();
    // single-point "design": write manually since MixtureDesign requires
    // at least valid shape; one row summing to 1
    let design_path = dir.path().join("design.csv");
    std::fs::write(&design_path, "a,b\n0.6,0.4\n").unwrap();
    let x = synth::mix_batch(&materials, &ax, &ndarray::array![[0.6, 0.4]], 0.0, 1).unwrap();
    let spectra_path = dir.path().join("s.csv");
    x.write_csv(&spectra_path).unwrap();
    let err = cmd_calibrate(
        &cfg,
        &CalibrateArgs {
            design: design_path,
            spectra: spectra_path,
            out_dir: dir.path().join("cal"),
            pls1: false,
        },
    )
    .unwrap_err();
    assert_eq!(err.code, 2);
}

#[test]
fn quantify_training_point_reproduces_fitted_value_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let (_, design_path, spectra_path) = calibration_fixture(dir.path(), &[431, 432, 433], 0.005, 7);
    cmd_calibrate(
        &cfg,
        &CalibrateArgs {
            design: design_path.clone(),
            spectra: spectra_path.clone(),
            out_dir: dir.path().join("cal"),
            pls1: false,
        },
    )
    .unwrap();

    // quantifying the calibration spectra must equal model.predict exactly
    let report = cmd_quantify(
        &cfg,
        &QuantifyArgs {
            model_dir: dir.path().join("cal"),
            spectra: spectra_path,
            reference: Some(design_path),
            out_dir: dir.path().join("q"),
            clip: false,
        },
    )
    .unwrap();

    let bundle = specmix_cli::commands::ModelBundle::load(&dir.path().join("cal/model")).unwrap();
    let x = SpectrumMatrix::read_csv(&dir.path().join("cal_spectra.csv")).unwrap();
    let prepared = bundle.preprocess(&x).unwrap();
    let direct = bundle.predict(prepared.rows()).unwrap();
    for (i, sample) in report.samples.iter().enumerate() {
        for (j, comp) in sample.components.iter().enumerate() {
            assert_eq!(comp.predicted_pct, direct[[i, j]], "sample {i} comp {j}");
        }
    }
}

#[test]
fn quantify_held_out_and_absent_component_within_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let (materials, design_path, spectra_path) =
        calibration_fixture(dir.path(), &[441, 442, 443, 444], 0.01, 11);
    cmd_calibrate(
        &cfg,
        &CalibrateArgs {
            design: design_path,
            spectra: spectra_path,
            out_dir: dir.path().join("cal"),
            pls1: false,
        },
    )
    .unwrap();

    let ax = axis();
    // held-out interior point plus a mixture where component 3 is absent
    let truths = ndarray::array![[0.3, 0.25, 0.25, 0.2], [0.5, 0.3, 0.2, 0.0]];
    let unknown = synth::mix_batch(&materials, &ax, &truths, 0.01, 99).unwrap();
    let unknown_path = dir.path().join("unknown.csv");
    unknown.write_csv(&unknown_path).unwrap();

    let report = cmd_quantify(
        &cfg,
        &QuantifyArgs {
            model_dir: dir.path().join("cal"),
            spectra: unknown_path,
            reference: None,
            out_dir: dir.path().join("q"),
            clip: false,
        },
    )
    .unwrap();
    for (i, sample) in report.samples.iter().enumerate() {
        for (j, comp) in sample.components.iter().enumerate() {
            let truth = truths[[i, j]] * 100.0;
            let err = (comp.predicted_pct - truth).abs();
            assert!(err <= 2.0, "sample {i} comp {j}: err {err}");
        }
    }
}

#[test]
fn pls1_mode_calibrates_and_quantifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let (materials, design_path, spectra_path) =
        calibration_fixture(dir.path(), &[451, 452, 453], 0.005, 13);
    let report = cmd_calibrate(
        &cfg,
        &CalibrateArgs {
            design: design_path,
            spectra: spectra_path,
            out_dir: dir.path().join("cal"),
            pls1: true,
        },
    )
    .unwrap();
    assert_eq!(report.mode, "pls1");
    assert_eq!(report.selected_lv.len(), 3);

    let ax = axis();
    let truths = ndarray::array![[0.4, 0.35, 0.25]];
    let unknown = synth::mix_batch(&materials, &ax, &truths, 0.005, 14).unwrap();
    let unknown_path = dir.path().join("u.csv");
    unknown.write_csv(&unknown_path).unwrap();
    let q = cmd_quantify(
        &cfg,
        &QuantifyArgs {
            model_dir: dir.path().join("cal"),
            spectra: unknown_path,
            reference: None,
            out_dir: dir.path().join("q"),
            clip: false,
        },
    )
    .unwrap();
    for (j, comp) in q.samples[0].components.iter().enumerate() {
        let err = (comp.predicted_pct - truths[[0, j]] * 100.0).abs();
        assert!(err <= 2.0, "comp {j}: err {err}");
    }
}

#[test]
fn reports_embed_config_hash_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.seed = 77;
    let (_, design_path, spectra_path) = calibration_fixture(dir.path(), &[461, 462], 0.0, 15);
    let report = cmd_calibrate(
        &cfg,
        &CalibrateArgs {
            design: design_path,
            spectra: spectra_path,
            out_dir: dir.path().join("cal"),
            pls1: false,
        },
    )
    .unwrap();
    assert_eq!(report.seed, 77);
    assert_eq!(report.config_hash, cfg.hash());
    let body = std::fs::read_to_string(dir.path().join("cal/calibration_report.json")).unwrap();
    assert!(body.contains(&cfg.hash()));
}
