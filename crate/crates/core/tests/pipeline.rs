use std::io::Read;
use std::path::{Path, PathBuf};

use mtdl_core::pipeline::archive::{list_arrays, npy_bytes, read_dataset, read_f64_array, write_archive};
use mtdl_core::pipeline::{
    run_betti, run_decompose, run_export_plot, run_spectra, MethodName, PipelineConfig, SpectraRequest,
};
use mtdl_core::{decomposed_image, BoundaryCondition};
use serde_json::Value;

fn config(input: &Path, output: &Path) -> PipelineConfig {
    PipelineConfig {
        input: input.to_path_buf(),
        output: output.to_path_buf(),
        ..PipelineConfig::default()
    }
}

fn entry(path: &Path, name: &str) -> Vec<u8> {
    let mut zip = zip::ZipArchive::new(std::fs::File::open(path).unwrap()).unwrap();
    let mut out = Vec::new();
    zip.by_name(&format!("{name}.npy"))
        .unwrap()
        .read_to_end(&mut out)
        .unwrap();
    out
}

fn shape_of(path: &Path, name: &str) -> Vec<usize> {
    list_arrays(path)
        .unwrap()
        .into_iter()
        .find(|a| a.name == name)
        .unwrap()
        .shape
}

fn square(n: usize, hole: usize) -> Vec<u8> {
    let mut img = vec![0u8; n * n];
    for i in 2..n - 2 {
        for j in 2..n - 2 {
            let c = n / 2;
            let in_hole =
                i + hole / 2 >= c && i < c + hole.div_ceil(2) && j + hole / 2 >= c && j < c + hole.div_ceil(2);
            img[i * n + j] = if in_hole { 0 } else { 200 };
        }
    }
    img
}

fn shapes_archive(dir: &Path) -> PathBuf {
    let path = dir.join("shapes.npz");
    let mut values = square(16, 0);
    values.extend(square(16, 4));
    values.extend(vec![0u8; 256]);
    let images = npy_bytes(values, &[3, 16, 16]).unwrap();
    let labels = npy_bytes(vec![7u8, 8, 9], &[3]).unwrap();
    write_archive(&path, &[("images", &images), ("labels", &labels)]).unwrap();
    path
}

#[test]
fn archive_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.npz");
    let values: Vec<f32> = (0..2 * 3 * 4).map(|i| i as f32 * 0.5).collect();
    let imgs = npy_bytes(values.clone(), &[2, 3, 4]).unwrap();
    let labels = npy_bytes(vec![1i64, 0], &[2]).unwrap();
    write_archive(&path, &[("train_images", &imgs), ("train_labels", &labels)]).unwrap();

    let names: Vec<String> = list_arrays(&path).unwrap().into_iter().map(|a| a.name).collect();
    assert_eq!(names, ["train_images", "train_labels"]);
    let ds = read_dataset(&path, Some("train")).unwrap();
    assert_eq!(ds.shape, vec![2, 3, 4]);
    assert!(!ds.integer);
    assert_eq!(ds.images.len(), 2);
    assert_eq!(ds.images[1].dims(), &[3, 4]);
    assert_eq!(ds.images[1].data()[0], 6.0);
    assert_eq!(ds.labels.as_deref(), Some(&labels[..]));
    assert!(read_dataset(&path, None).is_err());

    let (back, shape, integer) = read_f64_array(&imgs).unwrap();
    assert_eq!(shape, vec![2, 3, 4]);
    assert!(!integer);
    assert_eq!(back, values.iter().map(|&v| v as f64).collect::<Vec<_>>());
}

#[test]
fn decompose_matches_the_library_and_copies_labels() {
    let dir = tempfile::tempdir().unwrap();
    let input = shapes_archive(dir.path());
    let output = dir.path().join("out.npz");
    let summary = run_decompose(&config(&input, &output)).unwrap();
    assert_eq!((summary.processed, summary.exit_code()), (3, 0));
    assert_eq!(shape_of(&output, "decomposed"), vec![3, 6, 15, 15]);
    assert_eq!(entry(&output, "labels"), entry(&input, "labels"));
    assert!(list_arrays(&output).unwrap().iter().all(|a| a.name != "indices"));

    let (values, _, _) = read_f64_array(&entry(&output, "decomposed")).unwrap();
    let ds = read_dataset(&input, None).unwrap();
    let params = config(&input, &output).decompose_params(1.0);
    let (direct, _) = decomposed_image(&ds.images[1], &params).unwrap();
    let per = 6 * 15 * 15;
    let stored = &values[per..2 * per];
    for (a, b) in stored.iter().zip(direct.tensor()) {
        assert_eq!(*a, b as f64);
    }
}

#[test]
fn sidecar_records_a_reproducible_config() {
    let dir = tempfile::tempdir().unwrap();
    let input = shapes_archive(dir.path());
    let output = dir.path().join("run.npz");
    let mut cfg = config(&input, &output);
    cfg.method = MethodName::Flow;
    run_decompose(&cfg).unwrap();
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    let effective: PipelineConfig = serde_json::from_value(sidecar["config"].clone()).unwrap();
    assert_eq!(effective.threshold, Some(1.0));
    assert_eq!(effective.method, MethodName::Flow);
    let reparsed = PipelineConfig::from_toml(&effective.to_toml().unwrap()).unwrap();
    assert_eq!(sidecar["config_hash"].as_str().unwrap(), reparsed.hash().unwrap());
    assert_eq!(sidecar["input_shape"], serde_json::json!([3, 16, 16]));
    assert_eq!(sidecar["images"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_images_are_skipped_and_indexed() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.npz");
    let mut values: Vec<f64> = (0..3 * 64).map(|i| ((i * 37) % 11) as f64).collect();
    values[64 + 5] = f64::NAN;
    let images = npy_bytes(values, &[3, 8, 8]).unwrap();
    let labels = npy_bytes(vec![1u8, 2, 3], &[3]).unwrap();
    write_archive(&input, &[("images", &images), ("labels", &labels)]).unwrap();
    let output = dir.path().join("o.npz");
    let summary = run_decompose(&config(&input, &output)).unwrap();
    assert_eq!(summary.skipped, vec![1]);
    assert_eq!(summary.exit_code(), 1);
    assert_eq!(shape_of(&output, "decomposed"), vec![2, 6, 7, 7]);
    let (idx, _, _) = read_f64_array(&entry(&output, "indices")).unwrap();
    assert_eq!(idx, vec![0.0, 2.0]);
    assert_eq!(entry(&output, "labels"), entry(&input, "labels"));
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(sidecar["skipped"], serde_json::json!([1]));
    assert_eq!(sidecar["images"][1]["status"], "skipped");
}

#[test]
fn output_channels_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let rgb = dir.path().join("rgb.npz");
    let values: Vec<u8> = (0..2 * 8 * 8 * 3).map(|i| ((i * 31) % 251) as u8).collect();
    write_archive(&rgb, &[("images", &npy_bytes(values, &[2, 8, 8, 3]).unwrap())]).unwrap();
    let out = dir.path().join("o.npz");
    let mut cfg = config(&rgb, &out);
    cfg.method = MethodName::ChannelPair;
    run_decompose(&cfg).unwrap();
    assert_eq!(shape_of(&out, "decomposed"), vec![2, 18, 7, 7]);
    cfg.method = MethodName::Patch;
    cfg.patch_edge = 4;
    run_decompose(&cfg).unwrap();
    assert_eq!(shape_of(&out, "decomposed"), vec![2, 6, 1, 1]);

    let vol = dir.path().join("vol.npz");
    let values: Vec<u8> = (0..6 * 5 * 7).map(|i| ((i * 13) % 200) as u8).collect();
    write_archive(&vol, &[("images", &npy_bytes(values, &[1, 6, 5, 7]).unwrap())]).unwrap();
    let cfg = config(&vol, &out);
    run_decompose(&cfg).unwrap();
    assert_eq!(shape_of(&out, "decomposed"), vec![1, 9, 5, 4, 6]);
}

#[test]
fn betti_report_on_simple_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let input = shapes_archive(dir.path());
    let (report, summary) = run_betti(&config(&input, Path::new("")), None).unwrap();
    assert_eq!(summary.exit_code(), 0);
    let images = report["images"].as_array().unwrap();
    assert_eq!(images[0]["betti"], serde_json::json!([1, 0]));
    assert_eq!(images[1]["betti"], serde_json::json!([1, 1]));
    assert_eq!(images[1]["betti_normal"], serde_json::json!([1, 1]));
    assert!(images[2]["betti"].is_null());
    let (one, _) = run_betti(&config(&input, Path::new("")), Some(1)).unwrap();
    assert_eq!(one["images"][1]["betti"], 1);
}

#[test]
fn spectra_report_and_kernel_rasters() {
    let dir = tempfile::tempdir().unwrap();
    let input = shapes_archive(dir.path());
    let export = dir.path().join("vecs");
    let req = SpectraRequest {
        degree: 1,
        count: 4,
        condition: BoundaryCondition::Tangential,
        export: Some(export.clone()),
    };
    let (report, summary) = run_spectra(&config(&input, Path::new("")), &req).unwrap();
    let images = report["images"].as_array().unwrap();
    assert_eq!(images[0]["kernel_dim"], 0);
    assert_eq!(images[1]["kernel_dim"], 1);
    assert_eq!(images[1]["eigenvalues"].as_array().unwrap().len(), 4);
    assert!(images[2]["kernel_dim"].is_null());
    assert_eq!(summary.written.len(), 1);
    assert!(export.join("image0001_k1_tangential_vec0.png").exists());
}

#[test]
fn export_plot_writes_rasters_and_mid_slices() {
    let dir = tempfile::tempdir().unwrap();
    let input = shapes_archive(dir.path());
    let plots = dir.path().join("plots");
    let mut cfg = config(&input, Path::new(""));
    cfg.hsv = true;
    let summary = run_export_plot(&cfg, &plots, Some(2)).unwrap();
    assert_eq!(summary.processed, 2);
    assert_eq!(summary.written.len(), 2 * 3 * 2);
    let img = image::open(plots.join("image0001_harmonic.png")).unwrap();
    assert_eq!((img.width(), img.height()), (15, 15));
    assert!(plots.join("image0001_curl_free_dir.png").exists());

    let vol = dir.path().join("vol.npz");
    let values: Vec<u8> = (0..6 * 5 * 7).map(|i| ((i * 13) % 200) as u8).collect();
    write_archive(&vol, &[("images", &npy_bytes(values, &[1, 6, 5, 7]).unwrap())]).unwrap();
    let vplots = dir.path().join("vplots");
    run_export_plot(&config(&vol, Path::new("")), &vplots, None).unwrap();
    for (axis, (w, h)) in [(0, (6, 4)), (1, (6, 5)), (2, (4, 5))] {
        let img = image::open(vplots.join(format!("image0000_div_free_axis{axis}.png"))).unwrap();
        assert_eq!((img.width(), img.height()), (w, h), "axis {axis}");
    }
}
