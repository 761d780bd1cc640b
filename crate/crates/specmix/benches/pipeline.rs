//! Benchmarks for the data-parallel hot paths.
//!
//! Group names carry the active execution mode, so runs with and without
//! the `parallel` feature can be compared directly:
//!
//! ```text
//! cargo bench -p specmix
//! cargo bench -p specmix --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use specmix::bss::{fit_infomax, ica_by_blocks, IcaByBlocksOptions, IcaOptions};
use specmix::design::simplex_lattice;
use specmix::pls::{cross_validate, CvScheme};
use specmix::speclib::{LibraryEntry, LibraryIndex};
use specmix::spectra::{SpectrumMatrix, WavenumberAxis};
use specmix::synth;

fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

fn mixture_set(n_sources: usize, rows: usize, noise: f64) -> SpectrumMatrix {
    let axis = WavenumberAxis::default_raman();
    let materials: Vec<_> = (0..n_sources)
        .map(|i| synth::generate_material(100 + i as u64, &axis, 5).unwrap())
        .collect();
    let base = simplex_lattice(n_sources, 3).unwrap().points().clone();
    let mut compositions = Array2::<f64>::zeros((rows, n_sources));
    for i in 0..rows {
        compositions.row_mut(i).assign(&base.row(i % base.nrows()));
        // nudge repeated rows so the matrix stays full rank
        if i >= base.nrows() {
            let shrink = 0.9 - 0.05 * (i / base.nrows()) as f64;
            compositions.row_mut(i).mapv_inplace(|v| v * shrink);
        }
    }
    synth::mix_batch(&materials, &axis, &compositions, noise, 7).unwrap()
}

fn bench_infomax(c: &mut Criterion) {
    let x = mixture_set(4, 12, 0.01);
    let mut group = c.benchmark_group("fit_infomax");
    group.sample_size(20);
    group.bench_with_input(BenchmarkId::new(mode(), "12x833_f4"), &x, |b, x| {
        b.iter(|| fit_infomax(x, 4, &IcaOptions::default()).unwrap());
    });
    group.finish();
}

fn bench_ica_by_blocks(c: &mut Criterion) {
    let x = mixture_set(3, 20, 0.01);
    let opts = IcaByBlocksOptions::default();
    let mut group = c.benchmark_group("ica_by_blocks");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new(mode(), "20x833_B2_f6"), &x, |b, x| {
        b.iter(|| ica_by_blocks(x, 2, 6, &opts).unwrap());
    });
    group.finish();
}

fn bench_cross_validate(c: &mut Criterion) {
    let axis = WavenumberAxis::default_raman();
    let materials: Vec<_> = (0..4)
        .map(|i| synth::generate_material(200 + i as u64, &axis, 5).unwrap())
        .collect();
    let design = simplex_lattice(4, 3).unwrap();
    let y = design.points() * 100.0;
    let x = synth::mix_batch(&materials, &axis, design.points(), 0.01, 9)
        .unwrap()
        .rows()
        .clone();
    let scheme = CvScheme::leave_one_out();
    let mut group = c.benchmark_group("cross_validate");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new(mode(), "loo_20x833_lv8"), |b| {
        b.iter(|| cross_validate(&x, &y, &scheme, 8).unwrap());
    });
    group.finish();
}

fn bench_library_match(c: &mut Criterion) {
    let axis = WavenumberAxis::default_raman();
    let mut index = LibraryIndex::new(axis.clone());
    for seed in 0..24u64 {
        let m = synth::generate_material(300 + seed, &axis, 5).unwrap();
        let pure = m.pure_spectrum(&axis).unwrap();
        let entry = LibraryEntry::new(m.name.clone(), "", "", vec![(100.0, pure)]).unwrap();
        index = index.add_entry(entry).unwrap();
    }
    let query = synth::generate_material(305, &axis, 5)
        .unwrap()
        .pure_spectrum(&axis)
        .unwrap();
    let mut group = c.benchmark_group("match_spectrum");
    group.bench_function(BenchmarkId::new(mode(), "24_entries"), |b| {
        b.iter(|| index.match_spectrum(&query, 0.0).unwrap());
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_infomax,
    bench_ica_by_blocks,
    bench_cross_validate,
    bench_library_match
);
criterion_main!(benches);
