use czlab_core::czdecomp::decompose;
use czlab_core::dyadic::TorusGrid;
use czlab_core::fixtures::{random_psd, root_norm};
use czlab_core::io::{read_grid_function, read_manifest, write_cz_parts};

#[test]
fn decomposition_directory_round_trips() {
    let grid = TorusGrid::new(1, 6).unwrap();
    let f = random_psd(&grid, 2, 3).unwrap();
    let lam = 1.25 * root_norm(&f);
    let parts = decompose(&f, lam).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_cz_parts(dir.path(), &parts).unwrap();
    let manifest = read_manifest(dir.path()).unwrap();
    assert_eq!(manifest.gks.len(), parts.gks().len());
    assert_eq!(manifest.bks.len(), parts.bks().len());
    assert_eq!(manifest.lambda, lam);
    assert_eq!(serde_json::to_string(&written).unwrap(), serde_json::to_string(&manifest).unwrap());
    let g = read_grid_function(&dir.path().join(&manifest.g)).unwrap();
    assert_eq!(g.max_diff(parts.g()), 0.0);
    for entry in &manifest.gks {
        let piece = read_grid_function(&dir.path().join(&entry.file)).unwrap();
        assert_eq!(piece.max_diff(&parts.gks()[&(entry.k, entry.s)]), 0.0);
    }
    let back = read_grid_function(&dir.path().join(&manifest.f)).unwrap();
    assert_eq!(back.max_diff(&f), 0.0);
}
