use pdpclust::fit::{fit_cluster_decay, fit_ray_decay, fit_sv, FitConfig, FitStatus, PeakMode};
use pdpclust::partition::{ClusterPartition, Method};
use pdpclust::transform::PowerDelayProfile;
use pdpclust_testkit::lsq::line_fit;

const STEP_NS: f64 = 0.1;

/// Exact double-exponential mean-power profile in dB with the given onsets.
fn exact_profile(onsets_ns: &[f64], gamma_cluster: f64, gamma_ray: f64, len: usize) -> (Vec<f64>, Vec<usize>) {
    let bins: Vec<usize> = onsets_ns.iter().map(|t| (t / STEP_NS).round() as usize).collect();
    let db = (0..len)
        .map(|i| {
            let t = i as f64 * STEP_NS;
            let l = bins.iter().rposition(|&b| b <= i).unwrap();
            let t_l = onsets_ns[l];
            10.0 * ((-t_l / gamma_cluster).exp() * (-(t - t_l) / gamma_ray).exp()).log10()
        })
        .collect();
    (db, bins)
}

fn pdp(db: &[f64]) -> PowerDelayProfile<f64> {
    PowerDelayProfile::from_db(db, STEP_NS * 1e-9).unwrap()
}

#[test]
fn three_clusters_recover_both_constants() {
    let (db, bins) = exact_profile(&[0.0, 12.0, 31.0], 20.0, 5.0, 500);
    let part = ClusterPartition::from_onsets(bins.clone(), db.len(), Method::Sparse).unwrap();
    let profile = pdp(&db);
    let c = fit_cluster_decay(&profile, &part, PeakMode::FirstBin).unwrap();
    assert!((c.gamma_cluster_ns - 20.0).abs() < 0.2, "{}", c.gamma_cluster_ns);
    assert!(c.power_00_db.abs() < 1e-6);
    let rays = fit_ray_decay(&profile, &part).unwrap();
    for r in &rays {
        assert!((r.gamma_ray_ns.unwrap() - 5.0).abs() < 0.05);
        assert_eq!(r.status, FitStatus::Ok);
        assert!(r.r2 >= 0.0 && r.r2 <= 1.0);
    }
    // The onset powers against onset delays, fitted independently.
    let x: Vec<f64> = bins.iter().map(|&b| b as f64 * STEP_NS).collect();
    let y: Vec<f64> = bins.iter().map(|&b| db[b]).collect();
    let (_, slope) = line_fit(&x, &y);
    let oracle = -10.0 * std::f64::consts::LOG10_E / slope;
    assert!((c.gamma_cluster_ns - oracle).abs() < 1e-9);
    let fit = fit_sv(&profile, &part, &FitConfig::default()).unwrap();
    assert!((fit.gamma_ray_hat.unwrap() - 5.0).abs() < 0.05);
    assert!(fit.residual_db < 1e-9);
}

#[test]
fn offset_covariance() {
    let (db, bins) = exact_profile(&[0.0, 9.0, 27.0, 40.0], 15.0, 4.0, 600);
    let part = ClusterPartition::from_onsets(bins, db.len(), Method::Sparse).unwrap();
    let c = 13.5;
    let shifted: Vec<f64> = db.iter().map(|v| v + c).collect();
    for peak in [PeakMode::FirstBin, PeakMode::MaxBin] {
        let cfg = FitConfig { peak };
        let a = fit_sv(&pdp(&db), &part, &cfg).unwrap();
        let b = fit_sv(&pdp(&shifted), &part, &cfg).unwrap();
        assert!((b.power_00_hat_db.unwrap() - a.power_00_hat_db.unwrap() - c).abs() < 1e-9);
        assert!((b.gamma_cluster_hat.unwrap() - a.gamma_cluster_hat.unwrap()).abs() < 1e-9);
        assert!((b.gamma_ray_hat.unwrap() - a.gamma_ray_hat.unwrap()).abs() < 1e-9);
    }
}

#[test]
fn pooled_estimate_is_length_weighted() {
    let mut db: Vec<f64> = (0..100).map(|i| -0.1 * i as f64 * 10.0 * std::f64::consts::LOG10_E / 4.0).collect();
    db.extend((0..300).map(|i| -3.0 - 0.1 * i as f64 * 10.0 * std::f64::consts::LOG10_E / 8.0));
    let part = ClusterPartition::from_onsets(vec![0, 100], 400, Method::Sparse).unwrap();
    let fit = fit_sv(&pdp(&db), &part, &FitConfig::default()).unwrap();
    assert!((fit.gamma_ray_hat.unwrap() - (100.0 * 4.0 + 300.0 * 8.0) / 400.0).abs() < 1e-6);
}

#[test]
fn default_peak_is_first_bin() {
    assert_eq!(FitConfig::default().peak, PeakMode::FirstBin);
}
