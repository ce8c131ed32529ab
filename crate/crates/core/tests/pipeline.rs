use feddp_core::datagen::{build_federation, FederatedDataset, MixtureSpec, ScenarioSpec};
use feddp_core::dp::compose_basic;
use feddp_core::fed::{ClientClipBounds, ClientPartition, FedRun, PrivacyUnit};
use feddp_core::init::{run_feddp_init, server_radius, InitBudget, InitConfig};
use feddp_core::kmeans::{assign, kmeans_cost, weighted_kmeans_pp_seed, weighted_lloyd, LloydParams};
use feddp_core::linalg::{outer_product, top_k_projector};
use feddp_core::lloyds::{run_feddp_lloyds, LloydsConfig};
use feddp_core::theory::{reduce_diameter, simplify_iterations, simplify_server_data, DiameterParams};
use feddp_core::{Points, SeedStream, WeightedPoints};

fn small_federation(seed: u64, clients: usize) -> FederatedDataset {
    let spec = MixtureSpec::desk(SeedStream::new(seed).child("spec")).unwrap();
    let scenario = ScenarioSpec { clients, points_per_client: 2000 / clients, ..ScenarioSpec::desk_scale() };
    build_federation(&spec, &scenario, SeedStream::new(seed).child("data")).unwrap()
}

fn lloyds_cfg(rounds: usize, delta_clip: f64, unit: PrivacyUnit, client_clip: Option<ClientClipBounds>) -> LloydsConfig {
    LloydsConfig { rounds, eps_g: 1.5, eps_l: 0.5, delta: 5e-7, delta_clip, unit, client_clip }
}

#[test]
fn data_point_pipeline_rounds_and_ledger() {
    let data = small_federation(1, 10);
    let budget = InitBudget::default_for(PrivacyUnit::DataPoint, 1.0, 2.5e-7).unwrap();
    let mut run = FedRun::new(SeedStream::new(7), true);
    let init = run_feddp_init(&mut run, &data.clients.partition, &data.server, &InitConfig::new(5, budget, PrivacyUnit::DataPoint)).unwrap();
    assert_eq!(run.rounds(), 3);
    assert_eq!(run.ledger().len(), 4);
    let traj = run_feddp_lloyds(&mut run, &data.clients.partition, &init.centers, &lloyds_cfg(2, init.delta_clip, PrivacyUnit::DataPoint, None)).unwrap();
    assert_eq!(run.rounds(), 5);
    assert_eq!(run.ledger().len(), 8);
    assert_eq!(traj.centers.len(), 3);
    let total = compose_basic(run.ledger()).unwrap();
    assert!((total.epsilon - 3.0).abs() < 1e-12);
    assert!((total.delta - 1e-6).abs() < 1e-18);
    assert!(traj.last().is_finite());
}

#[test]
fn client_level_pipeline_rounds_and_ledger() {
    let data = small_federation(2, 20);
    let server = &data.server;
    let mut rng = SeedStream::new(3).rng();
    let seeds = weighted_kmeans_pp_seed(&WeightedPoints::unit(server.clone()), 5, &mut rng).unwrap();
    let labels = assign(server, &seeds).unwrap().0;
    let clip = ClientClipBounds::from_server_proxy(server, &labels, 5, 100, SeedStream::new(4)).unwrap();
    let budget = InitBudget::default_for(PrivacyUnit::Client, 2.0, 2.5e-7).unwrap();
    let mut cfg = InitConfig::new(5, budget, PrivacyUnit::Client);
    cfg.client_clip = Some(clip);
    let mut run = FedRun::new(SeedStream::new(8), true);
    let init = run_feddp_init(&mut run, &data.clients.partition, server, &cfg).unwrap();
    assert_eq!(run.rounds(), 3);
    let traj = run_feddp_lloyds(&mut run, &data.clients.partition, &init.centers, &lloyds_cfg(3, init.delta_clip, PrivacyUnit::Client, Some(clip))).unwrap();
    assert_eq!(run.rounds(), 6);
    assert_eq!(run.ledger().len(), 10);
    assert!(traj.last().is_finite());

    let mut bare = FedRun::new(SeedStream::new(8), true);
    let no_clip = InitConfig::new(5, budget, PrivacyUnit::Client);
    assert!(run_feddp_init(&mut bare, &data.clients.partition, server, &no_clip).is_err());
    assert_eq!(bare.rounds(), 0);
}

#[test]
fn noise_free_lloyds_matches_centralized_lloyd() {
    for seed in 0..3 {
        let data = small_federation(10 + seed, 4);
        let all = data.clients.partition.union();
        let init = weighted_kmeans_pp_seed(&WeightedPoints::unit(all.clone()), 5, &mut SeedStream::new(seed).rng()).unwrap();
        let central = weighted_lloyd(&WeightedPoints::unit(all.clone()), &init, LloydParams { max_iters: 25, tol: 0.0 }).unwrap();

        let clip = all.max_norm() * 2.0;
        let single = ClientPartition::single(all.clone());
        let mut run = FedRun::new(SeedStream::new(seed), false);
        let traj = run_feddp_lloyds(&mut run, &single, &init, &lloyds_cfg(25, clip, PrivacyUnit::DataPoint, None)).unwrap();
        assert_eq!(run.rounds(), 25);
        assert_eq!(kmeans_cost(&all, traj.last()).unwrap(), kmeans_cost(&all, &central.centers).unwrap());

        // four clients sum in a different order; agreement is up to rounding
        let mut run = FedRun::new(SeedStream::new(seed), false);
        let traj = run_feddp_lloyds(&mut run, &data.clients.partition, &init, &lloyds_cfg(25, clip, PrivacyUnit::DataPoint, None)).unwrap();
        assert_eq!(run.rounds(), 25);
        let (a, b) = (kmeans_cost(&all, traj.last()).unwrap(), kmeans_cost(&all, &central.centers).unwrap());
        assert!((a - b).abs() <= 1e-9 * b);
    }
}

#[test]
fn mixture_second_moment_spans_the_means() {
    let data = small_federation(5, 1);
    let all = data.clients.partition.union();
    let p = top_k_projector(&outer_product(&all), 5).unwrap();
    for mu in data.spec.means.rows() {
        let residual: f64 = mu.iter().zip(p.apply(mu)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let len = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(residual < 0.05 * len, "residual {residual} for |mu| = {len}");
    }
}

#[test]
fn theory_preprocessing_round_counts() {
    let data = small_federation(6, 5);
    let n = data.clients.partition.num_points();
    let all = data.clients.partition.union();
    let projector = top_k_projector(&outer_product(&all), 5).unwrap();

    let (eps, w_min) = (2.0, 0.2);
    let expected = simplify_iterations(data.server.len(), eps, w_min);
    let mut run = FedRun::new(SeedStream::new(1), true);
    let frozen = simplify_server_data(&mut run, &data.server, &data.clients.partition, &projector, eps, n, w_min).unwrap();
    assert_eq!(frozen.iterations, expected);
    assert_eq!(run.rounds(), expected);
    assert_eq!(run.ledger().len(), expected);
    assert!((compose_basic(run.ledger()).unwrap().epsilon - eps).abs() < 1e-12);
    assert!(!frozen.frozen.is_empty());

    let params = DiameterParams::from_model(n, all.dim(), data.server.len(), eps, data.spec.variance, w_min);
    let mut run = FedRun::new(SeedStream::new(2), true);
    let reduced = reduce_diameter(&mut run, &data.server, &data.clients.partition, eps, &params).unwrap();
    assert_eq!(run.rounds(), 1);
    assert!(reduced.graph.num_components() >= 1);
    assert_eq!(reduced.partition.num_points(), n);
}

#[test]
fn clipping_radius_defaults_to_server_radius() {
    let data = small_federation(9, 2);
    let mut run = FedRun::new(SeedStream::new(0), false);
    let budget = InitBudget::default_for(PrivacyUnit::DataPoint, 1.0, 1e-7).unwrap();
    let init = run_feddp_init(&mut run, &data.clients.partition, &data.server, &InitConfig::new(5, budget, PrivacyUnit::DataPoint)).unwrap();
    assert_eq!(run.rounds(), 3);
    assert_eq!(init.delta_clip, server_radius(&data.server).unwrap());
    let far = Points::from_rows(&[vec![100.0; 20]]).unwrap();
    let mut run = FedRun::new(SeedStream::new(0), false);
    assert!(run_feddp_init(&mut run, &ClientPartition::single(far), &Points::empty(20), &InitConfig::new(1, budget, PrivacyUnit::DataPoint)).is_err());
    assert_eq!(run.rounds(), 0);
}
