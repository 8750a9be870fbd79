mod support;

use frontmesh::field::{CountingField, Sdf};
use frontmesh::io::obj_string;
use frontmesh::mesher::{self, MesherError};
use frontmesh::predictor::{ConstantPredictor, Prediction, PredictorChoice};
use frontmesh::{Aabb, MeshingParams, Point3, TriMesh, Vec3};

fn params(r_d: f64, seeds: usize) -> MeshingParams {
    let mut p = MeshingParams::new(r_d);
    p.seeds = seeds;
    p.rng_seed = 3;
    p
}

#[test]
fn coarse_sphere_stays_valid_after_every_step() {
    let mut p = params(0.06, 4);
    p.validate_each_step = true;
    let (mesh, report) = mesher::run(&support::sphere(), &Aabb::cube(1.0), &p).unwrap();
    assert!(mesh.validate().is_clean());
    assert_eq!(report.faces_inserted + report.seed_faces, mesh.num_faces());
}

#[test]
fn torus_is_a_genus_one_surface_minus_its_holes() {
    for r_d in [0.02, 0.03] {
        let (mesh, report) = mesher::run(&support::torus(), &Aabb::cube(1.0), &params(r_d, 16)).unwrap();
        assert!(mesh.validate().is_clean());
        let loops = mesh.boundary_loops();
        // chi = 2 - 2g - b with g = 1
        assert_eq!(mesh.euler_characteristic(), -(loops.len() as i64), "r_d {r_d}");
        assert!(loops.iter().all(|l| l.len() <= 25));
        assert_eq!(report.remaining_boundary_edges, mesh.num_boundary_edges());
    }
}

#[test]
fn thread_count_does_not_change_the_mesh() {
    let field = support::blend();
    let p = params(0.02, 8);
    let (a, ra) = mesher::run_with_threads(&field, &Aabb::cube(1.0), &p, 1).unwrap();
    let (b, rb) = mesher::run_with_threads(&field, &Aabb::cube(1.0), &p, 8).unwrap();
    assert_eq!(obj_string(&TriMesh::from(&a)), obj_string(&TriMesh::from(&b)));
    assert_eq!(ra.queries, rb.queries);
    let (c, _) = mesher::run_with_threads(&field, &Aabb::cube(1.0), &p, 8).unwrap();
    assert_eq!(obj_string(&TriMesh::from(&b)), obj_string(&TriMesh::from(&c)));
}

#[test]
fn seed_changes_the_mesh() {
    let field = support::sphere();
    let (a, _) = mesher::run(&field, &Aabb::cube(1.0), &params(0.04, 4)).unwrap();
    let mut other = params(0.04, 4);
    other.rng_seed = 4;
    let (b, _) = mesher::run(&field, &Aabb::cube(1.0), &other).unwrap();
    assert_ne!(obj_string(&TriMesh::from(&a)), obj_string(&TriMesh::from(&b)));
}

#[test]
fn report_counts_every_field_query() {
    let field = CountingField::new(support::sphere());
    let (_, report) = mesher::run(&field, &Aabb::cube(1.0), &params(0.04, 4)).unwrap();
    // the outer counter sees exactly what the run reports
    assert_eq!(field.counts(), report.queries);
    assert!(report.queries.curvature_evals > 0 && report.queries.gradient_evals > 0);
}

#[test]
fn surface_leaving_the_box_freezes_the_rim() {
    let plane = Sdf::plane(Point3::origin(), Vec3::new(0.1, 0.2, 1.0));
    let bbox = Aabb::new(Point3::new(-0.3, -0.3, -0.3), Point3::new(0.3, 0.3, 0.3));
    let (mesh, report) = mesher::run(&plane, &bbox, &params(0.03, 2)).unwrap();
    assert!(mesh.validate().is_clean());
    assert!(report.frozen_edges > 0);
    assert_eq!(mesh.boundary_loops().len(), report.remaining_boundary_edges.min(1));
    assert!(mesh.positions().all(|p| bbox.contains(&p)));
}

#[test]
fn empty_box_is_an_error() {
    let far = Sdf::sphere(Point3::new(5.0, 0.0, 0.0), 0.3);
    assert!(matches!(mesher::run(&far, &Aabb::cube(1.0), &params(0.05, 4)), Err(MesherError::NoSurface)));
}

#[test]
fn invalid_parameters_are_rejected_before_meshing() {
    let mut p = params(0.05, 4);
    p.t_near = 0.0;
    assert!(matches!(mesher::run(&support::sphere(), &Aabb::cube(1.0), &p), Err(MesherError::Params(_))));
    let mut p = params(0.05, 4);
    p.predictor = PredictorChoice::Mlp("/does/not/exist.json".into());
    assert!(matches!(mesher::run(&support::sphere(), &Aabb::cube(1.0), &p), Err(MesherError::Predictor(_))));
}

#[test]
fn constant_choice_matches_explicit_predictor() {
    let field = support::sphere();
    let mut p = params(0.05, 4);
    p.predictor = PredictorChoice::Constant(Prediction::new(0.1, 0.05));
    let (a, _) = mesher::run(&field, &Aabb::cube(1.0), &p).unwrap();
    let (b, _) = mesher::run_with_predictor(&field, &Aabb::cube(1.0), &p, &ConstantPredictor(Prediction::new(0.1, 0.05))).unwrap();
    assert_eq!(TriMesh::from(&a), TriMesh::from(&b));
}
