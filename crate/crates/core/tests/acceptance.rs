//! Acceptance suite. Each test prints one line of the form
//! `acceptance NN <name>: PASS|FAIL (<detail>, <elapsed>)` and then asserts.
//! Run with `cargo test -p proxekit --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proxekit::denoise::{
    blended_denoise_with, encode, invert, step_forward, transfer_features, BlendOptions, BlendSchedule, FeatureGrid,
    LatentGrid, ReferenceDenoiser, Trajectories,
};
use proxekit::dsl::{apply_script, parse_script, EditOp};
use proxekit::fit::decompose;
use proxekit::metrics::chamfer;
use proxekit::pipeline::{run_pipeline, PipelineConfig};
use proxekit::proxy::{diff_proxies, Primitive, Proxy, DEFAULT_DIFF_TOLERANCE};
use proxekit::voxel::{masks_from_diff, voxelize_mesh, voxelize_proxy, MaskOptions};
use proxekit::warp::{build_warp_field, relative_transform, warp_grid, DEFAULT_DELTA};
use proxekit::{Mat4, OccupancyGrid, SuperquadricParams, TriangleMesh, Vec3};

fn verdict(id: u32, name: &str, budget: Duration, start: Instant, outcome: Result<String, String>) {
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (false, format!("{d}; over budget {budget:?}")),
        Err(d) => (false, d),
    };
    println!(
        "acceptance {id:02} {name}: {} ({detail}, {:.2}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> SuperquadricParams {
    SuperquadricParams::new(
        [rng.random_range(0.05..0.4), rng.random_range(0.05..0.4), rng.random_range(0.05..0.4)],
        [rng.random_range(0.1..1.9), rng.random_range(0.1..1.9)],
        [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)],
        [rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI)],
    )
    .unwrap()
}

/// Independent rotation: product of the three elementary rotations.
fn oracle_rotation(r: [f64; 3]) -> Matrix3<f64> {
    let (sx, cx) = r[0].sin_cos();
    let (sy, cy) = r[1].sin_cos();
    let (sz, cz) = r[2].sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    rx * ry * rz
}

fn oracle_implicit(q: &SuperquadricParams, p: &Vec3) -> f64 {
    let r = oracle_rotation(q.rotation());
    let d = r.transpose() * (p - Vec3::from(q.translation()));
    let [a1, a2, a3] = q.scale();
    let [e1, e2] = q.shape();
    let xy = (d.x / a1).abs().powf(2.0 / e2) + (d.y / a2).abs().powf(2.0 / e2);
    xy.powf(e2 / e1) + (d.z / a3).abs().powf(2.0 / e1)
}

#[test]
fn a01_implicit_consistency() {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut worst_frame, mut worst_surface, mut worst_pose) = (0.0f64, 0.0f64, 0.0f64);
        for case in 0..1000 {
            let q = random_params(&mut rng);
            let p = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));

            let f = q.implicit_value(&p);
            let via_local = q.implicit_local(&q.to_local(&p));
            let via_inverse = q.implicit_local(&q.pose_inverse().transform_point(&p));
            let oracle = oracle_implicit(&q, &p);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
            worst_frame = worst_frame.max(rel(f, via_local)).max(rel(f, via_inverse)).max(rel(f, oracle));
            check(q.inside(&p) == (f <= 1.0), || format!("case {case}: inside disagrees with f = {f}"))?;

            for s in q.sample_surface(16) {
                worst_surface = worst_surface.max((q.implicit_value(&s) - 1.0).abs());
            }

            let back = q.pose_matrix().transform_point(&q.pose_inverse().transform_point(&p));
            let id = Mat4(q.pose_matrix().0 * q.pose_inverse().0);
            worst_pose = worst_pose.max((back - p).norm()).max(id.max_abs_diff(&Mat4::identity()));
        }
        check(worst_frame < 1e-9, || format!("frame mismatch {worst_frame:e}"))?;
        check(worst_surface < 1e-6, || format!("surface residual {worst_surface:e}"))?;
        check(worst_pose < 1e-9, || format!("pose round trip {worst_pose:e}"))?;
        Ok(format!("frame {worst_frame:.1e}, surface {worst_surface:.1e}, pose {worst_pose:.1e}"))
    })();
    verdict(1, "implicit consistency", Duration::from_secs(5), start, outcome);
}

#[test]
fn a02_transform_algebra() {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let (a, b, c) = (random_params(&mut rng), random_params(&mut rng), random_params(&mut rng));
            let ab = relative_transform(&a, &b);
            let bc = relative_transform(&b, &c);
            let ac = relative_transform(&a, &c);
            let ba = relative_transform(&b, &a);
            let eye = Matrix4::identity();
            let diffs = [
                relative_transform(&a, &a).max_abs_diff(&Mat4::identity()),
                Mat4(bc.0 * ab.0).max_abs_diff(&ac),
                Mat4(ba.0 * ab.0).max_abs_diff(&Mat4(eye)),
                Mat4(ab.0 * a.pose_matrix().0).max_abs_diff(&b.pose_matrix()),
            ];
            check(ab.is_affine(), || "relative transform is not affine".into())?;
            worst = diffs.iter().fold(worst, |m, &d| m.max(d));
        }
        check(worst < 1e-8, || format!("worst deviation {worst:e}"))?;
        Ok(format!("worst deviation {worst:.1e}"))
    })();
    verdict(2, "transform algebra", Duration::from_secs(2), start, outcome);
}

#[test]
fn a03_voxel_volume() {
    let start = Instant::now();
    let outcome = (|| {
        let n = 64;
        let sphere = Proxy::new("s", vec![Primitive::new(0, SuperquadricParams::sphere(0.4, [0.0; 3]).unwrap())]).unwrap();
        let g = voxelize_proxy(&sphere, None, n).map_err(|e| e.to_string())?;
        let analytic = 4.0 / 3.0 * PI * 0.4f64.powi(3) * (n as f64).powi(3);
        let mut brute = 0usize;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let c = |t: usize| -0.5 + (t as f64 + 0.5) / n as f64;
                    if c(i) * c(i) + c(j) * c(j) + c(k) * c(k) <= 0.16 {
                        brute += 1;
                    }
                }
            }
        }
        check(g.count() == brute, || format!("sphere {} cells, brute force {brute}", g.count()))?;
        let rel = (g.count() as f64 - 70_300.0).abs() / 70_300.0;
        check(rel <= 0.02, || format!("sphere {} cells, {:.2}% off 70300", g.count(), rel * 100.0))?;
        let rel_analytic = (g.count() as f64 - analytic).abs() / analytic;
        check(rel_analytic <= 0.02, || format!("sphere {} vs analytic {analytic:.0}", g.count()))?;

        let cube = TriangleMesh::cuboid(Vec3::repeat(-0.25), Vec3::repeat(0.25));
        let b = voxelize_mesh(&cube, n).map_err(|e| e.to_string())?;
        let (lo, hi) = (30usize.pow(3), 34usize.pow(3));
        check((lo..=hi).contains(&b.count()), || format!("box {} cells outside [{lo}, {hi}]", b.count()))?;
        Ok(format!("sphere {} cells ({:+.2}%), box {} cells", g.count(), rel * 100.0, b.count()))
    })();
    verdict(3, "voxel volume", Duration::from_secs(3), start, outcome);
}

/// A random edit: each primitive is kept, moved, reshaped or deleted, and
/// sometimes one is added.
fn random_edit(rng: &mut ChaCha8Rng, orig: &Proxy) -> Proxy {
    let mut prims = Vec::new();
    for p in orig.primitives() {
        match rng.random_range(0..4) {
            0 => prims.push(p.clone()),
            1 => {
                let t = p.params.translation();
                let moved = [t[0] + rng.random_range(-0.2..0.2), t[1], t[2] + rng.random_range(-0.2..0.2)];
                prims.push(Primitive { params: p.params.with_translation(moved).unwrap(), ..p.clone() });
            }
            2 => {
                let s = p.params.scale().map(|a| a * rng.random_range(0.6..1.4));
                prims.push(Primitive { params: p.params.with_scale(s).unwrap(), ..p.clone() });
            }
            _ => {}
        }
    }
    if rng.random_bool(0.5) {
        prims.push(Primitive::new(100, random_params(rng)));
    }
    Proxy::new(orig.category(), prims).unwrap()
}

fn random_proxy(rng: &mut ChaCha8Rng) -> Proxy {
    let k = rng.random_range(1..=4);
    Proxy::new("random", (0..k).map(|i| Primitive::new(i, random_params(rng))).collect()).unwrap()
}

#[test]
fn a04_mask_algebra() {
    let start = Instant::now();
    let outcome = (|| {
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nonempty = 0;
        for case in 0..200 {
            let orig = random_proxy(&mut rng);
            let edit = random_edit(&mut rng, &orig);
            let diff = diff_proxies(&orig, &edit, DEFAULT_DIFF_TOLERANCE);
            let grid_orig = voxelize_proxy(&orig, None, n).unwrap();
            let m = masks_from_diff(&diff, &grid_orig, &orig, &edit, MaskOptions::default()).unwrap();
            check(m.is_disjoint(), || format!("case {case}: masks overlap"))?;

            // Set algebra evaluated cell by cell from the primitives.
            let contains = |prims: &[&Primitive], c: &Vec3| prims.iter().any(|p| p.params.inside(c));
            let edited_new: Vec<&Primitive> = diff.edited.iter().map(|(_, e)| e).collect();
            let edited_old: Vec<&Primitive> = diff.edited.iter().map(|(o, _)| o).collect();
            let created: Vec<&Primitive> = diff.added.iter().chain(&diff.deleted).collect();
            for idx in 0..grid_orig.len() {
                let c = grid_orig.center(idx);
                let in_new = contains(&created, &c);
                let in_ed = contains(&edited_new, &c) && !in_new;
                let in_fp = in_new || in_ed || contains(&edited_old, &c);
                let in_uc = grid_orig.at(idx) && !in_fp;
                let got = (m.new.at(idx), m.ed.at(idx), m.uc.at(idx), m.footprint.at(idx));
                check(got == (in_new, in_ed, in_uc, in_fp), || format!("case {case}, cell {idx}: {got:?}"))?;
            }
            if m.ed.count() + m.new.count() > 0 {
                nonempty += 1;
            }

            let same = diff_proxies(&orig, &orig, DEFAULT_DIFF_TOLERANCE);
            let id = masks_from_diff(&same, &grid_orig, &orig, &orig, MaskOptions::default()).unwrap();
            check(id.uc == grid_orig && id.ed.count() == 0 && id.new.count() == 0, || {
                format!("case {case}: identity diff law broken")
            })?;
        }
        check(nonempty > 100, || format!("only {nonempty} cases exercised a non-empty edit"))?;
        Ok(format!("200 diffs, {nonempty} with non-empty edit masks"))
    })();
    verdict(4, "mask algebra", Duration::from_secs(10), start, outcome);
}

fn random_latent(rng: &mut ChaCha8Rng, n: usize) -> LatentGrid {
    LatentGrid::new(n, 0, (0..n * n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn a05_inversion_exactness() {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let steps = BlendSchedule::DEFAULT_TOTAL;
        for case in 0..50 {
            let cond = random_latent(&mut rng, 16);
            let d = ReferenceDenoiser::with_seed(&cond, steps, case).map_err(|e| e.to_string())?;
            let z0 = random_latent(&mut rng, 16);
            let traj = invert(&z0, &d, steps).map_err(|e| e.to_string())?;
            let mut z = traj[steps].clone();
            for t in (0..steps).rev() {
                z = step_forward(&d, &z).map_err(|e| e.to_string())?;
                check(z.bit_eq(&traj[t]), || format!("case {case}: mismatch at t = {t}"))?;
            }
        }
        Ok(format!("50 latents, {} steps each, bit-exact", steps))
    })();
    verdict(5, "inversion exactness", Duration::from_secs(5), start, outcome);
}

#[test]
fn a06_injection_dominance() {
    let start = Instant::now();
    let outcome = (|| {
        let n = 16;
        let sched = BlendSchedule::default();
        check((sched.total, sched.t_init, sched.t_warp, sched.t_uc) == (25, 13, 9, 5), || format!("{sched:?}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut checked = 0usize;
        for case in 0..20 {
            let orig = random_proxy(&mut rng);
            let edit = random_edit(&mut rng, &orig);
            let diff = diff_proxies(&orig, &edit, DEFAULT_DIFF_TOLERANCE);
            let grid_orig = voxelize_proxy(&orig, None, n).unwrap();
            let grid_proxy = voxelize_proxy(&edit, None, n).unwrap();
            let masks = masks_from_diff(&diff, &grid_orig, &orig, &edit, MaskOptions::default()).unwrap();
            let grid_warp = warp_grid(&grid_orig, &build_warp_field(&diff, DEFAULT_DELTA));

            let d = ReferenceDenoiser::with_seed(&encode(&grid_proxy), sched.total, case).unwrap();
            let tp = invert(&encode(&grid_proxy), &d, sched.t_init).unwrap();
            let to = invert(&encode(&grid_orig), &d, sched.t_init).unwrap();
            let tw = invert(&encode(&grid_warp), &d, sched.t_init).unwrap();
            let trajs = Trajectories { proxy: &tp, orig: &to, warp: &tw };
            let mut violation = None;
            let mut seen = Vec::new();
            blended_denoise_with(trajs, &masks, &sched, &d, BlendOptions::default(), |z| {
                let t = z.timestep();
                seen.push(t);
                if t > sched.t_uc && t <= sched.t_init {
                    for idx in (0..z.len()).filter(|&i| masks.uc.at(i)) {
                        checked += 1;
                        if z.get(idx).to_bits() != to[t].get(idx).to_bits() && violation.is_none() {
                            violation = Some((t, idx));
                        }
                    }
                }
            })
            .map_err(|e| e.to_string())?;
            check(violation.is_none(), || format!("case {case}: uc differs at (t, cell) = {violation:?}"))?;
            let expected: Vec<usize> = (0..=sched.t_init).rev().collect();
            check(seen == expected, || format!("case {case}: observed timesteps {seen:?}"))?;
        }
        check(checked > 0, || "no uc cells observed".into())?;
        Ok(format!("20 runs, {checked} cell checks"))
    })();
    verdict(6, "injection dominance", Duration::from_secs(10), start, outcome);
}

fn sphere_points(radius: f64, center: Vec3) -> Vec<Vec3> {
    TriangleMesh::icosphere(radius, center, 3).sample_surface(0.01)
}

#[test]
fn a07_identity_edit() {
    let start = Instant::now();
    let outcome = (|| {
        let mesh = TriangleMesh::icosphere(0.4, Vec3::zeros(), 4);
        let proxy = decompose(&sphere_points(0.4, Vec3::zeros()), 1, 0).map_err(|e| e.to_string())?;
        let script = parse_script("").unwrap();
        let cfg = PipelineConfig::default();
        let out = run_pipeline(&mesh, &proxy, &script, &cfg).map_err(|e| e.to_string())?;
        let input = voxelize_mesh(&mesh, cfg.resolution).unwrap();
        let iou = proxekit::metrics::grid_iou(&out.grid_out, &input).unwrap();
        let lgd = out.report.l_gd.ok_or_else(|| format!("l_gd missing: {:?}", out.report.notes))?;
        check(iou >= 0.98, || format!("iou {iou}"))?;
        check(lgd.abs() <= 1e-9, || format!("l_gd {lgd:e}"))?;
        Ok(format!("iou {iou:.4}, l_gd {lgd:.1e}"))
    })();
    verdict(7, "identity edit", Duration::from_secs(30), start, outcome);
}

#[test]
fn a08_translation_edit() {
    let start = Instant::now();
    let outcome = (|| {
        let (ca, cb) = (Vec3::new(-0.2, -0.25, 0.0), Vec3::new(-0.2, 0.25, 0.0));
        let mesh = TriangleMesh::icosphere(0.2, ca, 4).merged(&TriangleMesh::icosphere(0.2, cb, 4));
        let proxy = Proxy::new(
            "pair",
            vec![
                Primitive::new(1, SuperquadricParams::sphere(0.2, ca.into()).unwrap()),
                Primitive::new(2, SuperquadricParams::sphere(0.2, cb.into()).unwrap()),
            ],
        )
        .unwrap();
        let script = parse_script("translate #2 by 0.2 0 0\n").unwrap();
        let cfg = PipelineConfig::default();
        let out = run_pipeline(&mesh, &proxy, &script, &cfg).map_err(|e| e.to_string())?;
        check(out.diff.edited_ids() == vec![2], || format!("edited ids {:?}", out.diff.edited_ids()))?;

        let m = &out.masks;
        let uc_diff = (0..m.uc.len()).filter(|&i| m.uc.at(i) && out.grid_out.at(i) != out.grid_orig.at(i)).count();
        check(uc_diff == 0, || format!("{uc_diff} uc cells changed"))?;

        let oracle = warp_grid(&out.grid_orig, &build_warp_field(&out.diff, cfg.delta));
        let mass = |g: &OccupancyGrid| (0..g.len()).filter(|&i| m.ed.at(i) && g.at(i)).count() as f64;
        let (got, want) = (mass(&out.grid_out), mass(&oracle));
        check(want > 0.0, || "empty warp oracle in ed".into())?;
        let rel = (got - want).abs() / want;
        check(rel <= 0.10, || format!("ed mass {got} vs oracle {want}"))?;

        let lgd = out.report.l_gd.ok_or_else(|| format!("l_gd missing: {:?}", out.report.notes))?;
        check(lgd < 1e-3, || format!("l_gd {lgd:e}"))?;
        Ok(format!("ed mass {got} vs {want} ({:.1}%), l_gd {lgd:.2e}", rel * 100.0))
    })();
    verdict(8, "translation edit", Duration::from_secs(60), start, outcome);
}

#[test]
fn a09_fitting_recovery() {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut worst, mut worst_rms) = (0.0f64, 0.0f64);
        for case in 0..5 {
            let q = SuperquadricParams::new(
                [rng.random_range(0.1..0.3), rng.random_range(0.1..0.3), rng.random_range(0.1..0.3)],
                [rng.random_range(0.1..1.9), rng.random_range(0.1..1.9)],
                [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)],
                [rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI)],
            )
            .unwrap();
            let cloud = q.sample_surface(2000);
            let fitted = decompose(&cloud, 1, 7).map_err(|e| format!("case {case}: {e}"))?;
            check(fitted.len() == 1, || format!("case {case}: {} primitives", fitted.len()))?;
            let truth = q.sample_surface(4000);
            let got = fitted.primitives()[0].params.sample_surface(4000);
            let cd = chamfer(&got, &truth).unwrap();
            let amax = q.scale().into_iter().fold(0.0, f64::max);
            worst = worst.max(cd / amax);
            worst_rms = worst_rms.max(cd.sqrt() / amax);
            check(cd < 0.02 * amax, || format!("case {case}: chamfer {cd:e} vs bound {:e}", 0.02 * amax))?;

            let again = decompose(&cloud, 1, 7).unwrap();
            check(again.to_json() == fitted.to_json(), || format!("case {case}: not deterministic"))?;
        }
        Ok(format!("worst chamfer / max(a) {worst:.2e}, rms / max(a) {worst_rms:.2e}"))
    })();
    verdict(9, "fitting recovery", Duration::from_secs(60), start, outcome);
}

enum Expect {
    Ops(Vec<EditOp>),
    Error { line: usize, col: usize },
}

fn corpus() -> Vec<(&'static str, Expect)> {
    use EditOp::*;
    use Expect::*;
    vec![
        ("", Ops(vec![])),
        ("\n\n   \n", Ops(vec![])),
        ("# only a comment\n", Ops(vec![])),
        ("scale #3 by 1.0 1.0 1.5", Ops(vec![Scale { ids: vec![3], factors: [1.0, 1.0, 1.5] }])),
        ("SCALE #3 BY 2 2 2\n", Ops(vec![Scale { ids: vec![3], factors: [2.0; 3] }])),
        ("translate #1 #4 by 0 0.1 0", Ops(vec![Translate { ids: vec![1, 4], offset: [0.0, 0.1, 0.0] }])),
        ("rotate #2 by 0 0 0.5  # quarter-ish turn", Ops(vec![Rotate { ids: vec![2], angles: [0.0, 0.0, 0.5] }])),
        ("shape #2 by 0.3 1.0", Ops(vec![Shape { ids: vec![2], exponents: [0.3, 1.0] }])),
        ("delete #7", Ops(vec![Delete { ids: vec![7] }])),
        ("delete #1 #2 #3\n", Ops(vec![Delete { ids: vec![1, 2, 3] }])),
        (
            "add #9 scale 0.1 0.1 0.1 shape 1 1 at 0 0.2 0 rot 0 0 0",
            Ops(vec![Add { id: 9, params: [0.1, 0.1, 0.1, 1.0, 1.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0] }]),
        ),
        ("clone #1 as #10 offset 0.2 0 0", Ops(vec![Clone { source: 1, id: 10, offset: [0.2, 0.0, 0.0] }])),
        (
            "translate #1 by -1e-2 +0.5 3\ndelete #2\n",
            Ops(vec![Translate { ids: vec![1], offset: [-0.01, 0.5, 3.0] }, Delete { ids: vec![2] }]),
        ),
        ("\tscale\t#1\tby\t1 2 3\r\n", Ops(vec![Scale { ids: vec![1], factors: [1.0, 2.0, 3.0] }])),
        (
            "# header\n\nshape #5 by 0.1 1.9\n# trailer",
            Ops(vec![Shape { ids: vec![5], exponents: [0.1, 1.9] }]),
        ),
        ("shrink #3", Error { line: 1, col: 1 }),
        ("scale #3 by 1.0 1.5", Error { line: 1, col: 20 }),
        ("scale #3 by 1 1 1 1", Error { line: 1, col: 19 }),
        ("scale #3 by 1 x 1", Error { line: 1, col: 15 }),
        ("scale by 1 1 1", Error { line: 1, col: 7 }),
        ("delete #1\nfrobnicate #2", Error { line: 2, col: 1 }),
        ("translate #a by 0 0 0", Error { line: 1, col: 10 }),
        ("delete #1 now", Error { line: 1, col: 11 }),
        ("add #4 scale 1 1 1 shape 1 1 at 0 0 0 rot 0 0 0\nadd #4 scale 1 1 1 shape 1 1 at 0 0 0 rot 0 0 0", Error {
            line: 2,
            col: 5,
        }),
        ("add #4 scale 1 1 shape 1 1 at 0 0 0 rot 0 0 0", Error { line: 1, col: 18 }),
        ("clone #1 to #2 offset 0 0 0", Error { line: 1, col: 10 }),
        ("rotate #1 by 0 0 nan", Error { line: 1, col: 18 }),
        ("\n\n   scale #1 by 1 1", Error { line: 3, col: 19 }),
        ("shape #1 0.5 0.5", Error { line: 1, col: 10 }),
        ("delete", Error { line: 1, col: 7 }),
    ]
}

#[test]
fn a10_dsl_conformance() {
    let start = Instant::now();
    let outcome = (|| {
        let cases = corpus();
        check(cases.len() == 30, || format!("corpus has {} cases", cases.len()))?;
        let mut valid = 0;
        for (i, (src, expect)) in cases.iter().enumerate() {
            match (parse_script(src), expect) {
                (Ok(s), Expect::Ops(ops)) => {
                    check(&s.ops() == ops, || format!("case {i}: parsed {:?}", s.ops()))?;
                    let printed = s.to_canonical();
                    let reparsed = parse_script(&printed).map_err(|e| format!("case {i}: reparse: {e}"))?;
                    check(reparsed.ops() == s.ops(), || format!("case {i}: print/parse changed ops"))?;
                    check(reparsed.to_canonical() == printed, || format!("case {i}: printing not idempotent"))?;
                    valid += 1;
                }
                (Err(e), Expect::Error { line, col }) => {
                    check((e.line, e.col) == (*line, *col), || {
                        format!("case {i}: error at {}:{}, expected {line}:{col} ({e})", e.line, e.col)
                    })?;
                }
                (Ok(_), Expect::Error { .. }) => return Err(format!("case {i}: {src:?} parsed but should fail")),
                (Err(e), Expect::Ops(_)) => return Err(format!("case {i}: {src:?} failed: {e}")),
            }
        }
        Ok(format!("30 cases, {valid} valid round-tripped"))
    })();
    verdict(10, "dsl conformance", Duration::from_secs(1), start, outcome);
}

#[test]
fn a11_appearance_transfer() {
    let start = Instant::now();
    let outcome = (|| {
        let n = 16;
        let shift = 2usize;
        let box_q = SuperquadricParams::new([0.15, 0.12, 0.1], [0.1, 0.1], [-0.2, 0.1, 0.0], [0.0; 3]).unwrap();
        let ball = SuperquadricParams::sphere(0.15, [0.0, -0.25, 0.0]).unwrap();
        let orig = Proxy::new("pair", vec![Primitive::new(1, box_q), Primitive::new(2, ball)]).unwrap();
        let edit = apply_script(&parse_script(&format!("translate #1 by {} 0 0", shift as f64 / n as f64)).unwrap(), &orig)
            .map_err(|e| e.to_string())?;
        let diff = diff_proxies(&orig, &edit, DEFAULT_DIFF_TOLERANCE);
        let grid = voxelize_proxy(&orig, None, n).unwrap();
        let masks = masks_from_diff(&diff, &grid, &orig, &edit, MaskOptions::default()).unwrap();
        let field = build_warp_field(&diff, DEFAULT_DELTA);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let colors: Vec<[f64; 3]> = (0..grid.len()).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let feat = FeatureGrid::from_occupancy(&grid, |i| colors[i]);
        let out = transfer_features(&feat, &masks, &field, 0);

        let (mut ed_cells, mut uc_cells) = (0, 0);
        for idx in 0..grid.len() {
            let (i, j, k) = grid.coords(idx);
            if masks.ed.at(idx) {
                check(i >= shift, || format!("ed cell {idx} has no source"))?;
                let expect = feat.get(grid.index(i - shift, j, k));
                check(out.get(idx) == expect, || format!("ed cell ({i},{j},{k}): {:?} vs {expect:?}", out.get(idx)))?;
                ed_cells += 1;
            } else if masks.uc.at(idx) {
                check(out.get(idx) == feat.get(idx), || format!("uc cell ({i},{j},{k}) changed"))?;
                uc_cells += 1;
            }
        }
        check(ed_cells > 0 && uc_cells > 0, || format!("ed {ed_cells}, uc {uc_cells}"))?;
        Ok(format!("{ed_cells} ed and {uc_cells} uc cells exact"))
    })();
    verdict(11, "appearance transfer", Duration::from_secs(5), start, outcome);
}
