mod support;

use std::sync::OnceLock;

use proptest::prelude::*;

use roomescape::geometry::Vec3;
use roomescape::protocol::AgentAction;
use roomescape::render::{cast_ray, center_ray_pick, look_at_to_angles, render_plain, Camera, Surface};
use roomescape::scene::SceneConfig;
use roomescape::world::{AgentPose, WorldState, AGENT_RADIUS};

use support::{free_pose, oracle_pick, rng, scene_pool, view_dir};

fn pool() -> &'static [SceneConfig] {
    static POOL: OnceLock<Vec<SceneConfig>> = OnceLock::new();
    POOL.get_or_init(scene_pool)
}

fn posed(seed: u64) -> WorldState {
    let scenes = pool();
    let mut state = WorldState::new(scenes[(seed % scenes.len() as u64) as usize].clone());
    state.pose = free_pose(&state, &mut rng(seed));
    state
}

/// Square-cornered obstacle test: the agent disc swept as its bounding square.
fn blocked(state: &WorldState, x: f64, z: f64) -> bool {
    let room = state.room();
    let r = AGENT_RADIUS;
    if x < r || z < r || x > room.width - r || z > room.depth - r {
        return true;
    }
    state.visible().any(|(_, p)| {
        let f = p.footprint();
        x > f.min_x - r && x < f.max_x + r && z > f.min_z - r && z < f.max_z + r
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn center_pick_matches_brute_force(seed in any::<u64>()) {
        let state = posed(seed);
        let cam = state.camera();
        let eye = support::eye_of(&state.pose);
        let dir = view_dir(state.pose.yaw, state.pose.pitch);
        let oracle = oracle_pick(&state, eye, dir);
        prop_assume!(oracle.margin > 1e-9);
        let pick = center_ray_pick(&state, &cam);
        match (oracle.hit, pick) {
            (None, None) => {}
            (Some((i, t)), Some(p)) => {
                prop_assert_eq!(p.placement, i);
                prop_assert!((p.distance - t).abs() < 1e-9);
            }
            (o, p) => prop_assert!(false, "oracle {:?} vs pick {:?}", o, p),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn center_pixel_agrees_with_pick(seed in any::<u64>(), size in prop::sample::select(vec![32u32, 64, 96])) {
        let state = posed(seed);
        let cam = state.camera().with_size(size, size).unwrap();
        let frame = render_plain(&state, &cam);
        let center = frame.surface_at(size / 2, size / 2);
        match center_ray_pick(&state, &cam) {
            Some(p) => prop_assert_eq!(center, Surface::Object(p.placement)),
            None => prop_assert!(!matches!(center, Surface::Object(_))),
        }
    }

    #[test]
    fn pick_does_not_depend_on_resolution(seed in any::<u64>()) {
        let state = posed(seed);
        let base = center_ray_pick(&state, &state.camera());
        for size in [2u32, 64, 300, 1024] {
            let cam = state.camera().with_size(size, size).unwrap();
            prop_assert_eq!(&center_ray_pick(&state, &cam), &base);
        }
    }

    #[test]
    fn look_at_centers_the_chosen_point(seed in any::<u64>(), u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let state = posed(seed);
        let cam = state.camera();
        let dir = cam.ray(u, v);
        let hit = cast_ray(&state, cam.eye(), dir);
        let point = cam.eye() + dir * hit.distance;
        let (yaw, pitch) = look_at_to_angles(&cam, u, v).unwrap();
        prop_assume!(pitch.abs() <= 85.0);
        let turned = Camera::agent(AgentPose::new(state.pose.position[0], state.pose.position[1], yaw, pitch));
        let (pu, pv) = turned.project(point).unwrap();
        let px = cam.width as f64;
        prop_assert!(((pu - 0.5) * px).abs() <= 1.0 && ((pv - 0.5) * px).abs() <= 1.0, "({pu}, {pv})");
    }

    #[test]
    fn look_at_center_is_a_no_op(seed in any::<u64>(), repeats in 1usize..6) {
        let mut state = posed(seed);
        let before = state.pose;
        prop_assert_eq!(look_at_to_angles(&state.camera(), 0.5, 0.5).unwrap(), (before.yaw, before.pitch));
        let action = AgentAction { look_at: Some([0.5, 0.5]), ..AgentAction::default() };
        for _ in 0..repeats {
            state.step(&action).unwrap();
        }
        prop_assert_eq!(state.pose, before);
    }

    #[test]
    fn moves_never_enter_obstacles(seed in any::<u64>(), moves in prop::collection::vec((-5.0f64..5.0, 0.0f64..360.0), 1..8)) {
        let mut state = posed(seed);
        for (d, yaw) in moves {
            state.pose.yaw = yaw;
            let start = state.pose.position;
            let traveled = state.apply_move(d);
            prop_assert!(traveled >= 0.0 && traveled <= d.abs() + 1e-12);
            let [x, z] = state.pose.position;
            let moved = ((x - start[0]).powi(2) + (z - start[1]).powi(2)).sqrt();
            prop_assert!((moved - traveled).abs() < 1e-9);
            let room = state.room();
            let eps = 1e-9;
            prop_assert!(x >= AGENT_RADIUS - eps && x <= room.width - AGENT_RADIUS + eps);
            prop_assert!(z >= AGENT_RADIUS - eps && z <= room.depth - AGENT_RADIUS + eps);
            for (_, p) in state.visible() {
                prop_assert!(p.footprint().distance_to(x, z) >= AGENT_RADIUS - eps, "inside {}", p.object);
            }
        }
    }

    #[test]
    fn moves_stop_at_first_contact(seed in any::<u64>(), d in -5.0f64..5.0) {
        let mut state = posed(seed);
        let [x0, z0] = state.pose.position;
        let (mut hx, mut hz) = (state.pose.yaw.to_radians().sin(), state.pose.yaw.to_radians().cos());
        if d < 0.0 {
            hx = -hx;
            hz = -hz;
        }
        let traveled = state.apply_move(d);
        let n = (traveled / 1e-3).ceil() as usize;
        for k in 0..=n {
            let t = (k as f64 * 1e-3).min(traveled);
            prop_assert!(!blocked(&state, x0 + hx * t, z0 + hz * t), "blocked at {t} of {traveled}");
        }
        if traveled < d.abs() {
            let t = traveled + 1e-6;
            prop_assert!(blocked(&state, x0 + hx * t, z0 + hz * t), "stopped early at {traveled} of {}", d.abs());
        }
    }

    #[test]
    fn empty_room_moves_reach_the_inset_walls(seed in any::<u64>(), d in -8.0f64..8.0) {
        let mut state = posed(seed);
        state.scene.rooms[0].placements.clear();
        let [x, z] = state.pose.position;
        let (w, dp) = (state.room().width, state.room().depth);
        let r = AGENT_RADIUS;
        let (mut hx, mut hz) = (state.pose.yaw.to_radians().sin(), state.pose.yaw.to_radians().cos());
        if d < 0.0 {
            hx = -hx;
            hz = -hz;
        }
        let inside = |t: f64| {
            let (px, pz) = (x + hx * t, z + hz * t);
            px >= r && px <= w - r && pz >= r && pz <= dp - r
        };
        let (mut lo, mut hi) = (0.0f64, d.abs());
        if inside(hi) {
            lo = hi;
        } else {
            for _ in 0..200 {
                let mid = (lo + hi) / 2.0;
                if inside(mid) { lo = mid } else { hi = mid }
            }
        }
        let traveled = state.apply_move(d);
        prop_assert!((traveled - lo).abs() < 1e-8, "{traveled} vs {lo}");
    }
}

#[test]
fn wall_standoff_example() {
    let mut state = WorldState::new(pool()[0].clone());
    state.scene.rooms[0].placements.clear();
    let w = state.room().width;
    state.pose = AgentPose::new(w - 1.0, state.room().depth / 2.0, 90.0, 0.0);
    let traveled = state.apply_move(5.0);
    assert!((traveled - 0.7).abs() < 1e-8, "{traveled}");
    assert!((state.pose.position[0] - (w - 0.3)).abs() < 1e-8);
    assert!(state.apply_move(1.0) < 1e-8);
}

#[test]
fn corner_look_at_turns_up_and_left() {
    let state = posed(3);
    let mut cam = state.camera();
    cam.pose.pitch = 0.0;
    let (yaw, pitch) = look_at_to_angles(&cam, 0.0, 0.0).unwrap();
    let dy = roomescape::geometry::angle_delta(cam.pose.yaw, yaw);
    assert!(dy < 0.0 && pitch < 0.0, "{dy} {pitch}");
    assert!((pitch + 30.0).abs() < 30.0);
}

#[test]
fn eye_ray_matches_angle_convention() {
    let cam = Camera::agent(AgentPose::new(1.0, 1.0, 90.0, 0.0));
    let f = cam.ray(0.5, 0.5);
    assert!((f - Vec3::new(1.0, 0.0, 0.0)).length() < 1e-12);
    let down = Camera::agent(AgentPose::new(1.0, 1.0, 0.0, 90.0)).ray(0.5, 0.5);
    assert!((down - Vec3::new(0.0, -1.0, 0.0)).length() < 1e-12);
}
