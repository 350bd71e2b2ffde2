//! Closed-loop navigation episodes against the surrogate robot.
//!
//! One trial runs the surrogate at its control rate (50 Hz by default) and
//! replans every `replan_period` steps (25 Hz planning by default).  Between
//! replans the last dispatched command is held.  For the learned predictor
//! the latent state is maintained by the observer from the noisy
//! measurement stream, exactly mirroring the training convention: the pair
//! `(y_k, u_k)` — the measurement at step `k` and the command applied from
//! `k` to `k+1` — drives one observer update, so at plan time the latent
//! summarizes all completed steps and the rollout is anchored at the
//! current pose.
//!
//! The planner receives the surrogate's true planar pose (perfect
//! localization; `pose_noise` optionally perturbs it for robustness
//! studies).  Ground-truth collision is independent of the planner's cloud
//! model: after every step the full forward-kinematics cloud is transformed
//! by the true pose and any occupied-voxel hit aborts the trial.
//!
//! A trial succeeds when the pose error stays below the position and yaw
//! tolerances for `success_hold` seconds continuously; `time_to_track` is
//! the start of that interval.  Reaching `max_duration` first is a timeout;
//! timeout and collision both count as failures.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use psr_core::model::ModelParams;
use psr_core::observer::observer_step;
use psr_core::occupancy::{fk_occupancy, BodyGeometry, OccupancySampling};
use psr_core::sampling::standard_normal;
use psr_core::surrogate::{Surrogate, SurrogateConfig};
use psr_core::types::{wrap_angle, Command, PlanarPose, JOINT_DIM};

use crate::cost::{count_cloud_hits, GoalPose};
use crate::mppi::{mppi_step, CloudSource, MppiConfig, MppiState, PredictorChoice, RolloutSource};
use crate::voxel::VoxelMap;
use crate::{PlannerError, Result};

/// Closed-loop episode parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavigationConfig {
    /// Surrogate steps between planning cycles.
    pub replan_period: usize,
    /// Episode cap \[s\].
    pub max_duration: f64,
    /// Position tolerance for success \[m\].
    pub success_position_tolerance: f64,
    /// Yaw tolerance for success \[rad\].
    pub success_yaw_tolerance: f64,
    /// Time the pose must stay within tolerance \[s\].
    pub success_hold: f64,
    /// Std of planar pose noise fed to the planner (0 = perfect
    /// localization).
    pub pose_noise: f64,
    /// Start pose x \[m\].
    pub start_x: f64,
    /// Start pose y \[m\].
    pub start_y: f64,
    /// Start pose yaw \[rad\].
    pub start_yaw: f64,
}

impl Default for NavigationConfig {
    fn default() -> Self {
        NavigationConfig {
            replan_period: 2,
            max_duration: 30.0,
            success_position_tolerance: 0.2,
            success_yaw_tolerance: 0.2,
            success_hold: 1.0,
            pose_noise: 0.0,
            start_x: 0.0,
            start_y: 0.0,
            start_yaw: 0.0,
        }
    }
}

impl NavigationConfig {
    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        if self.replan_period == 0 {
            return Err(PlannerError::OutOfRange {
                context: "NavigationConfig replan_period",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        let positive: [(&'static str, f64); 4] = [
            ("NavigationConfig max_duration", self.max_duration),
            (
                "NavigationConfig success_position_tolerance",
                self.success_position_tolerance,
            ),
            (
                "NavigationConfig success_yaw_tolerance",
                self.success_yaw_tolerance,
            ),
            ("NavigationConfig success_hold", self.success_hold),
        ];
        for (context, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(PlannerError::OutOfRange {
                    context,
                    value,
                    range: "(0, inf)",
                });
            }
        }
        if !(self.pose_noise.is_finite() && self.pose_noise >= 0.0) {
            return Err(PlannerError::OutOfRange {
                context: "NavigationConfig pose_noise",
                value: self.pose_noise,
                range: "[0, inf)",
            });
        }
        if !(self.start_x.is_finite() && self.start_y.is_finite() && self.start_yaw.is_finite()) {
            return Err(PlannerError::NonFinite("NavigationConfig start pose"));
        }
        Ok(())
    }
}

/// Everything one episode needs; borrowed so trials share models and maps.
pub struct NavigationTask<'a> {
    /// Occupied environment.
    pub map: &'a VoxelMap,
    /// Target pose.
    pub goal: GoalPose,
    /// Planner constants.
    pub mppi: &'a MppiConfig,
    /// Episode constants.
    pub nav: &'a NavigationConfig,
    /// Robot model under control.
    pub surrogate: &'a SurrogateConfig,
    /// Cloud density of the baseline's static body model.
    pub planner_sampling: &'a OccupancySampling,
    /// Learned predictor (required for [`PredictorChoice::Learned`]).
    pub model: Option<&'a ModelParams>,
    /// Collision clouds for learned rollouts (required for
    /// [`PredictorChoice::Learned`]): the learned occupancy model, or the
    /// exact forward-kinematics oracle for validation runs.
    pub clouds: Option<CloudSource<'a>>,
}

/// Outcome of one episode.
#[derive(Debug, Clone)]
pub struct TrialResult {
    /// RNG seed of the trial.
    pub seed: u64,
    /// Whether the pose tolerance was held for the required time.
    pub success: bool,
    /// Start of the successful hold interval \[s\].
    pub time_to_track: Option<f64>,
    /// Whether a ground-truth body point entered an occupied voxel.
    pub collision: bool,
    /// Time of the collision \[s\].
    pub collision_time: Option<f64>,
    /// Planar distance to the goal when the episode ended \[m\].
    pub final_position_error: f64,
    /// Absolute wrapped yaw error when the episode ended \[rad\].
    pub final_yaw_error: f64,
    /// Simulated time elapsed \[s\].
    pub sim_duration: f64,
    /// Number of planning cycles executed.
    pub plan_cycles: usize,
    /// True pose at every step (start pose first).
    pub trajectory: Vec<PlanarPose>,
}

/// Aggregate statistics over a batch of trials.
#[derive(Debug, Clone, Serialize)]
pub struct NavigationSummary {
    /// Number of trials.
    pub trials: usize,
    /// Trials that reached and held the goal pose.
    pub successes: usize,
    /// Trials aborted by a ground-truth collision.
    pub collisions: usize,
    /// Trials that ran out of time without collision.
    pub timeouts: usize,
    /// Mean time-to-track over successful trials.
    pub mean_time_to_track: Option<f64>,
}

/// Summarizes a batch of trial results.
pub fn summarize(results: &[TrialResult]) -> NavigationSummary {
    let successes = results.iter().filter(|r| r.success).count();
    let collisions = results.iter().filter(|r| r.collision).count();
    let times: Vec<f64> = results.iter().filter_map(|r| r.time_to_track).collect();
    NavigationSummary {
        trials: results.len(),
        successes,
        collisions,
        timeouts: results.len() - successes - collisions,
        mean_time_to_track: if times.is_empty() {
            None
        } else {
            Some(times.iter().sum::<f64>() / times.len() as f64)
        },
    }
}

/// The standing joint configuration (zero abduction, nominal hip and knee
/// angles on every leg); the baseline's static body model is the forward
/// kinematics cloud at this configuration.
pub fn nominal_stance(cfg: &SurrogateConfig) -> DVector<f64> {
    let mut theta = DVector::zeros(JOINT_DIM);
    for leg in 0..4 {
        theta[3 * leg + 1] = cfg.nominal_hip;
        theta[3 * leg + 2] = cfg.nominal_knee;
    }
    theta
}

/// Runs one closed-loop episode.
pub fn run_trial(task: &NavigationTask, choice: PredictorChoice, seed: u64) -> Result<TrialResult> {
    task.nav.validate()?;
    task.mppi.validate()?;
    let surrogate = Surrogate::new(task.surrogate.clone())?;
    let dt = task.surrogate.dt;
    if (task.mppi.dt - dt).abs() > 1e-12 {
        return Err(PlannerError::OutOfRange {
            context: "run_trial planner dt (must equal the surrogate control interval)",
            value: task.mppi.dt,
            range: "{surrogate dt}",
        });
    }
    let (model, clouds) = match choice {
        PredictorChoice::Learned => {
            let model = task
                .model
                .ok_or(PlannerError::MissingInput("a predictor checkpoint"))?;
            let clouds = task
                .clouds
                .ok_or(PlannerError::MissingInput("a collision cloud source"))?;
            (Some(model), Some(clouds))
        }
        PredictorChoice::ConstantVelocity => (None, None),
    };

    let geometry = BodyGeometry::from_surrogate(task.surrogate);
    let truth_sampling = OccupancySampling::default();
    let cv_body = fk_occupancy(
        &geometry,
        task.planner_sampling,
        &nominal_stance(task.surrogate),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = surrogate.initial_state(PlanarPose::new(
        task.nav.start_x,
        task.nav.start_y,
        task.nav.start_yaw,
    ));
    let mut latent = model.map(|m| DVector::zeros(m.state_dim()));
    let mut planner_state = MppiState::new(task.mppi);
    let mut command = Command::zero();

    let max_steps = (task.nav.max_duration / dt).round().max(1.0) as usize;
    let hold_steps = (task.nav.success_hold / dt).round().max(1.0) as usize;
    let mut trajectory = Vec::with_capacity(max_steps + 1);
    let mut held = 0usize;
    let mut entered: Option<f64> = None;
    let mut success = false;
    let mut time_to_track = None;
    let mut collision = false;
    let mut collision_time = None;
    let mut plan_cycles = 0usize;
    let mut steps_taken = 0usize;

    trajectory.push(surrogate.full_config(&state).planar_pose());
    for step in 0..max_steps {
        let full = surrogate.full_config(&state);

        if step % task.nav.replan_period == 0 {
            let mut pose = full.planar_pose();
            if task.nav.pose_noise > 0.0 {
                pose.x += task.nav.pose_noise * standard_normal(&mut rng);
                pose.y += task.nav.pose_noise * standard_normal(&mut rng);
                pose.yaw = wrap_angle(pose.yaw + task.nav.pose_noise * standard_normal(&mut rng));
            }
            if step > 0 {
                planner_state.advance(task.nav.replan_period, task.mppi.horizon)?;
            }
            let source = match choice {
                PredictorChoice::Learned => RolloutSource::Learned {
                    model: model.unwrap(),
                    latent: latent.as_ref().unwrap(),
                    clouds: clouds.unwrap(),
                },
                PredictorChoice::ConstantVelocity => RolloutSource::ConstantVelocity {
                    body: &cv_body,
                },
            };
            let (u, _) = mppi_step(
                task.mppi,
                task.map,
                &task.goal,
                &source,
                pose,
                full.position.z,
                &mut planner_state,
                &mut rng,
            )?;
            command = u;
            plan_cycles += 1;
        }

        // Observer update with the pre-step measurement and the command
        // applied over this step, then the step itself.
        if let Some(x) = latent.as_mut() {
            let y = surrogate.measure(&state, &mut rng);
            *x = observer_step(&model.unwrap().observer, x, &y, command)?;
        }
        surrogate.step(&mut state, command);
        steps_taken = step + 1;
        let now = steps_taken as f64 * dt;
        let full = surrogate.full_config(&state);
        trajectory.push(full.planar_pose());

        if !task.map.is_empty() {
            let cloud = fk_occupancy(
                &geometry,
                &truth_sampling,
                &DVector::from_row_slice(&full.joints),
            )?;
            if count_cloud_hits(full.yaw, &full.position, &cloud.points, task.map) > 0 {
                collision = true;
                collision_time = Some(now);
                break;
            }
        }

        let position_error = (full.position.x - task.goal.x).hypot(full.position.y - task.goal.y);
        let yaw_error = wrap_angle(full.yaw - task.goal.yaw).abs();
        if position_error < task.nav.success_position_tolerance
            && yaw_error < task.nav.success_yaw_tolerance
        {
            if held == 0 {
                entered = Some(now);
            }
            held += 1;
        } else {
            held = 0;
            entered = None;
        }
        if held >= hold_steps {
            success = true;
            time_to_track = entered;
            break;
        }
    }

    let full = surrogate.full_config(&state);
    Ok(TrialResult {
        seed,
        success,
        time_to_track,
        collision,
        collision_time,
        final_position_error: (full.position.x - task.goal.x)
            .hypot(full.position.y - task.goal.y),
        final_yaw_error: wrap_angle(full.yaw - task.goal.yaw).abs(),
        sim_duration: steps_taken as f64 * dt,
        plan_cycles,
        trajectory,
    })
}

/// Runs one episode per seed.
pub fn run_navigation(
    task: &NavigationTask,
    choice: PredictorChoice,
    seeds: &[u64],
) -> Result<Vec<TrialResult>> {
    seeds.iter().map(|&s| run_trial(task, choice, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use psr_core::model::ModelConfig;
    use psr_core::nn::mlp::MlpParams;
    use psr_core::nn::TensorSet;
    use psr_core::occupancy::OccupancyModel;

    fn quick_mppi() -> MppiConfig {
        MppiConfig {
            samples: 4,
            horizon: 10,
            ..MppiConfig::default()
        }
    }

    fn quick_nav() -> NavigationConfig {
        NavigationConfig {
            success_hold: 0.2,
            max_duration: 2.0,
            ..NavigationConfig::default()
        }
    }

    fn task<'a>(
        map: &'a VoxelMap,
        goal: GoalPose,
        mppi: &'a MppiConfig,
        nav: &'a NavigationConfig,
        surrogate: &'a SurrogateConfig,
        sampling: &'a OccupancySampling,
    ) -> NavigationTask<'a> {
        NavigationTask {
            map,
            goal,
            mppi,
            nav,
            surrogate,
            planner_sampling: sampling,
            model: None,
            clouds: None,
        }
    }

    #[test]
    fn goal_at_the_start_pose_is_an_immediate_success() {
        let map = VoxelMap::new(0.1).unwrap();
        let mppi = quick_mppi();
        let nav = quick_nav();
        let surrogate = SurrogateConfig::default();
        let sampling = OccupancySampling::coarse();
        let t = task(
            &map,
            GoalPose::new(0.0, 0.0, 0.0),
            &mppi,
            &nav,
            &surrogate,
            &sampling,
        );
        let r = run_trial(&t, PredictorChoice::ConstantVelocity, 0).unwrap();
        assert!(r.success, "result {r:?}");
        assert!(!r.collision);
        assert!(r.time_to_track.unwrap() <= 0.1);
        assert!(r.sim_duration <= 0.5);
        assert_eq!(r.trajectory.len(), (r.sim_duration / 0.02).round() as usize + 1);
    }

    #[test]
    fn unreachable_goal_times_out_as_a_failure() {
        let map = VoxelMap::new(0.1).unwrap();
        let mppi = quick_mppi();
        let nav = NavigationConfig {
            max_duration: 0.4,
            ..quick_nav()
        };
        let surrogate = SurrogateConfig::default();
        let sampling = OccupancySampling::coarse();
        let t = task(
            &map,
            GoalPose::new(50.0, 0.0, 0.0),
            &mppi,
            &nav,
            &surrogate,
            &sampling,
        );
        let r = run_trial(&t, PredictorChoice::ConstantVelocity, 1).unwrap();
        assert!(!r.success);
        assert!(!r.collision);
        assert!((r.sim_duration - 0.4).abs() < 1e-9);
        let summary = summarize(&[r]);
        assert_eq!(summary.timeouts, 1);
        assert_eq!(summary.successes, 0);
    }

    #[test]
    fn a_collision_blind_planner_hits_the_wall_and_aborts() {
        let mut map = VoxelMap::new(0.1).unwrap();
        map.insert_box(Vector3::new(0.8, -2.0, 0.0), Vector3::new(1.2, 2.0, 1.0))
            .unwrap();
        // Zero collision weight: the planner drives straight for the goal
        // behind the wall; the ground-truth check must abort the trial.
        let mppi = MppiConfig {
            w_collision: 0.0,
            samples: 8,
            horizon: 20,
            ..MppiConfig::default()
        };
        let nav = NavigationConfig {
            max_duration: 8.0,
            ..quick_nav()
        };
        let surrogate = SurrogateConfig::default();
        let sampling = OccupancySampling::coarse();
        let t = task(
            &map,
            GoalPose::new(3.0, 0.0, 0.0),
            &mppi,
            &nav,
            &surrogate,
            &sampling,
        );
        let r = run_trial(&t, PredictorChoice::ConstantVelocity, 2).unwrap();
        assert!(r.collision, "result {r:?}");
        assert!(!r.success);
        assert!(r.collision_time.unwrap() < 8.0);
        let summary = summarize(&[r]);
        assert_eq!(summary.collisions, 1);
    }

    #[test]
    fn learned_predictor_without_a_model_is_rejected() {
        let map = VoxelMap::new(0.1).unwrap();
        let mppi = quick_mppi();
        let nav = quick_nav();
        let surrogate = SurrogateConfig::default();
        let sampling = OccupancySampling::coarse();
        let t = task(
            &map,
            GoalPose::new(1.0, 0.0, 0.0),
            &mppi,
            &nav,
            &surrogate,
            &sampling,
        );
        assert!(matches!(
            run_trial(&t, PredictorChoice::Learned, 0),
            Err(PlannerError::MissingInput(_))
        ));
    }

    #[test]
    fn mismatched_planner_dt_is_rejected() {
        let map = VoxelMap::new(0.1).unwrap();
        let mppi = MppiConfig {
            dt: 0.05,
            ..quick_mppi()
        };
        let nav = quick_nav();
        let surrogate = SurrogateConfig::default();
        let sampling = OccupancySampling::coarse();
        let t = task(
            &map,
            GoalPose::new(1.0, 0.0, 0.0),
            &mppi,
            &nav,
            &surrogate,
            &sampling,
        );
        assert!(run_trial(&t, PredictorChoice::ConstantVelocity, 0).is_err());
    }

    #[test]
    fn untrained_learned_model_runs_the_loop_end_to_end() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let model_cfg = ModelConfig {
            state_dim: 8,
            g_hidden: vec![8],
        };
        let model = ModelParams::init(&model_cfg, &mut rng);
        let surrogate = SurrogateConfig::default();
        let sampling = OccupancySampling::coarse();
        let geometry = BodyGeometry::from_surrogate(&surrogate);
        let cloud = fk_occupancy(&geometry, &sampling, &nominal_stance(&surrogate)).unwrap();
        let occupancy = {
            let net =
                MlpParams::init(JOINT_DIM, &[4], 3 * cloud.points.len(), 1.0, &mut rng);
            OccupancyModel {
                input_offset: DVector::zeros(JOINT_DIM),
                input_scale: DVector::from_element(JOINT_DIM, 1.0),
                base: cloud.to_flat(),
                net: net.zeroed(),
            }
        };
        let map = VoxelMap::new(0.1).unwrap();
        let mppi = quick_mppi();
        let nav = NavigationConfig {
            max_duration: 1.0,
            ..quick_nav()
        };
        let t = NavigationTask {
            map: &map,
            goal: GoalPose::new(0.5, 0.0, 0.0),
            mppi: &mppi,
            nav: &nav,
            surrogate: &surrogate,
            planner_sampling: &sampling,
            model: Some(&model),
            clouds: Some(CloudSource::Model(&occupancy)),
        };
        let results = run_navigation(&t, PredictorChoice::Learned, &[0, 1]).unwrap();
        assert_eq!(results.len(), 2);
        for r in &results {
            assert!(r.final_position_error.is_finite());
            assert!(r.plan_cycles >= 1);
        }
    }
}
