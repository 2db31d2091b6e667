use proptest::prelude::*;

use vlmpc_core::course::{fixture, ObstacleClass, FIXTURE_NAMES, ROBOT_RADIUS};
use vlmpc_core::skills::{Magnitude, SkillCommand, SkillKind};
use vlmpc_core::world::{step_skill, RobotState};

const TOL: f64 = 1e-9;

fn command() -> impl Strategy<Value = SkillCommand> {
    (0usize..6, 0usize..3).prop_map(|(s, m)| SkillCommand::new(SkillKind::ALL[s], Magnitude::ALL[m]))
}

fn admits_class(cmd: SkillCommand, class: ObstacleClass) -> bool {
    match class {
        ObstacleClass::Wall => false,
        ObstacleClass::LowOverhang => cmd.skill == SkillKind::Crawl,
        ObstacleClass::Step => cmd.skill == SkillKind::Climb,
        ObstacleClass::GoalMarker => true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn robot_never_penetrates_what_blocks_it(course_ix in 0usize..5, cmds in proptest::collection::vec(command(), 1..40)) {
        let course = fixture(FIXTURE_NAMES[course_ix]).unwrap();
        let mut s = RobotState::initial(&course);
        for cmd in cmds {
            let next = step_skill(&s, &course, cmd);
            let (p0, p1) = (s.pose.position(), next.pose.position());
            prop_assert!(course.bounds.contains_disc(p1, ROBOT_RADIUS - TOL));
            for o in &course.obstacles {
                let before = o.shape.signed_distance(p0);
                let after = o.shape.signed_distance(p1);
                if o.class == ObstacleClass::Wall {
                    prop_assert!(after >= ROBOT_RADIUS - TOL, "wall entered by {cmd}");
                } else if !admits_class(cmd, o.class) {
                    prop_assert!(after >= before.min(ROBOT_RADIUS) - TOL, "{:?} entered deeper by {cmd}", o.class);
                }
            }
            s = next;
        }
    }

    #[test]
    fn clock_is_the_exact_sum_of_durations(cmds in proptest::collection::vec(command(), 0..60)) {
        let course = fixture("indoor2").unwrap();
        let mut s = RobotState::initial(&course);
        let mut expected = 0.0;
        for cmd in &cmds {
            s = step_skill(&s, &course, *cmd);
            expected += cmd.params().duration;
            prop_assert_eq!(s.sim_time, expected);
        }
    }

    #[test]
    fn stepping_is_bitwise_deterministic(course_ix in 0usize..5, cmds in proptest::collection::vec(command(), 1..30)) {
        let course = fixture(FIXTURE_NAMES[course_ix]).unwrap();
        let run = || {
            let mut s = RobotState::initial(&course);
            let mut out = Vec::new();
            for cmd in &cmds {
                s = step_skill(&s, &course, *cmd);
                out.push((s.pose.x.to_bits(), s.pose.y.to_bits(), s.pose.heading.to_bits(), s.stuck));
            }
            out
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn turns_never_translate(course_ix in 0usize..5, pre in proptest::collection::vec(command(), 0..10), m in 0usize..3, left: bool) {
        let course = fixture(FIXTURE_NAMES[course_ix]).unwrap();
        let mut s = RobotState::initial(&course);
        for cmd in pre {
            s = step_skill(&s, &course, cmd);
        }
        let skill = if left { SkillKind::TurnLeft } else { SkillKind::TurnRight };
        let t = step_skill(&s, &course, SkillCommand::new(skill, Magnitude::ALL[m]));
        prop_assert_eq!((t.pose.x, t.pose.y), (s.pose.x, s.pose.y));
        prop_assert!(!t.stuck);
    }
}
