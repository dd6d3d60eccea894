pub mod checkpoint;
pub mod config;
pub mod datagen;
pub mod engine;
pub mod geom;
pub mod io_util;
pub mod mesh;
pub mod nn;
pub mod obs;
pub mod report;
pub mod reward;
pub mod sac;

/// Guide chapters, compiled so their snippets run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/shapes.md")]
    struct Shapes;
    #[doc = include_str!("../../../book/src/reward.md")]
    struct Reward;
    #[doc = include_str!("../../../book/src/observation.md")]
    struct Observation;
    #[doc = include_str!("../../../book/src/agent.md")]
    struct AgentChapter;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/meshing.md")]
    struct Meshing;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
