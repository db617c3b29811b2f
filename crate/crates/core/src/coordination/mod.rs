//! Task assignment: the HQ tracking and search auctions, the agents'
//! independent fallback, hysteresis and the lossy message bus.

mod agent;
mod bus;
mod hq;

pub use agent::{
    agent_independent_step, plan_search, plan_track, search_candidates, track_candidates, Action, Decision,
    SearchContext, TrackContext,
};
pub use bus::{BusConfig, Channel, Envelope, MessageBus};
pub use hq::{
    check_assign_available, expected_post_action_trace, hq_assign_search, hq_assign_tracking, AgentStatus,
    Assignment, Bid, HqBroadcast, HqState, Message, Task, TrackSummary,
};
