//! Issue scheduling, collector allocation, cache replacement and the
//! comparator policies.

pub mod allocation;
pub mod priority;
pub mod replacement;
pub mod window;

pub use allocation::{
    malekeh_allocation, naive_allocation, private_allocation, random_free, AllocationDecision,
    CollectorStatus, SchedulerState,
};
pub use priority::{gto_priority, malekeh_priority};
pub use replacement::ReplacementPolicy;
pub use window::SlidingWindow;
