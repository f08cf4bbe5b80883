#pragma once

#include <cstdint>

namespace vivqa::optim {

struct ScheduleConfig {
    double peak_lr = 3e-5;
    std::uint64_t total_steps = 0;
    double warmup_ratio = 0.1;
    double floor_lr = 0.0;
};

/// Number of warmup steps: ceil(warmup_ratio * total_steps).
std::uint64_t warmup_steps(const ScheduleConfig& cfg);

/// Linear warmup from 0 to peak_lr, then half-cosine decay to floor_lr at
/// total_steps. Throws ArgumentError for step > total_steps.
double lr_at(std::uint64_t step, const ScheduleConfig& cfg);

}  // namespace vivqa::optim
