#include "vivqa/optim/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vivqa/core/errors.hpp"

namespace vivqa::optim {

namespace {

void validate(const ScheduleConfig& cfg) {
    if (!(cfg.peak_lr > 0.0)) throw ArgumentError("schedule: peak_lr must be positive");
    if (!(cfg.warmup_ratio >= 0.0 && cfg.warmup_ratio < 1.0)) {
        throw ArgumentError("schedule: warmup_ratio must lie in [0, 1)");
    }
}

}  // namespace

std::uint64_t warmup_steps(const ScheduleConfig& cfg) {
    validate(cfg);
    return static_cast<std::uint64_t>(std::ceil(cfg.warmup_ratio * static_cast<double>(cfg.total_steps)));
}

double lr_at(std::uint64_t step, const ScheduleConfig& cfg) {
    validate(cfg);
    if (step > cfg.total_steps) {
        throw ArgumentError("lr_at: step " + std::to_string(step) + " beyond total_steps " +
                            std::to_string(cfg.total_steps));
    }
    const std::uint64_t warmup = warmup_steps(cfg);
    if (step < warmup) return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
    const std::uint64_t decay_steps = cfg.total_steps - warmup;
    if (decay_steps == 0) return cfg.peak_lr;
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(decay_steps);
    return cfg.floor_lr + (cfg.peak_lr - cfg.floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace vivqa::optim
