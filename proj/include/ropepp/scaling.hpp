#pragma once

#include <functional>

#include "ropepp/rotary.hpp"

namespace ropepp {

// Context-extension transforms applied before scoring.
enum class ScalingKind { none, ntk_rebase, linear_pi };

struct ScalingSpec {
    ScalingKind kind = ScalingKind::none;
    double new_base = 0.0; // ntk_rebase only
    double factor = 0.0;   // linear_pi only
};

// Rebuilds the frequency schedule with a new base; head_dim unchanged.
RotaryParams ntk_rebase(const RotaryParams& params, double new_base);

// Divides the position index by s; downstream scoring takes the resulting
// real-valued effective position.
double linear_pi(double position, double s);

// Extension point for remapping schemes that adjust each frequency's angle
// individually (e.g. ramp-based interpolation). Receives (theta_n, position)
// and returns the rotation angle. The default is theta_n * position.
using AngleRemap = std::function<double(double theta, double position)>;

// Applies the spec: ntk_rebase swaps the schedule, linear_pi leaves it alone
// (positions get divided instead via position_transform).
RotaryParams apply_scaling(const RotaryParams& params, const ScalingSpec& spec);

// Position mapping implied by the spec (identity except linear_pi).
std::function<double(double)> position_transform(const ScalingSpec& spec);

} // namespace ropepp
