#include "ropepp/scaling.hpp"

#include "ropepp/common.hpp"

namespace ropepp {

RotaryParams ntk_rebase(const RotaryParams& params, double new_base) {
    require(new_base > 1.0, "ntk_rebase: new_base must be > 1");
    return build_thetas(params.head_dim, new_base);
}

double linear_pi(double position, double s) {
    require(s >= 1.0, "linear_pi: interpolation factor must be >= 1");
    return position / s;
}

RotaryParams apply_scaling(const RotaryParams& params, const ScalingSpec& spec) {
    if (spec.kind == ScalingKind::ntk_rebase) {
        return ntk_rebase(params, spec.new_base);
    }
    if (spec.kind == ScalingKind::linear_pi) {
        require(spec.factor >= 1.0, "apply_scaling: linear_pi factor must be >= 1");
    }
    return params;
}

std::function<double(double)> position_transform(const ScalingSpec& spec) {
    if (spec.kind == ScalingKind::linear_pi) {
        const double s = spec.factor;
        require(s >= 1.0, "position_transform: linear_pi factor must be >= 1");
        return [s](double position) { return position / s; };
    }
    return [](double position) { return position; };
}

} // namespace ropepp
