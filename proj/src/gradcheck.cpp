#include "flexssl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flexssl {

double finite_diff_check(const Objective& objective, ParamStore& params, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
    params.zero_grad();
    objective().backward();

    double worst = 0.0;
    for (auto& e : params.entries()) {
        std::vector<double> analytic(e.param.grad().begin(), e.param.grad().end());
        auto x = e.param.mutable_values();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x[i];
            x[i] = saved + h;
            const double up = objective().item();
            x[i] = saved - h;
            const double down = objective().item();
            x[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
        }
    }
    params.clear_grad();
    return worst;
}

}  // namespace flexssl
